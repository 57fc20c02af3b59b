/**
 * Root console: login gate, tab navigation, and a recordings poller that
 * keeps the table live without page reloads. The admin tab only exists for
 * admin sessions; non-admins never see foreign-center data.
 */
import { ApiClient } from "./api.js";
import { Poller } from "./polling.js";
import { clearSession, isAdmin, loadSession, saveSession } from "./session.js";
import type { Session } from "./types.js";
import { renderAdmin, type AdminView } from "./views/admin.js";
import { renderLogin } from "./views/login.js";
import {
  renderRecordings,
  type DownloadSink,
  type RecordingsView,
} from "./views/recordings.js";
import { renderUpload, type UploadView } from "./views/upload.js";

export interface ConsoleOptions {
  pollIntervalMs?: number;
  downloadSink?: DownloadSink;
}

type Tab = "upload" | "recordings" | "admin";

export class ConsoleApp {
  session: Session | null = null;
  poller: Poller | null = null;
  private uploadView: UploadView | null = null;
  private recordingsView: RecordingsView | null = null;
  private adminView: AdminView | null = null;
  private activeTab: Tab = "recordings";

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private options: ConsoleOptions = {},
  ) {}

  start(): void {
    const existing = loadSession();
    if (existing) {
      this.session = existing;
      this.api.token = existing.token;
      this.renderShell();
    } else {
      this.renderLoginGate();
    }
  }

  stop(): void {
    this.poller?.stop();
    this.poller = null;
  }

  private renderLoginGate(): void {
    this.stop();
    renderLogin(this.root, {
      onSubmit: async (username, secret) => {
        const session = await this.api.login(username, secret);
        this.session = session;
        saveSession(session);
        this.renderShell();
      },
    });
  }

  private renderShell(): void {
    const session = this.session!;
    this.root.innerHTML = `
      <header class="topbar">
        <h1>somnoline console</h1>
        <nav>
          <button data-tab="upload">Upload</button>
          <button data-tab="recordings">Recordings</button>
        </nav>
        <span class="whoami"></span>
        <button class="logout">Log out</button>
      </header>
      <p class="status" role="status" hidden></p>
      <main></main>
    `;
    this.root.querySelector<HTMLSpanElement>(".whoami")!.textContent =
      `${session.username} (${session.center_id}, ${session.role})`;
    if (isAdmin(session)) {
      const nav = this.root.querySelector("nav")!;
      const button = document.createElement("button");
      button.dataset.tab = "admin";
      button.textContent = "Admin";
      nav.appendChild(button);
    }
    this.root.querySelectorAll<HTMLButtonElement>("nav button").forEach((button) =>
      button.addEventListener("click", () => this.showTab(button.dataset.tab as Tab)),
    );
    this.root.querySelector<HTMLButtonElement>(".logout")!.addEventListener(
      "click",
      () => {
        clearSession();
        this.session = null;
        this.api.token = null;
        this.renderLoginGate();
      },
    );
    this.showTab("recordings");
    this.startPolling();
  }

  private statusLine(message: string | null): void {
    const status = this.root.querySelector<HTMLParagraphElement>(".status");
    if (!status) return;
    status.hidden = message === null;
    status.textContent = message ?? "";
  }

  private showTab(tab: Tab): void {
    if (tab === "admin" && !isAdmin(this.session)) return;
    this.activeTab = tab;
    const main = this.root.querySelector<HTMLElement>("main")!;
    this.root
      .querySelectorAll<HTMLButtonElement>("nav button")
      .forEach((b) => b.classList.toggle("active", b.dataset.tab === tab));
    this.uploadView = null;
    this.recordingsView = null;
    this.adminView = null;
    if (tab === "upload") {
      this.uploadView = renderUpload(main, {
        api: this.api,
        onUploaded: () =>
          void this.refreshOnce().catch((err: Error) => this.statusLine(err.message)),
      });
    } else if (tab === "recordings") {
      this.recordingsView = renderRecordings(main, {
        api: this.api,
        onError: (message) => this.statusLine(message),
        downloadSink: this.options.downloadSink,
      });
      void this.refreshOnce().catch((err: Error) => this.statusLine(err.message));
    } else {
      this.adminView = renderAdmin(main, {
        api: this.api,
        onError: (message) => this.statusLine(message),
      });
      void this.adminView.refresh().catch(() => undefined);
    }
  }

  /** Used by tests and the upload flow to force an immediate poll. */
  async refreshOnce(): Promise<void> {
    const records = await this.api.listRecordings();
    this.recordingsView?.update(records);
    if (this.activeTab === "admin") await this.adminView?.refresh();
    this.statusLine(null);
  }

  uploadFiles(files: File[]): Promise<void> {
    if (!this.uploadView) throw new Error("upload view is not active");
    return this.uploadView.handleFiles(files);
  }

  private startPolling(): void {
    this.poller?.stop();
    this.poller = new Poller(
      async () => {
        try {
          await this.refreshOnce();
        } catch (err) {
          this.statusLine(`connection problem: ${(err as Error).message}`);
          throw err;
        }
      },
      { intervalMs: this.options.pollIntervalMs ?? 5000 },
    );
    this.poller.start();
  }
}
