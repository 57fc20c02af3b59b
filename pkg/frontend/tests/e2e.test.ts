/**
 * Scripted end-to-end session against a real somnoline service process:
 * log in, upload a three-night fixture, watch the console progress the
 * recording to ready without a reload, download both bundles, and verify
 * role gating. Requires python3 with the somnoline package installed.
 */
import { File as NodeFile } from "node:buffer";
import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { pbkdf2Sync, randomBytes } from "node:crypto";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { ConsoleApp } from "../src/app.js";
import { clearSession } from "../src/session.js";
import { UPLOAD_STATES } from "../src/types.js";

const PORT = 8796;
const BASE = `http://127.0.0.1:${PORT}`;

let workdir: string;
let server: ChildProcess | null = null;

function makeUser(username: string, secret: string, center: string, role: string) {
  const salt = randomBytes(16);
  const hash = pbkdf2Sync(secret, salt, 100_000, 32, "sha256");
  return {
    username,
    center_id: center,
    role,
    salt: salt.toString("hex"),
    secret_hash: hash.toString("hex"),
  };
}

function python(code: string): void {
  const result = spawnSync("python3", ["-c", code], { cwd: workdir });
  if (result.status !== 0) {
    throw new Error(`python failed: ${result.stderr.toString()}`);
  }
}

async function waitForService(): Promise<void> {
  const deadline = Date.now() + 60_000;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/auth/login`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ username: "alice", secret: "pw-alice" }),
      });
      if (response.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "somnoline-e2e-"));
  writeFileSync(
    join(workdir, "users.json"),
    JSON.stringify([
      makeUser("alice", "pw-alice", "center-a", "technologist"),
      makeUser("bob", "pw-bob", "center-b", "technologist"),
      makeUser("root", "pw-root", "center-a", "admin"),
    ]),
  );
  writeFileSync(
    join(workdir, "somnoline.ini"),
    [
      "[service]",
      `listen = 127.0.0.1:${PORT}`,
      "storage_root = data/storage",
      "internal_secret = e2e-secret",
      "user_file = users.json",
      "",
      "[queue]",
      "split_log = data/queues/split.log",
      "process_log = data/queues/process.log",
      "",
      "[scorer]",
      "kind = baseline",
      "channel = EEG C4-M1",
      "",
    ].join("\n"),
  );
  python(
    "from somnoline.synth import synthesize_multi_night\n" +
      "from somnoline.edf import write_recording\n" +
      "rec = synthesize_multi_night(nights=3, night_s=120.0, gap_s=57600.0, " +
      "sampling_rate=32.0, record_duration_s=10.0, seed=21)\n" +
      "open('fixture.edf', 'wb').write(write_recording(rec))\n",
  );
  server = spawn(
    "python3",
    ["-m", "somnoline.cli", "serve", "--config", "somnoline.ini"],
    { cwd: workdir, stdio: ["ignore", "ignore", "ignore"] },
  );
  await waitForService();
});

afterAll(() => {
  server?.kill();
  if (workdir) rmSync(workdir, { recursive: true, force: true });
});

function mountApp(downloads: Array<{ filename: string; bytes: Uint8Array }>) {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const api = new ApiClient(BASE, { uploadTransport: "fetch" });
  const app = new ConsoleApp(root, api, {
    pollIntervalMs: 300,
    downloadSink: (filename, bytes) => downloads.push({ filename, bytes }),
  });
  app.start();
  return { root, app, api };
}

async function login(root: HTMLElement, username: string, secret: string) {
  const form = root.querySelector("form")!;
  (form.querySelector('[name="username"]') as HTMLInputElement).value = username;
  (form.querySelector('[name="secret"]') as HTMLInputElement).value = secret;
  form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
  await vi.waitFor(
    () => {
      if (!root.querySelector("nav")) throw new Error("login pending");
    },
    { timeout: 10_000 },
  );
}

describe("console end-to-end against a live service", () => {
  it(
    "walks upload -> ready -> downloads and enforces role gating",
    async () => {
      clearSession();
      const downloads: Array<{ filename: string; bytes: Uint8Array }> = [];
      const { root, app } = mountApp(downloads);
      await login(root, "alice", "pw-alice");

      // upload the fixture through the console's upload view
      root.querySelector<HTMLButtonElement>('button[data-tab="upload"]')!.click();
      const bytes = readFileSync(join(workdir, "fixture.edf"));
      // node's File: undici streams its real bytes (jsdom's would stringify)
      const file = new NodeFile([new Uint8Array(bytes)], "fixture.edf") as unknown as File;
      await app.uploadFiles([file]);
      const status = root.querySelector(".upload-list .status")!;
      expect(status.textContent).toContain("uploaded as");
      const recordingId = status.textContent!.replace("uploaded as ", "").trim();

      // watch the recordings view progress to ready without any reload
      root
        .querySelector<HTMLButtonElement>('button[data-tab="recordings"]')!
        .click();
      await vi.waitFor(
        () => {
          const row = root.querySelector(`tr[data-recording-id="${recordingId}"]`);
          if (!row) throw new Error("row not listed yet");
          const badge = row.querySelector(".badge")!;
          if (badge.textContent !== "ready") {
            throw new Error(`still ${badge.textContent}`);
          }
        },
        { timeout: 90_000, interval: 500 },
      );
      const row = root.querySelector(`tr[data-recording-id="${recordingId}"]`)!;
      const nightBadges = [...row.querySelectorAll(".badge.night-ready")];
      expect(nightBadges.length).toBe(3);

      // download both bundles for night 0; filenames embed recording + night
      const buttons = row.querySelectorAll<HTMLButtonElement>(
        '.night:first-child button.download',
      );
      expect(buttons.length).toBe(2);
      buttons.forEach((b) => b.click());
      await vi.waitFor(
        () => {
          if (downloads.length < 2) throw new Error("downloads pending");
        },
        { timeout: 15_000 },
      );
      const names = downloads.map((d) => d.filename).sort();
      expect(names).toEqual([
        `${recordingId}_night_0_ml.zip`,
        `${recordingId}_night_0_scoring.zip`,
      ]);
      for (const download of downloads) {
        // zip magic: PK\x03\x04
        expect([...download.bytes.slice(0, 2)]).toEqual([80, 75]);
        expect(download.bytes.length).toBeGreaterThan(100);
      }
      app.stop();

      // role gating: a technologist from another center sees neither the
      // admin view nor this recording, and the admin API refuses them
      clearSession();
      document.body.innerHTML = "";
      const second = mountApp([]);
      await login(second.root, "bob", "pw-bob");
      const tabs = [...second.root.querySelectorAll<HTMLButtonElement>("nav button")]
        .map((b) => b.dataset.tab);
      expect(tabs).not.toContain("admin");
      const listed = await second.api.listRecordings();
      expect(listed.map((r) => r.recording_id)).not.toContain(recordingId);
      await expect(second.api.adminUploads("center-a")).rejects.toMatchObject({
        status: 403,
      });
      try {
        await second.api.adminUploads("center-a");
      } catch (err) {
        expect(err).toBeInstanceOf(ApiError);
      }
      second.app.stop();

      // an admin does see the recording through the oversight listing
      clearSession();
      document.body.innerHTML = "";
      const third = mountApp([]);
      await login(third.root, "root", "pw-root");
      const oversight = await third.api.adminUploads("center-a");
      expect(oversight.map((r) => r.recording_id)).toContain(recordingId);
      const stats = await third.api.queueStats();
      expect(stats.split).toHaveProperty("pending");
      expect(stats.process).toHaveProperty("dead_letter");
      third.app.stop();
    },
    120_000,
  );

  it("console badge states mirror the service enumeration", () => {
    const result = spawnSync(
      "python3",
      [
        "-c",
        "import json; from somnoline.service import STATES; " +
          "print(json.dumps(list(STATES) + ['failed']))",
      ],
      { encoding: "utf-8" },
    );
    expect(result.status).toBe(0);
    expect(JSON.parse(result.stdout)).toEqual([...UPLOAD_STATES]);
  });
});
