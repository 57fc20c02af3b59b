/** Admin oversight: cross-center upload listing and queue depth gauges. */
import type { ApiClient } from "../api.js";
import type { QueueStats, UploadRecord } from "../types.js";

export interface AdminViewOptions {
  api: ApiClient;
  onError?: (message: string) => void;
}

export interface AdminView {
  refresh(): Promise<void>;
  update(records: UploadRecord[], stats: QueueStats): void;
}

export function renderAdmin(container: HTMLElement, options: AdminViewOptions): AdminView {
  container.innerHTML = `
    <section class="admin-view">
      <div class="gauges">
        <div class="gauge" data-queue="split"><h3>Splitter queue</h3><dl></dl></div>
        <div class="gauge" data-queue="process"><h3>Processor queue</h3><dl></dl></div>
      </div>
      <form class="filter">
        <label>Center <input name="center" placeholder="all centers"></label>
        <button type="submit">Filter</button>
      </form>
      <table class="admin-uploads">
        <thead>
          <tr><th>Recording</th><th>Center</th><th>Uploader</th><th>State</th></tr>
        </thead>
        <tbody></tbody>
      </table>
    </section>
  `;
  const form = container.querySelector<HTMLFormElement>(".filter")!;
  const tbody = container.querySelector<HTMLTableSectionElement>("tbody")!;

  function gauge(queue: "split" | "process", stats: QueueStats): void {
    const dl = container.querySelector<HTMLDListElement>(
      `.gauge[data-queue="${queue}"] dl`,
    )!;
    const depths = stats[queue];
    dl.innerHTML = "";
    for (const key of ["pending", "in_flight", "dead_letter"] as const) {
      const dt = document.createElement("dt");
      dt.textContent = key;
      const dd = document.createElement("dd");
      dd.textContent = String(depths[key]);
      dd.className = `depth-${key}`;
      dl.append(dt, dd);
    }
  }

  function update(records: UploadRecord[], stats: QueueStats): void {
    gauge("split", stats);
    gauge("process", stats);
    tbody.innerHTML = "";
    for (const record of records) {
      const row = document.createElement("tr");
      for (const text of [
        record.recording_id,
        record.center_id,
        record.uploader,
        record.state,
      ]) {
        const cell = document.createElement("td");
        cell.textContent = text;
        row.appendChild(cell);
      }
      tbody.appendChild(row);
    }
  }

  async function refresh(): Promise<void> {
    const center = new FormData(form).get("center");
    try {
      const [records, stats] = await Promise.all([
        options.api.adminUploads(center ? String(center) : undefined),
        options.api.queueStats(),
      ]);
      update(records, stats);
    } catch (err) {
      options.onError?.((err as Error).message);
      throw err;
    }
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void refresh();
  });

  return { refresh, update };
}
