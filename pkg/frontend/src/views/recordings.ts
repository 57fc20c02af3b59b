/** Live table of the center's recordings: states, nights, downloads. */
import type { ApiClient } from "../api.js";
import type { BundleKind, UploadRecord } from "../types.js";

export type DownloadSink = (filename: string, bytes: Uint8Array) => void;

/** Default browser behavior: hand the bytes to the user as a file. */
export function browserDownloadSink(filename: string, bytes: Uint8Array): void {
  const url = URL.createObjectURL(new Blob([bytes as BlobPart], { type: "application/zip" }));
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = filename;
  anchor.click();
  URL.revokeObjectURL(url);
}

export interface RecordingsViewOptions {
  api: ApiClient;
  onError?: (message: string) => void;
  downloadSink?: DownloadSink;
}

export interface RecordingsView {
  update(records: UploadRecord[]): void;
}

export function renderRecordings(
  container: HTMLElement,
  options: RecordingsViewOptions,
): RecordingsView {
  container.innerHTML = `
    <section class="recordings-view">
      <table class="recordings">
        <thead>
          <tr><th>Recording</th><th>File</th><th>Size</th><th>State</th><th>Nights</th></tr>
        </thead>
        <tbody></tbody>
      </table>
      <p class="empty" hidden>No recordings yet.</p>
    </section>
  `;
  const tbody = container.querySelector<HTMLTableSectionElement>("tbody")!;
  const empty = container.querySelector<HTMLParagraphElement>(".empty")!;
  const sink = options.downloadSink ?? browserDownloadSink;

  function downloadButton(
    record: UploadRecord,
    nightIndex: number,
    bundle: BundleKind,
  ): HTMLButtonElement {
    const button = document.createElement("button");
    button.className = `download ${bundle}`;
    button.textContent = bundle;
    button.addEventListener("click", () => {
      options.api
        .downloadBundle(record.recording_id, nightIndex, bundle)
        .then(({ filename, bytes }) => sink(filename, bytes))
        .catch((err: Error) => options.onError?.(err.message));
    });
    return button;
  }

  function nightCell(record: UploadRecord): HTMLTableCellElement {
    const cell = document.createElement("td");
    for (const night of record.nights) {
      const wrap = document.createElement("span");
      wrap.className = "night";
      const badge = document.createElement("span");
      badge.className = `badge night-${night.state}`;
      badge.textContent = `night ${night.index}: ${night.state}`;
      wrap.appendChild(badge);
      if (night.state === "ready") {
        wrap.appendChild(downloadButton(record, night.index, "scoring"));
        wrap.appendChild(downloadButton(record, night.index, "ml"));
      }
      cell.appendChild(wrap);
    }
    return cell;
  }

  function update(records: UploadRecord[]): void {
    tbody.innerHTML = "";
    empty.hidden = records.length > 0;
    for (const record of records) {
      const row = document.createElement("tr");
      row.dataset.recordingId = record.recording_id;

      const id = document.createElement("td");
      id.textContent = record.recording_id;
      const file = document.createElement("td");
      file.textContent = record.filename || "-";
      const size = document.createElement("td");
      size.textContent = `${(record.size_bytes / 1e6).toFixed(1)} MB`;
      const state = document.createElement("td");
      const badge = document.createElement("span");
      badge.className = `badge state-${record.state}`;
      badge.textContent = record.state;
      state.appendChild(badge);

      row.append(id, file, size, state, nightCell(record));
      tbody.appendChild(row);
    }
  }

  return { update };
}
