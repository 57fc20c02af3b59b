/** Drag/drop + file-picker uploads with a per-file progress row. */
import type { ApiClient } from "../api.js";

export interface UploadViewOptions {
  api: ApiClient;
  onUploaded?: (recordingId: string) => void;
}

export interface UploadView {
  /** Programmatic entry used by both the drop zone and the file input. */
  handleFiles(files: ArrayLike<File>): Promise<void>;
}

export function renderUpload(
  container: HTMLElement,
  options: UploadViewOptions,
): UploadView {
  container.innerHTML = `
    <section class="upload-view">
      <div class="dropzone" tabindex="0">
        <p>Drop PSG recordings here or</p>
        <label class="picker">choose files<input type="file" multiple hidden></label>
      </div>
      <ul class="upload-list"></ul>
    </section>
  `;
  const dropzone = container.querySelector<HTMLDivElement>(".dropzone")!;
  const input = container.querySelector<HTMLInputElement>("input[type=file]")!;
  const list = container.querySelector<HTMLUListElement>(".upload-list")!;

  async function uploadOne(file: File): Promise<void> {
    const item = document.createElement("li");
    item.innerHTML = `
      <span class="name"></span>
      <progress max="1" value="0"></progress>
      <span class="status">uploading</span>
    `;
    item.querySelector(".name")!.textContent = file.name;
    const progress = item.querySelector<HTMLProgressElement>("progress")!;
    const status = item.querySelector<HTMLSpanElement>(".status")!;
    list.appendChild(item);
    try {
      const recordingId = await options.api.upload(file, {
        filename: file.name,
        onProgress: (fraction) => {
          progress.value = fraction;
        },
      });
      status.textContent = `uploaded as ${recordingId}`;
      item.classList.add("done");
      options.onUploaded?.(recordingId);
    } catch (err) {
      status.textContent = `failed: ${(err as Error).message}`;
      item.classList.add("failed");
    }
  }

  async function handleFiles(files: ArrayLike<File>): Promise<void> {
    await Promise.all(Array.from(files).map(uploadOne));
  }

  dropzone.addEventListener("dragover", (event) => {
    event.preventDefault();
    dropzone.classList.add("over");
  });
  dropzone.addEventListener("dragleave", () => dropzone.classList.remove("over"));
  dropzone.addEventListener("drop", (event) => {
    event.preventDefault();
    dropzone.classList.remove("over");
    const files = event.dataTransfer?.files;
    if (files && files.length) void handleFiles(files);
  });
  input.addEventListener("change", () => {
    if (input.files) void handleFiles(input.files);
    input.value = "";
  });

  return { handleFiles };
}
