/**
 * Typed client for the somnoline service. Every console fact comes from
 * these endpoints; nothing lives only in the browser except the session.
 */
import type { BundleKind, QueueStats, Session, UploadRecord } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface UploadOptions {
  filename?: string;
  onProgress?: (fraction: number) => void;
}

export interface ApiClientOptions {
  /** Injectable for tests; defaults to the global fetch. */
  fetchFn?: typeof fetch;
  /** "xhr" enables upload progress events; "fetch" is the portable path. */
  uploadTransport?: "xhr" | "fetch";
}

async function errorOf(response: Response): Promise<ApiError> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    /* non-JSON error body */
  }
  return new ApiError(response.status, detail);
}

export class ApiClient {
  private fetchFn: typeof fetch;
  private uploadTransport: "xhr" | "fetch";
  token: string | null = null;

  constructor(
    public baseUrl: string,
    options: ApiClientOptions = {},
  ) {
    this.fetchFn = options.fetchFn ?? fetch.bind(globalThis);
    this.uploadTransport =
      options.uploadTransport ??
      (typeof XMLHttpRequest !== "undefined" ? "xhr" : "fetch");
  }

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    const headers: Record<string, string> = { ...extra };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async request(path: string, init: RequestInit = {}): Promise<Response> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      ...init,
      headers: this.headers((init.headers as Record<string, string>) ?? {}),
    });
    if (!response.ok) throw await errorOf(response);
    return response;
  }

  async login(username: string, secret: string): Promise<Session> {
    const response = await this.request("/auth/login", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ username, secret }),
    });
    const body = await response.json();
    this.token = body.token;
    return {
      token: body.token,
      username,
      role: body.role,
      center_id: body.center_id,
    };
  }

  async listRecordings(): Promise<UploadRecord[]> {
    const response = await this.request("/recordings");
    return (await response.json()).recordings;
  }

  async getRecording(recordingId: string): Promise<UploadRecord> {
    const response = await this.request(`/recordings/${recordingId}`);
    return response.json();
  }

  async adminUploads(center?: string): Promise<UploadRecord[]> {
    const query = center ? `?center=${encodeURIComponent(center)}` : "";
    const response = await this.request(`/admin/uploads${query}`);
    return (await response.json()).recordings;
  }

  async queueStats(): Promise<QueueStats> {
    const response = await this.request("/queues/stats");
    return response.json();
  }

  async upload(file: Blob, options: UploadOptions = {}): Promise<string> {
    const filename = options.filename ?? (file instanceof File ? file.name : "upload.edf");
    if (this.uploadTransport === "xhr") {
      return this.uploadViaXhr(file, filename, options.onProgress);
    }
    const response = await this.request("/recordings", {
      method: "POST",
      headers: { "X-Filename": filename },
      body: file,
    });
    options.onProgress?.(1);
    return (await response.json()).recording_id;
  }

  /** XHR path: the only browser API that reports upload progress. */
  private uploadViaXhr(
    file: Blob,
    filename: string,
    onProgress?: (fraction: number) => void,
  ): Promise<string> {
    return new Promise((resolve, reject) => {
      const xhr = new XMLHttpRequest();
      xhr.open("POST", `${this.baseUrl}/recordings`);
      for (const [key, value] of Object.entries(
        this.headers({ "X-Filename": filename }),
      )) {
        xhr.setRequestHeader(key, value);
      }
      xhr.upload.onprogress = (event) => {
        if (event.lengthComputable && event.total > 0) {
          onProgress?.(event.loaded / event.total);
        }
      };
      xhr.onerror = () => reject(new ApiError(0, "network error during upload"));
      xhr.onload = () => {
        if (xhr.status >= 200 && xhr.status < 300) {
          onProgress?.(1);
          resolve(JSON.parse(xhr.responseText).recording_id);
        } else {
          let detail = xhr.statusText;
          try {
            detail = JSON.parse(xhr.responseText).detail ?? detail;
          } catch {
            /* keep statusText */
          }
          reject(new ApiError(xhr.status, detail));
        }
      };
      xhr.send(file);
    });
  }

  async downloadBundle(
    recordingId: string,
    nightIndex: number,
    bundle: BundleKind,
  ): Promise<{ filename: string; bytes: Uint8Array }> {
    const response = await this.request(
      `/recordings/${recordingId}/nights/${nightIndex}/${bundle}`,
    );
    const bytes = new Uint8Array(await response.arrayBuffer());
    return { filename: `${recordingId}_night_${nightIndex}_${bundle}.zip`, bytes };
  }
}
