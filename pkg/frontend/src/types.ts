/** Wire types mirrored from the service's JSON surface. */

/** Exactly the service's UploadRecord state enumeration; badges use this set. */
export const UPLOAD_STATES = [
  "received",
  "splitting",
  "split",
  "processing",
  "ready",
  "failed",
] as const;

export type UploadState = (typeof UPLOAD_STATES)[number];

export interface NightStatus {
  index: number;
  state: "processing" | "ready";
}

export interface UploadRecord {
  recording_id: string;
  center_id: string;
  uploader: string;
  size_bytes: number;
  state: UploadState;
  filename: string;
  nights: NightStatus[];
  timestamps: Record<string, number>;
}

export interface QueueDepths {
  pending: number;
  in_flight: number;
  dead_letter: number;
}

export interface QueueStats {
  split: QueueDepths;
  process: QueueDepths;
}

export interface Session {
  token: string;
  username: string;
  role: "technologist" | "admin";
  center_id: string;
}

export type BundleKind = "scoring" | "ml";
