/**
 * Session persistence scoped to the browser tab. Only the session lives in
 * the browser; everything else is re-fetched from the service.
 */
import type { Session } from "./types.js";

const SESSION_KEY = "somnoline_session";

function storageAvailable(): boolean {
  return typeof sessionStorage !== "undefined";
}

export function saveSession(session: Session): void {
  if (storageAvailable()) {
    sessionStorage.setItem(SESSION_KEY, JSON.stringify(session));
  }
}

export function loadSession(): Session | null {
  if (!storageAvailable()) return null;
  const raw = sessionStorage.getItem(SESSION_KEY);
  if (!raw) return null;
  try {
    return JSON.parse(raw) as Session;
  } catch {
    return null;
  }
}

export function clearSession(): void {
  if (storageAvailable()) {
    sessionStorage.removeItem(SESSION_KEY);
  }
}

export function isAdmin(session: Session | null): boolean {
  return session?.role === "admin";
}
