/**
 * Fixed-interval poller with exponential backoff on repeated failure.
 * Jobs run for minutes, so 5 s polling is plenty; consecutive errors stretch
 * the delay up to a cap and one success snaps it back.
 */

export interface PollerOptions {
  intervalMs?: number;
  maxIntervalMs?: number;
  backoffFactor?: number;
}

export class Poller {
  readonly intervalMs: number;
  readonly maxIntervalMs: number;
  readonly backoffFactor: number;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private running = false;
  currentDelayMs: number;
  consecutiveFailures = 0;

  constructor(
    private task: () => Promise<void>,
    options: PollerOptions = {},
  ) {
    this.intervalMs = options.intervalMs ?? 5000;
    this.maxIntervalMs = options.maxIntervalMs ?? 60_000;
    this.backoffFactor = options.backoffFactor ?? 2;
    this.currentDelayMs = this.intervalMs;
  }

  start(): void {
    if (this.running) return;
    this.running = true;
    void this.tick();
  }

  stop(): void {
    this.running = false;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  private async tick(): Promise<void> {
    if (!this.running) return;
    try {
      await this.task();
      this.consecutiveFailures = 0;
      this.currentDelayMs = this.intervalMs;
    } catch {
      this.consecutiveFailures += 1;
      this.currentDelayMs = Math.min(
        this.currentDelayMs * this.backoffFactor,
        this.maxIntervalMs,
      );
    }
    if (this.running) {
      this.timer = setTimeout(() => void this.tick(), this.currentDelayMs);
    }
  }
}
