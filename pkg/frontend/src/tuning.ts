/** Debounced threshold tuning with stale-response protection.
 *
 * At most one LASA request is in flight per view; while one is pending the
 * latest slider state is parked and sent afterwards. A response is applied
 * only if its state is still current and its version is not older than the
 * last applied one, so out-of-order answers are discarded. Service errors
 * surface through onError and never clobber the slider state. */

export interface Versioned {
  version: number;
}

export type Scheduler = (fn: () => void, delayMs: number) => () => void;

const defaultScheduler: Scheduler = (fn, delayMs) => {
  const handle = setTimeout(fn, delayMs);
  return () => clearTimeout(handle);
};

export interface FetcherOptions<TState, TResult extends Versioned> {
  send: (state: TState) => Promise<TResult>;
  onResult: (result: TResult, state: TState) => void;
  onError: (error: unknown, state: TState) => void;
  delayMs?: number;
  schedule?: Scheduler;
}

export class DebouncedFetcher<TState, TResult extends Versioned> {
  private cancelPending: (() => void) | null = null;
  private inFlight = false;
  private queued: TState | null = null;
  private current: TState | null = null;
  private lastAppliedVersion = -1;
  private readonly delayMs: number;
  private readonly schedule: Scheduler;

  constructor(private readonly options: FetcherOptions<TState, TResult>) {
    this.delayMs = options.delayMs ?? 150;
    this.schedule = options.schedule ?? defaultScheduler;
  }

  /** Record a new slider state; only the final state of a burst is sent. */
  update(state: TState): void {
    this.current = state;
    if (this.cancelPending) this.cancelPending();
    this.cancelPending = this.schedule(() => {
      this.cancelPending = null;
      void this.dispatch(state);
    }, this.delayMs);
  }

  get busy(): boolean {
    return this.inFlight || this.cancelPending !== null;
  }

  private async dispatch(state: TState): Promise<void> {
    if (this.inFlight) {
      this.queued = state;
      return;
    }
    this.inFlight = true;
    try {
      const result = await this.options.send(state);
      const stale =
        result.version < this.lastAppliedVersion || (this.queued !== null && this.queued !== state);
      if (!stale && state === this.current) {
        this.lastAppliedVersion = Math.max(this.lastAppliedVersion, result.version);
        this.options.onResult(result, state);
      }
    } catch (error) {
      this.options.onError(error, state);
    } finally {
      this.inFlight = false;
      const next = this.queued;
      this.queued = null;
      if (next !== null) void this.dispatch(next);
    }
  }
}
