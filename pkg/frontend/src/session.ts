/** Session flow: device capture, trial sequencing, resume, completion. */

import { ApiClient, DEVICES, Device, NextTrial } from "./api";
import { AudioSink, ConfirmFn, TrialController } from "./trial";

/** Minimal persistent key-value store; localStorage in the browser. */
export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const STORAGE_KEY = "effortlab.session";

interface StoredSession {
  sessionId: string;
  listenerId: string;
  total: number;
}

/** End-of-session view: counts only, never scores, to avoid biasing the
 * listener mid-study. */
export interface Completion {
  total: number;
}

export class SessionFlow {
  private stored: StoredSession | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly store: KeyValueStore,
    private readonly audio: AudioSink,
    private readonly confirm: ConfirmFn,
  ) {}

  /** True when a reload can pick up an in-flight session. */
  get canResume(): boolean {
    return this.store.getItem(STORAGE_KEY) !== null;
  }

  get active(): boolean {
    return this.stored !== null;
  }

  /** Begin a new session. The device choice is mandatory. */
  async start(listenerId: string, device: string): Promise<void> {
    if (!(DEVICES as readonly string[]).includes(device)) {
      throw new Error(`select a playback device (one of: ${DEVICES.join(", ")})`);
    }
    const info = await this.client.createSession(listenerId, device as Device);
    this.stored = {
      sessionId: info.session_id,
      listenerId: info.listener_id,
      total: info.n_trials,
    };
    this.store.setItem(STORAGE_KEY, JSON.stringify(this.stored));
  }

  /** Pick up the stored session after a reload; the server-side cursor
   * already points at the first unanswered trial. */
  resume(): void {
    const raw = this.store.getItem(STORAGE_KEY);
    if (raw === null) {
      throw new Error("no stored session to resume");
    }
    this.stored = JSON.parse(raw) as StoredSession;
  }

  /** Fetch the next trial, or null with completion recorded when done. */
  async nextTrial(): Promise<TrialController | null> {
    const session = this.requireSession();
    const next: NextTrial = await this.client.nextTrial(session.sessionId);
    if (next.done) {
      this.store.removeItem(STORAGE_KEY);
      this.stored = null;
      return null;
    }
    return new TrialController(
      this.client,
      session.sessionId,
      next,
      this.audio,
      this.confirm,
    );
  }

  progress(next: NextTrial): { index: number; total: number } {
    return { index: next.index, total: next.total };
  }

  completion(): Completion {
    const raw = this.store.getItem(STORAGE_KEY);
    if (raw !== null) {
      throw new Error("session still in progress");
    }
    return { total: this.lastTotal };
  }

  private lastTotal = 0;

  private requireSession(): StoredSession {
    if (this.stored === null) {
      throw new Error("no active session");
    }
    this.lastTotal = this.stored.total;
    return this.stored;
  }
}
