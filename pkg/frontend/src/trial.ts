/** One trial: a single playback, a transcript, and a durable submit. */

import { ApiClient, ApiError, NextTrial } from "./api";

/** Plays decoded audio; the browser shell backs this with an Audio element. */
export interface AudioSink {
  play(data: ArrayBuffer): Promise<void>;
}

/** Asks the listener to confirm; the browser shell backs this with confirm(). */
export type ConfirmFn = (message: string) => boolean;

export const ONCE_NOTICE = "Each sample can be played only once.";
export const EMPTY_CONFIRM =
  "Submit an empty transcription? It will be scored as zero words recognized.";

export type TrialState = "idle" | "playing" | "played" | "submitted";

export class TrialController {
  private state: TrialState = "idle";
  /** User-facing notice, e.g. when a second playback is refused. */
  notice = "";

  constructor(
    private readonly client: ApiClient,
    private readonly sessionId: string,
    readonly trial: NextTrial,
    private readonly audio: AudioSink,
    private readonly confirm: ConfirmFn,
  ) {
    if (trial.done || !trial.trial_id || !trial.audio_url) {
      throw new Error("cannot run a completed or malformed trial");
    }
  }

  get canPlay(): boolean {
    return this.state === "idle";
  }

  get canSubmit(): boolean {
    return this.state === "played";
  }

  get submitted(): boolean {
    return this.state === "submitted";
  }

  get hasPlayed(): boolean {
    return this.state === "played" || this.state === "submitted";
  }

  /** Fetch and play the stimulus. A second attempt is refused locally and
   * never reaches the server (whose token is single-use anyway). */
  async play(): Promise<boolean> {
    if (!this.canPlay) {
      this.notice = ONCE_NOTICE;
      return false;
    }
    this.state = "playing";
    let data: ArrayBuffer;
    try {
      data = await this.client.fetchAudio(this.trial.audio_url!);
    } catch (err) {
      // The token was not consumed only if the request never went through;
      // either way the listener must not get a fresh attempt.
      this.state = "played";
      throw err;
    }
    await this.audio.play(data);
    this.state = "played";
    return true;
  }

  /** Submit the transcript. Network failures leave the trial submittable
   * again but never re-enable playback; a duplicate-response conflict means
   * an earlier attempt already landed and counts as success. */
  async submit(transcript: string): Promise<boolean> {
    if (!this.canSubmit) {
      return false;
    }
    if (transcript.trim() === "" && !this.confirm(EMPTY_CONFIRM)) {
      return false;
    }
    try {
      await this.client.submitResponse(
        this.sessionId,
        this.trial.trial_id!,
        transcript,
      );
    } catch (err) {
      if (err instanceof ApiError && err.code === "duplicate") {
        this.state = "submitted";
        return true;
      }
      throw err;
    }
    this.state = "submitted";
    return true;
  }
}
