/** Browser shell: wires the session flow to a minimal form-driven page. */

import { ApiClient } from "./api";
import { SessionFlow } from "./session";
import { AudioSink, TrialController } from "./trial";

class ElementAudioSink implements AudioSink {
  async play(data: ArrayBuffer): Promise<void> {
    const url = URL.createObjectURL(new Blob([data], { type: "audio/wav" }));
    const element = new Audio(url);
    try {
      await new Promise<void>((resolve, reject) => {
        element.onended = () => resolve();
        element.onerror = () => reject(new Error("playback failed"));
        void element.play();
      });
    } finally {
      URL.revokeObjectURL(url);
    }
  }
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function bootstrap(): void {
  const client = new ApiClient("");
  const flow = new SessionFlow(
    client,
    window.localStorage,
    new ElementAudioSink(),
    (message) => window.confirm(message),
  );

  const startForm = el<HTMLFormElement>("start-form");
  const listenerInput = el<HTMLInputElement>("listener-id");
  const deviceSelect = el<HTMLSelectElement>("device");
  const startError = el<HTMLElement>("start-error");
  const trialPane = el<HTMLElement>("trial");
  const startPane = el<HTMLElement>("start");
  const donePane = el<HTMLElement>("done");
  const doneText = el<HTMLElement>("done-text");
  const progress = el<HTMLElement>("progress");
  const playButton = el<HTMLButtonElement>("play");
  const notice = el<HTMLElement>("notice");
  const transcript = el<HTMLInputElement>("transcript");
  const submitButton = el<HTMLButtonElement>("submit");

  let current: TrialController | null = null;

  async function showNextTrial(): Promise<void> {
    current = await flow.nextTrial();
    if (current === null) {
      trialPane.hidden = true;
      donePane.hidden = false;
      doneText.textContent = `All ${flow.completion().total} trials answered. Thank you!`;
      return;
    }
    const p = flow.progress(current.trial);
    progress.textContent = `Trial ${p.index + 1} of ${p.total}`;
    notice.textContent = "";
    transcript.value = "";
    playButton.disabled = false;
    submitButton.disabled = true;
    startPane.hidden = true;
    trialPane.hidden = false;
    transcript.focus();
  }

  startForm.addEventListener("submit", (event) => {
    event.preventDefault();
    flow
      .start(listenerInput.value.trim(), deviceSelect.value)
      .then(showNextTrial)
      .catch((err) => {
        startError.textContent = String(err instanceof Error ? err.message : err);
      });
  });

  playButton.addEventListener("click", () => {
    if (!current) return;
    void current
      .play()
      .catch((err) => {
        notice.textContent = String(err instanceof Error ? err.message : err);
      })
      .finally(() => {
        if (!current) return;
        playButton.disabled = !current.canPlay;
        submitButton.disabled = !current.canSubmit;
        notice.textContent = current.notice || notice.textContent;
      });
  });

  async function submitCurrent(): Promise<void> {
    if (!current || !current.canSubmit) return;
    try {
      const accepted = await current.submit(transcript.value);
      if (accepted) await showNextTrial();
    } catch {
      // Network hiccup: the transcript stays editable and submittable, but
      // playback is spent; the listener just presses submit again.
      notice.textContent = "Could not reach the server — try submitting again.";
      submitButton.disabled = false;
    }
  }

  submitButton.addEventListener("click", () => void submitCurrent());
  transcript.addEventListener("keydown", (event) => {
    if (event.key === "Enter") void submitCurrent();
  });

  if (flow.canResume) {
    flow.resume();
    void showNextTrial();
  }
}

if (typeof document !== "undefined" && document.getElementById("start-form")) {
  bootstrap();
}
