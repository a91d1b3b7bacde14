/** Typed client for the listening-test JSON API. */

export interface SessionInfo {
  session_id: string;
  listener_id: string;
  n_trials: number;
}

export interface NextTrial {
  done: boolean;
  trial_id?: string;
  index: number;
  total: number;
  audio_url?: string;
}

export interface SubmitResult {
  ok: boolean;
  index: number;
  total: number;
}

export interface ListenerResult {
  status: "qualified" | "not_qualified" | "indeterminate";
  reference_wrr: number | null;
  test_wrr: number | null;
}

export interface GroupReport {
  group: Record<string, string | number>;
  n: number;
  mean_wrr: number;
  ci95: number;
}

export interface Results {
  listeners: Record<string, ListenerResult>;
  device_breakdown: Record<string, number>;
  reports: GroupReport[];
  report_csv: string;
}

export const DEVICES = ["earbuds", "headphones", "speakers"] as const;
export type Device = (typeof DEVICES)[number];

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
  arrayBuffer(): Promise<ArrayBuffer>;
}>;

/** Error carrying the service's HTTP status and machine-readable code. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function raiseForStatus(
  response: Awaited<ReturnType<FetchLike>>,
): Promise<void> {
  if (response.ok) return;
  let code = "http_error";
  let message = `request failed with status ${response.status}`;
  try {
    const body = (await response.json()) as { code?: string; message?: string };
    if (body.code) code = body.code;
    if (body.message) message = body.message;
  } catch {
    // Non-JSON error body; keep the generic message.
  }
  throw new ApiError(response.status, code, message);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    await raiseForStatus(response);
    return (await response.json()) as T;
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path);
    await raiseForStatus(response);
    return (await response.json()) as T;
  }

  createSession(listenerId: string, device: Device): Promise<SessionInfo> {
    return this.postJson<SessionInfo>("/sessions", {
      listener_id: listenerId,
      device,
    });
  }

  nextTrial(sessionId: string): Promise<NextTrial> {
    return this.getJson<NextTrial>(
      `/sessions/${encodeURIComponent(sessionId)}/next`,
    );
  }

  /** Fetch one-shot audio; the URL's token is consumed server-side. */
  async fetchAudio(audioUrl: string): Promise<ArrayBuffer> {
    const response = await this.fetchImpl(this.baseUrl + audioUrl);
    await raiseForStatus(response);
    return response.arrayBuffer();
  }

  submitResponse(
    sessionId: string,
    trialId: string,
    transcript: string,
  ): Promise<SubmitResult> {
    return this.postJson<SubmitResult>(
      `/sessions/${encodeURIComponent(sessionId)}/responses`,
      { trial_id: trialId, transcript },
    );
  }

  results(): Promise<Results> {
    return this.getJson<Results>("/results");
  }
}
