/** Typed client for the preference-session HTTP API. */

export interface SummaryView {
  id: number;
  sentences: string[];
  token_count: number;
  gold_utility?: number;
}

export interface PairPayload {
  status: string;
  session_id?: string;
  round?: number;
  n_rounds?: number;
  left?: SummaryView;
  right?: SummaryView;
  background?: string[];
}

export interface ResultPayload {
  status: string;
  retry_after_s?: number;
  with_interaction?: SummaryView;
  no_interaction?: SummaryView;
}

export interface CreateSessionRequest {
  cluster_id: string;
  system: "april" | "sppi";
  n_rounds: number;
  seed?: number;
}

export interface FinalJudgement {
  final_preference: "A" | "B";
  assignment: Record<string, string>;
  ratings?: Record<string, number>;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message?: string,
  ) {
    super(message ?? `${status}: ${code}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = await response.json().catch(() => ({}));
    if (!response.ok && response.status !== 202) {
      const code = body?.detail?.code ?? "http_error";
      throw new ApiError(response.status, code, body?.detail?.message);
    }
    return body as T;
  }

  health(): Promise<{ status: string; clusters: string[] }> {
    return this.request("/healthz");
  }

  createSession(req: CreateSessionRequest): Promise<PairPayload> {
    return this.request("/sessions", { method: "POST", body: JSON.stringify(req) });
  }

  getPair(sessionId: string): Promise<PairPayload> {
    return this.request(`/sessions/${sessionId}/pair`);
  }

  postPreference(sessionId: string, round: number, chosen: "left" | "right"): Promise<PairPayload> {
    return this.request(`/sessions/${sessionId}/preference`, {
      method: "POST",
      body: JSON.stringify({ round, chosen }),
    });
  }

  getResult(sessionId: string): Promise<ResultPayload> {
    return this.request(`/sessions/${sessionId}/result`);
  }

  ackResult(sessionId: string, judgement: FinalJudgement): Promise<{ status: string }> {
    return this.request(`/sessions/${sessionId}/result`, {
      method: "POST",
      body: JSON.stringify(judgement),
    });
  }
}
