/** Typed client for the session service HTTP API. All state changes go
 * through these endpoints; the UI holds no workflow logic of its own. */

export interface VisibleMessage {
  id: number;
  role: "user" | "assistant" | "system";
  text: string;
}

export interface ChatView {
  session_id: string;
  stage: string;
  ended: boolean;
  messages: VisibleMessage[];
}

export interface UploadSummary {
  chat_example_count: number;
  eval_example_count: number;
  total_rows: number;
  selection_seed: number;
  messages: VisibleMessage[];
}

/** Candidate texts arrive in display order with no provenance labels. */
export interface EvalItem {
  item_id: string;
  input_text: string;
  candidates: string[];
  best: number | null;
  worst: number | null;
}

export type RankTally = Record<string, Record<string, number>>;

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function expectOk(resp: Response): Promise<Response> {
  if (resp.ok) return resp;
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    /* non-JSON error body; keep the status text */
  }
  throw new ApiError(resp.status, detail);
}

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.base + path, init);
    return (await expectOk(resp)).json() as Promise<T>;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.json<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async createSession(config: Record<string, unknown>): Promise<string> {
    const out = await this.post<{ session_id: string }>("/sessions", config);
    return out.session_id;
  }

  uploadData(
    sessionId: string,
    file: Blob,
    filename: string,
    format?: string,
    seed = 0,
  ): Promise<UploadSummary> {
    const form = new FormData();
    form.append("file", file, filename);
    const params = new URLSearchParams({ seed: String(seed) });
    if (format) params.set("format", format);
    return this.json<UploadSummary>(
      `/sessions/${sessionId}/data?${params}`,
      { method: "POST", body: form },
    );
  }

  async postMessage(
    sessionId: string,
    text: string,
  ): Promise<VisibleMessage[]> {
    const out = await this.post<{ messages: VisibleMessage[] }>(
      `/sessions/${sessionId}/messages`,
      { text },
    );
    return out.messages;
  }

  getChat(sessionId: string): Promise<ChatView> {
    return this.json<ChatView>(`/sessions/${sessionId}/chat`);
  }

  promptUrl(sessionId: string, kind: "fs" | "zs"): string {
    return `${this.base}/sessions/${sessionId}/prompt/${kind}`;
  }

  async fetchPrompt(sessionId: string, kind: "fs" | "zs"): Promise<string> {
    const resp = await this.fetchFn(this.promptUrl(sessionId, kind));
    return (await expectOk(resp)).text();
  }

  async startEvaluation(sessionId: string, seed = 0): Promise<number> {
    const out = await this.post<{ item_count: number }>(
      `/sessions/${sessionId}/evaluation/start`,
      { seed },
    );
    return out.item_count;
  }

  async getEvalItems(sessionId: string): Promise<EvalItem[]> {
    const out = await this.json<{ items: EvalItem[] }>(
      `/sessions/${sessionId}/evaluation/items`,
    );
    return out.items;
  }

  postRanking(
    sessionId: string,
    itemId: string,
    best: number,
    worst: number,
  ): Promise<{ ok: boolean }> {
    return this.post(
      `/sessions/${sessionId}/evaluation/items/${itemId}/ranking`,
      { best, worst },
    );
  }

  getResults(sessionId: string): Promise<RankTally> {
    return this.json<RankTally>(`/sessions/${sessionId}/evaluation/results`);
  }

  postSurvey(sessionId: string, scores: number[]): Promise<{ ok: boolean }> {
    return this.post(`/sessions/${sessionId}/survey`, { scores });
  }
}
