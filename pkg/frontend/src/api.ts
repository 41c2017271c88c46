import type {
  BallotBody,
  BallotReply,
  EvaluationPage,
  GenerationPage,
  ResponseBody,
  ResponseReply,
  ResultsPayload,
} from "./types.js";

/** A rejection the service expressed as {error, message}. */
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

export interface ClientOptions {
  /** Service origin; empty string means same-origin relative URLs. */
  baseUrl?: string;
  fetchFn?: typeof fetch;
  /** Extra attempts after a network-level failure (not after an HTTP error). */
  retries?: number;
  retryDelayMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const realSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class ServiceClient {
  private readonly baseUrl: string;
  private readonly fetchFn: typeof fetch;
  private readonly retries: number;
  private readonly retryDelayMs: number;
  private readonly sleep: (ms: number) => Promise<void>;

  constructor(options: ClientOptions = {}) {
    this.baseUrl = (options.baseUrl ?? "").replace(/\/+$/, "");
    // bind so a bare window.fetch keeps its receiver
    const fetchFn = options.fetchFn ?? fetch;
    this.fetchFn = (...args) => fetchFn(...args);
    this.retries = options.retries ?? 2;
    this.retryDelayMs = options.retryDelayMs ?? 500;
    this.sleep = options.sleep ?? realSleep;
  }

  /** Absolute form of a service-relative URL (image links in payloads). */
  resolve(path: string): string {
    return this.baseUrl + path;
  }

  getGeneration(sessionId: string): Promise<GenerationPage> {
    return this.request("GET", `/sessions/${sessionId}/generation`);
  }

  submitBallot(sessionId: string, ballot: BallotBody): Promise<BallotReply> {
    return this.request("POST", `/sessions/${sessionId}/ballots`, ballot);
  }

  getResults(sessionId: string): Promise<ResultsPayload> {
    return this.request("GET", `/sessions/${sessionId}/results`);
  }

  getEvaluation(evaluationId: string): Promise<EvaluationPage> {
    return this.request("GET", `/evaluations/${evaluationId}`);
  }

  submitResponse(
    evaluationId: string,
    response: ResponseBody,
  ): Promise<ResponseReply> {
    return this.request(
      "POST",
      `/evaluations/${evaluationId}/responses`,
      response,
    );
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const url = this.resolve(path);
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    let reply: Response | null = null;
    let lastFailure: unknown = null;
    for (let attempt = 0; attempt <= this.retries; attempt++) {
      if (attempt > 0) await this.sleep(this.retryDelayMs);
      try {
        reply = await this.fetchFn(url, init);
        break;
      } catch (failure) {
        // network-level failure; HTTP errors resolve and are not retried
        lastFailure = failure;
      }
    }
    if (reply === null) throw lastFailure;
    if (!reply.ok) {
      let code = `http-${reply.status}`;
      let message = reply.statusText;
      try {
        const parsed = (await reply.json()) as {
          error?: string;
          message?: string;
          detail?: unknown;
        };
        if (parsed.error) code = parsed.error;
        if (parsed.message) message = parsed.message;
        else if (parsed.detail) message = JSON.stringify(parsed.detail);
      } catch {
        // not a JSON body; keep the status text
      }
      throw new ApiError(reply.status, code, message);
    }
    return (await reply.json()) as T;
  }
}
