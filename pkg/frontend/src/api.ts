/** Typed client for the triage service JSON API. */

export type Verdict = "keep" | "remove";

export interface Prototype {
  sha256: string;
  url: string;
  title: string | null;
  group_scheme: string;
  group_size: number;
  neighbor_count: number;
}

export interface QueueHead {
  prototype: Prototype;
  budget_remaining: number;
}

export interface DecisionResult {
  removed_count: number;
  budget_remaining: number;
}

export interface Progress {
  inspected: number;
  inspected_by_scheme: Record<string, number>;
  removed_total: number;
  budget_per_scheme: Record<string, number>;
  budget_remaining: Record<string, number>;
  rejection_rate_so_far: number;
  auto_removed: Record<string, number>;
  done: boolean;
}

export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = (await resp.json()) as { error?: unknown };
      if (body && body.error) detail = String(body.error);
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class TriageApi {
  constructor(
    private readonly base = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  /** Head of the decision queue, or null when the budget is exhausted (204). */
  async next(): Promise<QueueHead | null> {
    const resp = await this.fetchFn(`${this.base}/api/queue/next`);
    if (resp.status === 204) return null;
    return asJson<QueueHead>(resp);
  }

  async decide(sha256: string, verdict: Verdict): Promise<DecisionResult> {
    const resp = await this.fetchFn(`${this.base}/api/decision`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ prototype_sha256: sha256, verdict, annotator: "ui" }),
    });
    return asJson<DecisionResult>(resp);
  }

  async progress(): Promise<Progress> {
    const resp = await this.fetchFn(`${this.base}/api/progress`);
    return asJson<Progress>(resp);
  }

  /** Sanitized preview document; rendered only inside a sandboxed frame. */
  previewUrl(sha256: string): string {
    return `${this.base}/api/page/${sha256}`;
  }
}
