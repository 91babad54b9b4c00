/**
 * Thin fetch client over the triage service endpoints.
 */

import type {
  ClusterTree,
  DiffResponse,
  ErrorBody,
  FeedbackAction,
  FeedbackResponse,
  SessionSnapshot,
  TableResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ErrorBody,
  ) {
    super(`${status}: ${body.error}`);
  }

  /** The server's current revision, present on stale-revision conflicts. */
  get currentRevision(): number | undefined {
    return this.body.revision;
  }
}

async function parse<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let body: ErrorBody;
    try {
      body = (await response.json()) as ErrorBody;
    } catch {
      body = { error: response.statusText };
    }
    throw new ApiError(response.status, body);
  }
  return (await response.json()) as T;
}

export class TriageClient {
  constructor(private readonly baseUrl: string) {}

  private async get<T>(path: string): Promise<T> {
    return parse<T>(await fetch(this.baseUrl + path));
  }

  session(): Promise<SessionSnapshot> {
    return this.get<SessionSnapshot>("/session");
  }

  clusters(): Promise<ClusterTree> {
    return this.get<ClusterTree>("/clusters");
  }

  table(patchId: string): Promise<TableResponse> {
    return this.get<TableResponse>(`/table/${encodeURIComponent(patchId)}`);
  }

  diff(patchId: string): Promise<DiffResponse> {
    return this.get<DiffResponse>(`/patch/${encodeURIComponent(patchId)}/diff`);
  }

  async feedback(
    action: FeedbackAction,
    target: string,
    revision: number,
  ): Promise<FeedbackResponse> {
    const response = await fetch(this.baseUrl + "/feedback", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ action, target, revision }),
    });
    return parse<FeedbackResponse>(response);
  }
}
