import type {
  AddResponse,
  DrilldownPage,
  JobView,
  KeypointsView,
  RematchResponse,
  ReviseResponse,
} from "./types.js";

/** Structural subset of fetch so tests can inject a replay transport. */
export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
  text(): Promise<string>;
}>;

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

export class ConsoleApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike,
  ) {}

  private async request(path: string, init?: Parameters<FetchLike>[1]): Promise<unknown> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) {
      const body = (await resp.json().catch(() => ({}))) as {
        code?: string;
        message?: string;
      };
      throw new ApiError(resp.status, body.code ?? "unknown", body.message ?? "request failed");
    }
    return resp.json();
  }

  private post(path: string, body?: unknown, method = "POST"): Promise<unknown> {
    return this.request(path, {
      method,
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
  }

  getJob(jobId: string): Promise<JobView> {
    return this.request(`/v1/jobs/${jobId}`) as Promise<JobView>;
  }

  getKeypoints(jobId: string, version: number): Promise<KeypointsView> {
    return this.request(`/v1/jobs/${jobId}/versions/${version}/keypoints`) as Promise<KeypointsView>;
  }

  getDrilldown(
    jobId: string,
    version: number,
    kpId: string,
    page: number,
    size: number,
  ): Promise<DrilldownPage> {
    const query = `?page=${page}&size=${size}`;
    return this.request(
      `/v1/jobs/${jobId}/versions/${version}/keypoints/${kpId}/comments${query}`,
    ) as Promise<DrilldownPage>;
  }

  /** Raw immutable report bytes, as text; byte-stable across rematches. */
  async getVersionRaw(jobId: string, version: number): Promise<string> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/jobs/${jobId}/versions/${version}`);
    if (!resp.ok) {
      throw new ApiError(resp.status, "unknown", "request failed");
    }
    return resp.text();
  }

  renameKeyPoint(jobId: string, kpId: string, text: string): Promise<ReviseResponse> {
    return this.post(`/v1/jobs/${jobId}/keypoints/${kpId}`, { text }, "PATCH") as Promise<ReviseResponse>;
  }

  deleteKeyPoint(jobId: string, kpId: string): Promise<ReviseResponse> {
    return this.post(`/v1/jobs/${jobId}/keypoints/${kpId}`, { deleted: true }, "PATCH") as Promise<ReviseResponse>;
  }

  addKeyPoint(jobId: string, text: string, topic?: string): Promise<AddResponse> {
    const body = topic === undefined ? { text } : { text, topic };
    return this.post(`/v1/jobs/${jobId}/keypoints`, body) as Promise<AddResponse>;
  }

  rematch(jobId: string): Promise<RematchResponse> {
    return this.post(`/v1/jobs/${jobId}/rematch`) as Promise<RematchResponse>;
  }
}
