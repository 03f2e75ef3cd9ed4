/**
 * HTTP client for the inpaint service. One request in flight at a time;
 * requests time out after 10 s by default; server error bodies are surfaced
 * verbatim to the caller.
 */

import { Session, buildInpaintRequest } from "./session.js";

export interface HealthInfo {
  status: string;
  model_id: string;
  levels: number;
  receptive_field: number;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(message: string, readonly status?: number, readonly field?: string) {
    super(message);
  }
}

function extractServerError(status: number, body: unknown): ApiError {
  if (body && typeof body === "object" && "error" in body) {
    const err = (body as { error: { field?: string; message?: string } }).error;
    return new ApiError(err.message ?? `server error ${status}`, status, err.field);
  }
  return new ApiError(`server error ${status}`, status);
}

export class InpaintClient {
  busy = false;

  constructor(
    public baseUrl: string,
    private fetchFn: FetchLike = (...args) => fetch(...args),
    private timeoutMs = 10_000,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const controller = new AbortController();
    const timer = setTimeout(() => controller.abort(), this.timeoutMs);
    try {
      const response = await this.fetchFn(this.baseUrl.replace(/\/$/, "") + path, {
        ...init,
        signal: controller.signal,
      });
      let body: unknown = null;
      try {
        body = await response.json();
      } catch {
        // non-JSON body; handled below
      }
      if (!response.ok) {
        throw extractServerError(response.status, body);
      }
      return body;
    } catch (err) {
      if (err instanceof Error && err.name === "AbortError") {
        throw new ApiError(`request timed out after ${this.timeoutMs} ms`);
      }
      throw err;
    } finally {
      clearTimeout(timer);
    }
  }

  async health(): Promise<HealthInfo> {
    return (await this.request("/health")) as HealthInfo;
  }

  /**
   * Send the session's image and mask; resolves to the completed image as
   * base64 PNG. Rejects when the mask is empty or a request is in flight.
   */
  async inpaint(session: Session): Promise<string> {
    if (session.maskEmpty()) {
      throw new ApiError("mask is empty; draw the region to remove first");
    }
    if (this.busy) {
      throw new ApiError("a request is already in flight");
    }
    this.busy = true;
    try {
      const body = (await this.request("/inpaint", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(buildInpaintRequest(session)),
      })) as { image: string };
      return body.image;
    } finally {
      this.busy = false;
    }
  }
}
