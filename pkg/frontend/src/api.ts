/** Thin typed client over the review service JSON API.
 *
 * The UI never fabricates state: every rendered field comes from one of these
 * responses.
 */

import type { GuidanceParams, ItemSummary, ReviewItem, Span } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl = "",
    private fetchFn: FetchLike = (...args) => fetch(...args),
    private authToken: string | null = null,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.authToken) headers["X-Auth-Token"] = this.authToken;
    const resp = await this.fetchFn(this.baseUrl + path, { ...init, headers });
    const body = await resp.json();
    if (!resp.ok) {
      throw new ApiError(resp.status, body.code ?? "unknown", body.message ?? "request failed");
    }
    return body as T;
  }

  listItems(status?: string, page = 0): Promise<{ items: ItemSummary[] }> {
    const params = new URLSearchParams({ page: String(page) });
    if (status) params.set("status", status);
    return this.request(`/v1/items?${params}`);
  }

  getItem(itemId: string): Promise<ReviewItem> {
    return this.request(`/v1/items/${itemId}`);
  }

  submitAnnotation(
    itemId: string,
    referenceText: string,
    spans: Span[],
    editor = "review-ui",
  ): Promise<ReviewItem> {
    return this.request(`/v1/items/${itemId}/annotation`, {
      method: "POST",
      body: JSON.stringify({
        reference_text: referenceText,
        spans: spans.map((s) => [s.start, s.end, "expert"]),
        editor,
      }),
    });
  }

  regenerate(itemId: string, params: GuidanceParams): Promise<ReviewItem> {
    return this.request(`/v1/items/${itemId}/regenerate`, {
      method: "POST",
      body: JSON.stringify(params),
    });
  }

  deliver(itemId: string): Promise<ReviewItem> {
    return this.request(`/v1/items/${itemId}/deliver`, { method: "POST" });
  }
}
