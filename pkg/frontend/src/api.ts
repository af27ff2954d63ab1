/**
 * Thin fetch client for the /v1 checkout service API.
 *
 * Every method maps to exactly one endpoint and returns the parsed JSON
 * body unchanged; no response field is reshaped, renamed, or recomputed.
 */

import type { ConsoleConfig } from "./config.js";
import type {
  FlagDetailJson,
  FlagJson,
  FlagListJson,
  FlagStatus,
  HealthJson,
  MetricsJson,
  NewSkuRequest,
  ReceiptJson,
  ResolveRequest,
  SkuJson,
  SkuListJson,
  SnapshotLoadJson,
  SnapshotSaveJson,
} from "./types.js";

/** Error envelope carried by every non-2xx response: {code, message, details?}. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
    public readonly details: unknown = undefined,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(private readonly config: ConsoleConfig) {}

  get baseUrl(): string {
    return this.config.baseUrl;
  }

  private headers(hasBody: boolean): Record<string, string> {
    const out: Record<string, string> = {};
    if (hasBody) out["content-type"] = "application/json";
    if (this.config.token) out["authorization"] = `Bearer ${this.config.token}`;
    return out;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await fetch(`${this.config.baseUrl}${path}`, {
        method,
        headers: this.headers(body !== undefined),
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, "network", `backend unreachable: ${(err as Error).message}`);
    }
    if (response.status === 204) return undefined as T;
    const text = await response.text();
    let parsed: unknown = null;
    try {
      parsed = text ? JSON.parse(text) : null;
    } catch {
      parsed = null;
    }
    if (!response.ok) {
      const envelope = (parsed ?? {}) as { code?: string; message?: string; details?: unknown };
      throw new ApiError(
        response.status,
        envelope.code ?? `http_${response.status}`,
        envelope.message ?? `request failed with status ${response.status}`,
        envelope.details,
      );
    }
    return parsed as T;
  }

  // ------------------------------------------------------------ checkout

  /** Run a checkout against a server-side fixture image. */
  checkoutFixture(fixtureId: string): Promise<ReceiptJson> {
    return this.request("POST", "/v1/checkout", { fixture_id: fixtureId });
  }

  /** Run a checkout on an uploaded image (base64, without data-URL prefix). */
  checkoutImage(imageBase64: string, imageId = ""): Promise<ReceiptJson> {
    return this.request("POST", "/v1/checkout", {
      image_base64: imageBase64,
      image_id: imageId,
    });
  }

  // ------------------------------------------------------------- catalog

  listSkus(): Promise<SkuListJson> {
    return this.request("GET", "/v1/skus");
  }

  getSku(skuId: string): Promise<SkuJson> {
    return this.request("GET", `/v1/skus/${encodeURIComponent(skuId)}`);
  }

  createSku(body: NewSkuRequest): Promise<SkuJson> {
    return this.request("POST", "/v1/skus", body);
  }

  updatePrice(skuId: string, priceCents: number): Promise<SkuJson> {
    return this.request("PATCH", `/v1/skus/${encodeURIComponent(skuId)}`, {
      price_cents: priceCents,
    });
  }

  deleteSku(skuId: string): Promise<void> {
    return this.request("DELETE", `/v1/skus/${encodeURIComponent(skuId)}`);
  }

  // --------------------------------------------------------------- flags

  listFlags(status?: FlagStatus): Promise<FlagListJson> {
    const query = status ? `?status=${status}` : "";
    return this.request("GET", `/v1/flags${query}`);
  }

  getFlag(flagId: string): Promise<FlagDetailJson> {
    return this.request("GET", `/v1/flags/${encodeURIComponent(flagId)}`);
  }

  resolveFlag(flagId: string, body: ResolveRequest): Promise<SkuJson> {
    return this.request("POST", `/v1/flags/${encodeURIComponent(flagId)}/resolve`, body);
  }

  dismissFlag(flagId: string): Promise<FlagJson> {
    return this.request("POST", `/v1/flags/${encodeURIComponent(flagId)}/dismiss`);
  }

  // ----------------------------------------------------------- lifecycle

  health(): Promise<HealthJson> {
    return this.request("GET", "/v1/healthz");
  }

  metrics(): Promise<MetricsJson> {
    return this.request("GET", "/v1/metrics");
  }

  saveSnapshot(path = ""): Promise<SnapshotSaveJson> {
    return this.request("POST", "/v1/snapshot/save", path ? { path } : {});
  }

  loadSnapshot(path = ""): Promise<SnapshotLoadJson> {
    return this.request("POST", "/v1/snapshot/load", path ? { path } : {});
  }
}
