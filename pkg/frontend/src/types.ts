/**
 * Wire shapes of the /v1 JSON API, mirrored field-for-field.
 *
 * The console treats these as read-only facts: every value rendered on
 * screen comes straight out of one of these payloads.
 */

export interface BoxJson {
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
}

export interface MatchDecisionJson {
  kind: "match";
  sku_id: string;
  name: string;
  price_cents: number;
  score: number;
}

export interface UnknownDecisionJson {
  kind: "unknown";
  best_sku_id: string | null;
  best_score: number | null;
  flag_id: string;
}

export interface ReceiptItemJson {
  box: BoxJson;
  decision: MatchDecisionJson | UnknownDecisionJson;
}

export interface ReceiptJson {
  image_id: string;
  items: ReceiptItemJson[];
  subtotal_cents: number;
  unknown_count: number;
  flag_ids: string[];
  timings: Record<string, number>;
}

export interface SkuJson {
  sku_id: string;
  name: string;
  price_cents: number;
  category: string;
  reference_count: number;
  registered_at: number;
  record_id: number;
  centroid?: number[];
}

export interface SkuListJson {
  skus: SkuJson[];
  count: number;
}

export interface NewSkuRequest {
  sku_id: string;
  name: string;
  price_cents: number;
  category?: string;
  /** base64-encoded reference images, or raw embedding vectors */
  references: Array<string | number[]>;
}

export type FlagStatus = "open" | "resolved" | "dismissed";

export interface FlagJson {
  flag_id: string;
  status: FlagStatus;
  best_sku_id: string | null;
  best_score: number | null;
  patch_ref: string;
  created_at: number;
}

export interface FlagDetailJson extends FlagJson {
  patch_png_base64: string | null;
}

export interface FlagListJson {
  flags: FlagJson[];
  count: number;
}

export interface ResolveRequest {
  sku_id: string;
  name?: string;
  price_cents?: number;
  category?: string;
}

export interface HealthJson {
  status: string;
  version: string;
  dim: number;
  sku_count: number;
  index_size: number;
  open_flags: number;
}

export interface StageStatsJson {
  count: number;
  mean_ms: number;
  p95_ms: number;
}

export interface MetricsJson {
  checkouts: number;
  stages: Record<string, StageStatsJson>;
}

export interface SnapshotSaveJson {
  index_path: string;
  catalog_path: string;
  record_count: number;
  sku_count: number;
}

export interface SnapshotLoadJson {
  record_count: number;
  sku_count: number;
}

/** Incremental-catalog benchmark report, as written by the CLI bench command. */
export interface BenchmarkRowJson {
  categories: number;
  top1_accuracy: number;
  unknown_recall: number;
  update_duration_ms: number;
  index_size: number;
}

export interface BenchmarkReportJson {
  config?: Record<string, number>;
  rows: BenchmarkRowJson[];
}
