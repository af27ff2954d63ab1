/**
 * Benchmark page: chart an incremental-catalog report (JSON upload) or the
 * live service latency metrics. Parse problems render inline, never silently.
 */

import { ApiClient } from "../api.js";
import { barChartSvg } from "../charts.js";
import { escapeHtml } from "../dom.js";
import type { BenchmarkReportJson, BenchmarkRowJson, MetricsJson } from "../types.js";

const ACCURACY_COLOR = "#3567b5";
const RECALL_COLOR = "#7aa5dd";
const DURATION_COLOR = "#b5673a";

const ROW_FIELDS: Array<keyof BenchmarkRowJson> = [
  "categories",
  "top1_accuracy",
  "unknown_recall",
  "update_duration_ms",
  "index_size",
];

/** Parse and shape-check a benchmark report; throws Error with a readable message. */
export function parseBenchmarkReport(text: string): BenchmarkReportJson {
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch (err) {
    throw new Error(`not valid JSON: ${(err as Error).message}`);
  }
  if (typeof parsed !== "object" || parsed === null || !Array.isArray((parsed as { rows?: unknown }).rows)) {
    throw new Error('not a benchmark report: expected an object with a "rows" array');
  }
  const rows = (parsed as { rows: unknown[] }).rows;
  rows.forEach((row, i) => {
    for (const field of ROW_FIELDS) {
      const value = (row as Record<string, unknown>)?.[field];
      if (typeof value !== "number" || !Number.isFinite(value)) {
        throw new Error(`rows[${i}].${field} is missing or not a number`);
      }
    }
  });
  return parsed as BenchmarkReportJson;
}

export class BenchmarkView {
  constructor(
    private readonly container: HTMLElement,
    private api: ApiClient,
  ) {
    this.container.innerHTML = `
      <div class="bench-source">
        <label>report JSON <input type="file" name="report-file" accept=".json,application/json"></label>
        <button type="button" data-action="load-metrics">Load live service metrics</button>
      </div>
      <p class="bench-error" role="alert"></p>
      <div class="bench-charts"></div>
      <div class="bench-table"></div>`;
    this.bind();
  }

  setClient(api: ApiClient): void {
    this.api = api;
  }

  private bind(): void {
    const file = this.container.querySelector<HTMLInputElement>('input[name="report-file"]')!;
    file.addEventListener("change", () => {
      const chosen = file.files?.[0];
      if (chosen) void chosen.text().then((text) => this.showReportText(text));
    });
    this.container
      .querySelector<HTMLButtonElement>('[data-action="load-metrics"]')!
      .addEventListener("click", () => void this.loadMetrics());
  }

  /** Render a report from raw JSON text (file upload or tests). */
  showReportText(text: string): void {
    let report: BenchmarkReportJson;
    try {
      report = parseBenchmarkReport(text);
    } catch (err) {
      this.setError((err as Error).message);
      return;
    }
    this.setError("");
    this.renderReport(report);
  }

  async loadMetrics(): Promise<void> {
    let metrics: MetricsJson;
    try {
      metrics = await this.api.metrics();
    } catch (err) {
      this.setError(`metrics load failed: ${(err as Error).message}`);
      return;
    }
    this.setError("");
    this.renderMetrics(metrics);
  }

  private setError(message: string): void {
    this.container.querySelector<HTMLElement>(".bench-error")!.textContent = message;
  }

  private renderReport(report: BenchmarkReportJson): void {
    const charts = this.container.querySelector<HTMLElement>(".bench-charts")!;
    const table = this.container.querySelector<HTMLElement>(".bench-table")!;
    if (report.rows.length === 0) {
      charts.innerHTML = `<p class="empty">Report contains no stages.</p>`;
      table.innerHTML = "";
      return;
    }
    const labels = report.rows.map((r) => String(r.categories));
    charts.innerHTML =
      barChartSvg({
        title: "recognition accuracy by catalog size",
        labels,
        yMax: 1,
        series: [
          { name: "top-1 accuracy", values: report.rows.map((r) => r.top1_accuracy), color: ACCURACY_COLOR },
          { name: "unknown recall", values: report.rows.map((r) => r.unknown_recall), color: RECALL_COLOR },
        ],
      }) +
      barChartSvg({
        title: "catalog update duration (ms)",
        labels,
        series: [
          { name: "update ms", values: report.rows.map((r) => r.update_duration_ms), color: DURATION_COLOR },
        ],
      });
    const rows = report.rows
      .map(
        (r) => `<tr>
          <td>${escapeHtml(r.categories)}</td>
          <td>${escapeHtml(r.top1_accuracy)}</td>
          <td>${escapeHtml(r.unknown_recall)}</td>
          <td>${escapeHtml(r.update_duration_ms)}</td>
          <td>${escapeHtml(r.index_size)}</td>
        </tr>`,
      )
      .join("");
    table.innerHTML = `
      <table class="bench-rows">
        <thead><tr><th>categories</th><th>top-1 accuracy</th><th>unknown recall</th>
        <th>update ms</th><th>index size</th></tr></thead>
        <tbody>${rows}</tbody>
      </table>`;
  }

  private renderMetrics(metrics: MetricsJson): void {
    const charts = this.container.querySelector<HTMLElement>(".bench-charts")!;
    const table = this.container.querySelector<HTMLElement>(".bench-table")!;
    const stages = Object.keys(metrics.stages);
    if (metrics.checkouts === 0 || stages.length === 0) {
      charts.innerHTML = `<p class="empty">No checkouts recorded yet.</p>`;
      table.innerHTML = "";
      return;
    }
    charts.innerHTML = barChartSvg({
      title: `checkout stage latency over ${metrics.checkouts} checkouts (ms)`,
      labels: stages,
      series: [
        { name: "mean ms", values: stages.map((s) => metrics.stages[s].mean_ms), color: ACCURACY_COLOR },
        { name: "p95 ms", values: stages.map((s) => metrics.stages[s].p95_ms), color: DURATION_COLOR },
      ],
    });
    const rows = stages
      .map(
        (s) => `<tr>
          <td>${escapeHtml(s)}</td>
          <td>${escapeHtml(metrics.stages[s].count)}</td>
          <td>${metrics.stages[s].mean_ms.toFixed(2)}</td>
          <td>${metrics.stages[s].p95_ms.toFixed(2)}</td>
        </tr>`,
      )
      .join("");
    table.innerHTML = `
      <table class="bench-rows">
        <thead><tr><th>stage</th><th>count</th><th>mean ms</th><th>p95 ms</th></tr></thead>
        <tbody>${rows}</tbody>
      </table>`;
  }
}
