/** Dependency-free SVG bar charts for the benchmark page. */

import { escapeHtml } from "./dom.js";

export interface BarSeries {
  name: string;
  values: number[];
  color: string;
}

export interface BarChartOptions {
  title: string;
  labels: string[];
  series: BarSeries[];
  /** Fixed y-axis ceiling (e.g. 1.0 for rates); defaults to the data maximum. */
  yMax?: number;
  width?: number;
  height?: number;
}

function formatTick(value: number): string {
  if (value === 0) return "0";
  if (value >= 100) return value.toFixed(0);
  if (value >= 1) return value.toFixed(1);
  return value.toFixed(2);
}

/**
 * Render a grouped bar chart as an SVG string.
 *
 * Each bar carries its source number verbatim in a data-value attribute so
 * the rendering stays auditable against the report it came from.
 */
export function barChartSvg(options: BarChartOptions): string {
  const width = options.width ?? 460;
  const height = options.height ?? 230;
  const margin = { top: 26, right: 12, bottom: 42, left: 52 };
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;

  const labels = options.labels;
  const series = options.series;
  const dataMax = Math.max(0, ...series.flatMap((s) => s.values));
  const yMax = options.yMax ?? (dataMax > 0 ? dataMax : 1);

  const parts: string[] = [];
  parts.push(
    `<svg class="chart" viewBox="0 0 ${width} ${height}" role="img" aria-label="${escapeHtml(options.title)}">`,
  );
  parts.push(
    `<text class="chart-title" x="${width / 2}" y="16" text-anchor="middle">${escapeHtml(options.title)}</text>`,
  );

  // Horizontal gridlines with tick labels.
  const ticks = 4;
  for (let i = 0; i <= ticks; i++) {
    const value = (yMax * i) / ticks;
    const y = margin.top + plotH - (plotH * i) / ticks;
    parts.push(
      `<line class="gridline" x1="${margin.left}" y1="${y}" x2="${margin.left + plotW}" y2="${y}"/>`,
      `<text class="tick" x="${margin.left - 6}" y="${y + 3}" text-anchor="end">${formatTick(value)}</text>`,
    );
  }

  const groupW = labels.length > 0 ? plotW / labels.length : plotW;
  const barW = (groupW * 0.7) / Math.max(1, series.length);
  labels.forEach((label, li) => {
    const groupX = margin.left + li * groupW + groupW * 0.15;
    series.forEach((s, si) => {
      const value = s.values[li] ?? 0;
      const h = yMax > 0 ? Math.max(0, Math.min(1, value / yMax)) * plotH : 0;
      const x = groupX + si * barW;
      const y = margin.top + plotH - h;
      parts.push(
        `<rect class="bar" x="${x.toFixed(1)}" y="${y.toFixed(1)}" width="${barW.toFixed(1)}" ` +
          `height="${h.toFixed(1)}" fill="${s.color}" data-series="${escapeHtml(s.name)}" ` +
          `data-label="${escapeHtml(label)}" data-value="${escapeHtml(value)}"><title>` +
          `${escapeHtml(`${s.name} @ ${label}: ${value}`)}</title></rect>`,
      );
    });
    const lx = margin.left + li * groupW + groupW / 2;
    parts.push(
      `<text class="tick" x="${lx}" y="${margin.top + plotH + 14}" text-anchor="middle">${escapeHtml(label)}</text>`,
    );
  });

  // Legend along the bottom edge.
  let legendX = margin.left;
  const legendY = height - 8;
  for (const s of series) {
    parts.push(
      `<rect x="${legendX}" y="${legendY - 9}" width="10" height="10" fill="${s.color}"/>`,
      `<text class="tick" x="${legendX + 14}" y="${legendY}">${escapeHtml(s.name)}</text>`,
    );
    legendX += 14 + 7 * s.name.length + 18;
  }

  parts.push("</svg>");
  return parts.join("");
}
