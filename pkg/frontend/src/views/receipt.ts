/**
 * Receipt rendering for one checkout response.
 *
 * Money handling rule: prices are displayed as integer cents exactly as the
 * API returned them — the unit lives in the column header, never in the
 * value. The console does no arithmetic on money; in particular the subtotal
 * line shows the response's subtotal_cents, not a client-side sum.
 */

import { escapeHtml } from "../dom.js";
import type { BoxJson, ReceiptItemJson, ReceiptJson } from "../types.js";

function boxLabel(box: BoxJson): string {
  return `(${box.x_min},${box.y_min})–(${box.x_max},${box.y_max})`;
}

export class ReceiptView {
  constructor(private readonly container: HTMLElement) {}

  clear(): void {
    this.container.replaceChildren();
  }

  render(receipt: ReceiptJson, imageUrl: string | null = null): void {
    const rows = receipt.items.map((item, i) => this.lineRow(item, i)).join("");
    const banner =
      receipt.unknown_count > 0
        ? `<div class="banner unknown-banner">
            ${receipt.unknown_count} unrecognized item${receipt.unknown_count === 1 ? "" : "s"}
            flagged for review — <a href="#flags">open the flag queue</a>
          </div>`
        : "";
    const scene = imageUrl
      ? `<figure class="scene"><img class="scene-img" src="${escapeHtml(imageUrl)}" alt="checkout image"></figure>`
      : "";
    const timings = Object.entries(receipt.timings)
      .map(([stage, ms]) => `${escapeHtml(stage)} ${ms.toFixed(1)}`)
      .join(" · ");

    this.container.innerHTML = `
      <div class="receipt">
        ${banner}
        ${scene}
        <table class="lines">
          <thead>
            <tr><th>#</th><th>Item</th><th>Price (¢)</th><th>Score</th><th>Box</th></tr>
          </thead>
          <tbody>${rows}</tbody>
        </table>
        <p class="subtotal">Subtotal (¢):
          <span class="cents" data-field="subtotal_cents">${escapeHtml(receipt.subtotal_cents)}</span>
        </p>
        <p class="meta">image <code>${escapeHtml(receipt.image_id || "(uploaded)")}</code>
          · stage ms: ${timings}</p>
      </div>`;

    if (imageUrl) {
      const img = this.container.querySelector<HTMLImageElement>("img.scene-img");
      img?.addEventListener("load", () => this.drawOverlay(img, receipt.items));
    }
  }

  private lineRow(item: ReceiptItemJson, index: number): string {
    const d = item.decision;
    if (d.kind === "match") {
      return `<tr class="line match">
        <td>${index + 1}</td>
        <td class="item-name">${escapeHtml(d.name)} <code class="sku">${escapeHtml(d.sku_id)}</code></td>
        <td class="cents" data-field="price_cents">${escapeHtml(d.price_cents)}</td>
        <td><span class="badge score">${d.score.toFixed(3)}</span></td>
        <td class="box">${boxLabel(item.box)}</td>
      </tr>`;
    }
    const closest =
      d.best_sku_id === null
        ? "no candidates"
        : `closest ${escapeHtml(d.best_sku_id)} at ${d.best_score?.toFixed(3)}`;
    return `<tr class="line unknown">
      <td>${index + 1}</td>
      <td class="item-name">
        <a class="flag-link" href="#flags/${escapeHtml(d.flag_id)}">unrecognized item</a>
        <small>(${closest})</small>
      </td>
      <td class="cents"></td>
      <td><span class="badge flagged">flagged</span></td>
      <td class="box">${boxLabel(item.box)}</td>
    </tr>`;
  }

  /** Outline each detection over the uploaded image, scaled to its natural size. */
  private drawOverlay(img: HTMLImageElement, items: ReceiptItemJson[]): void {
    const figure = img.closest("figure");
    if (!figure || img.naturalWidth <= 0 || img.naturalHeight <= 0) return;
    figure.querySelectorAll(".box-outline").forEach((el) => el.remove());
    for (const item of items) {
      const { x_min, y_min, x_max, y_max } = item.box;
      const outline = document.createElement("span");
      outline.className = `box-outline ${item.decision.kind}`;
      outline.style.left = `${(100 * x_min) / img.naturalWidth}%`;
      outline.style.top = `${(100 * y_min) / img.naturalHeight}%`;
      outline.style.width = `${(100 * (x_max - x_min)) / img.naturalWidth}%`;
      outline.style.height = `${(100 * (y_max - y_min)) / img.naturalHeight}%`;
      figure.appendChild(outline);
    }
  }
}
