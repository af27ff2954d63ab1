/**
 * Catalog table: a paged view over GET /v1/skus, shown verbatim.
 *
 * Edits round-trip through the API and the whole listing is re-fetched
 * afterwards, so the table never shows a row the server doesn't have.
 */

import { ApiClient } from "../api.js";
import { AlertHost, escapeHtml, formatTimestamp } from "../dom.js";
import type { SkuJson } from "../types.js";

export interface CatalogOptions {
  pageSize?: number;
}

export class CatalogView {
  private readonly pageSize: number;
  private alerts!: AlertHost;
  private skus: SkuJson[] = [];
  private page = 0;
  private editing: string | null = null;
  /** sku_id whose delete button is one click away from firing. */
  private armed: string | null = null;

  constructor(
    private readonly container: HTMLElement,
    private api: ApiClient,
    options: CatalogOptions = {},
  ) {
    this.pageSize = options.pageSize ?? 25;
    this.container.innerHTML = `
      <div class="catalog-head">
        <span class="catalog-count"></span>
        <button type="button" data-action="reload">Reload</button>
      </div>
      <div class="alert-slot"></div>
      <div class="catalog-body"><p class="empty">loading…</p></div>
      <div class="pager"></div>`;
    this.alerts = new AlertHost(this.container.querySelector<HTMLElement>(".alert-slot")!);
    this.bind();
  }

  setClient(api: ApiClient): void {
    this.api = api;
  }

  async reload(): Promise<void> {
    try {
      const listing = await this.api.listSkus();
      this.skus = listing.skus;
      this.container.querySelector(".catalog-count")!.textContent =
        `${listing.count} SKU${listing.count === 1 ? "" : "s"}`;
    } catch (err) {
      this.alerts.push(`catalog load failed: ${(err as Error).message}`);
      return;
    }
    const pages = this.pageCount();
    if (this.page >= pages) this.page = Math.max(0, pages - 1);
    this.render();
  }

  private pageCount(): number {
    return Math.max(1, Math.ceil(this.skus.length / this.pageSize));
  }

  private bind(): void {
    this.container.addEventListener("click", (event) => {
      const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
      if (!target) return;
      const skuId = target.closest<HTMLElement>("[data-sku-id]")?.dataset.skuId ?? "";
      switch (target.dataset.action) {
        case "reload":
          void this.reload();
          break;
        case "page-prev":
          this.page = Math.max(0, this.page - 1);
          this.render();
          break;
        case "page-next":
          this.page = Math.min(this.pageCount() - 1, this.page + 1);
          this.render();
          break;
        case "edit-price":
          this.editing = skuId;
          this.armed = null;
          this.render();
          break;
        case "cancel-edit":
          this.editing = null;
          this.render();
          break;
        case "save-price":
          event.preventDefault();
          void this.savePrice(skuId);
          break;
        case "delete":
          this.armed = skuId;
          this.render();
          break;
        case "cancel-delete":
          this.armed = null;
          this.render();
          break;
        case "confirm-delete":
          void this.deleteSku(skuId);
          break;
      }
    });
    this.container.addEventListener("submit", (event) => {
      const form = event.target as HTMLElement;
      if (form.classList.contains("price-form")) {
        event.preventDefault();
        const skuId = form.closest<HTMLElement>("[data-sku-id]")?.dataset.skuId ?? "";
        void this.savePrice(skuId);
      }
    });
  }

  private async savePrice(skuId: string): Promise<void> {
    const input = this.container.querySelector<HTMLInputElement>(
      `[data-sku-id="${skuId}"] input[name="price_cents"]`,
    );
    const cents = Number(input?.value ?? "");
    if (!Number.isInteger(cents) || cents < 0) {
      this.alerts.push("price must be a non-negative whole number of cents");
      return;
    }
    try {
      await this.api.updatePrice(skuId, cents);
    } catch (err) {
      this.alerts.push(`price update failed: ${(err as Error).message}`);
      return;
    }
    this.editing = null;
    await this.reload();
  }

  private async deleteSku(skuId: string): Promise<void> {
    try {
      await this.api.deleteSku(skuId);
    } catch (err) {
      this.alerts.push(`delete failed: ${(err as Error).message}`);
      return;
    }
    this.armed = null;
    await this.reload();
  }

  private render(): void {
    const body = this.container.querySelector<HTMLElement>(".catalog-body")!;
    const pager = this.container.querySelector<HTMLElement>(".pager")!;
    if (this.skus.length === 0) {
      body.innerHTML = `<p class="empty">Catalog is empty.</p>`;
      pager.innerHTML = "";
      return;
    }
    const start = this.page * this.pageSize;
    const rows = this.skus
      .slice(start, start + this.pageSize)
      .map((sku) => this.rowHtml(sku))
      .join("");
    body.innerHTML = `
      <table class="catalog-table">
        <thead>
          <tr><th>SKU</th><th>Name</th><th>Price (¢)</th><th>Category</th>
          <th>Refs</th><th>Registered</th><th></th></tr>
        </thead>
        <tbody>${rows}</tbody>
      </table>`;
    const pages = this.pageCount();
    pager.innerHTML = `
      <button type="button" data-action="page-prev" ${this.page === 0 ? "disabled" : ""}>←</button>
      <span>page ${this.page + 1} / ${pages}</span>
      <button type="button" data-action="page-next" ${this.page >= pages - 1 ? "disabled" : ""}>→</button>`;
  }

  private rowHtml(sku: SkuJson): string {
    const priceCell =
      this.editing === sku.sku_id
        ? `<form class="price-form">
            <input name="price_cents" type="number" min="0" step="1" value="${escapeHtml(sku.price_cents)}">
            <button type="submit" data-action="save-price">Save</button>
            <button type="button" data-action="cancel-edit">Cancel</button>
          </form>`
        : `<span class="cents" data-field="price_cents">${escapeHtml(sku.price_cents)}</span>
           <button type="button" class="quiet" data-action="edit-price">edit</button>`;
    const deleteCell =
      this.armed === sku.sku_id
        ? `<button type="button" class="danger" data-action="confirm-delete">Confirm delete</button>
           <button type="button" data-action="cancel-delete">Keep</button>`
        : `<button type="button" class="quiet" data-action="delete">delete</button>`;
    return `<tr data-sku-id="${escapeHtml(sku.sku_id)}">
      <td><code>${escapeHtml(sku.sku_id)}</code></td>
      <td>${escapeHtml(sku.name)}</td>
      <td>${priceCell}</td>
      <td>${escapeHtml(sku.category)}</td>
      <td>${escapeHtml(sku.reference_count)}</td>
      <td><time>${formatTimestamp(sku.registered_at)}</time></td>
      <td>${deleteCell}</td>
    </tr>`;
  }
}
