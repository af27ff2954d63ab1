/**
 * Unknown-product flag queue: poll the open flags, let the operator inspect
 * the stored crop, then resolve a flag into a SKU or dismiss it.
 *
 * Resolve and dismiss are mutually exclusive and single-shot: once either
 * call succeeds — or the server answers 409 because another session got
 * there first — the controls for that flag stay locked. Only a transport
 * failure re-arms them, since in that case nothing happened server-side.
 */

import { ApiClient, ApiError } from "../api.js";
import { AlertHost, escapeHtml, formatTimestamp } from "../dom.js";
import type { FlagDetailJson, FlagJson, SkuJson } from "../types.js";

export const DEFAULT_POLL_MS = 5000;

export interface FlagQueueOptions {
  pollMs?: number;
  onResolved?: (sku: SkuJson) => void;
  onDismissed?: (flag: FlagJson) => void;
}

export class FlagQueueView {
  private readonly pollMs: number;
  private timer: ReturnType<typeof setInterval> | null = null;
  private alerts!: AlertHost;
  private flags: FlagJson[] = [];
  private expanded: string | null = null;
  private detail: FlagDetailJson | null = null;
  /** flag_id → terminal note once its single shot is spent. */
  private readonly settled = new Map<string, string>();

  constructor(
    private readonly container: HTMLElement,
    private api: ApiClient,
    private readonly options: FlagQueueOptions = {},
  ) {
    this.pollMs = options.pollMs ?? DEFAULT_POLL_MS;
    this.container.innerHTML = `
      <div class="queue-head">
        <span class="queue-count">open flags: —</span>
        <button type="button" data-action="refresh">Refresh now</button>
        <small>auto-refresh every ${(this.pollMs / 1000).toFixed(0)} s</small>
      </div>
      <div class="alert-slot"></div>
      <div class="queue-body"><p class="empty">loading…</p></div>`;
    this.alerts = new AlertHost(this.container.querySelector<HTMLElement>(".alert-slot")!);
    this.bind();
  }

  setClient(api: ApiClient): void {
    this.api = api;
  }

  /** Begin polling; idempotent. */
  start(): void {
    if (this.timer !== null) return;
    void this.refresh();
    this.timer = setInterval(() => void this.refresh(true), this.pollMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  /** Open the queue with one flag pre-expanded (receipt deep links land here). */
  async focus(flagId: string): Promise<void> {
    await this.refresh();
    await this.expand(flagId);
  }

  async refresh(auto = false): Promise<void> {
    let flags: FlagJson[];
    try {
      flags = (await this.api.listFlags("open")).flags;
    } catch (err) {
      if (!auto) this.alerts.push(`flag queue refresh failed: ${(err as Error).message}`);
      return;
    }
    this.flags = flags;
    this.container.querySelector(".queue-count")!.textContent = `open flags: ${flags.length}`;
    // A timer tick must not clobber a form the operator is typing into.
    if (auto && this.expanded !== null) return;
    if (this.expanded !== null && !flags.some((f) => f.flag_id === this.expanded)) {
      this.expanded = null;
      this.detail = null;
    }
    this.renderList();
  }

  private bind(): void {
    // Enter inside the triage form must resolve, not navigate.
    this.container.addEventListener("submit", (event) => {
      const form = event.target as HTMLElement;
      if (!form.classList.contains("triage-form")) return;
      event.preventDefault();
      const flagId = form.closest<HTMLElement>("[data-flag-id]")?.dataset.flagId ?? "";
      void this.settle(flagId, "resolve");
    });
    this.container.addEventListener("click", (event) => {
      const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
      if (!target) return;
      const item = target.closest<HTMLElement>("[data-flag-id]");
      const flagId = item?.dataset.flagId ?? "";
      switch (target.dataset.action) {
        case "refresh":
          void this.refresh();
          break;
        case "expand":
          event.preventDefault();
          void this.expand(flagId);
          break;
        case "collapse":
          this.expanded = null;
          this.detail = null;
          this.renderList();
          break;
        case "resolve":
          event.preventDefault();
          void this.settle(flagId, "resolve");
          break;
        case "dismiss-flag":
          event.preventDefault();
          void this.settle(flagId, "dismiss");
          break;
      }
    });
  }

  private async expand(flagId: string): Promise<void> {
    try {
      this.detail = await this.api.getFlag(flagId);
      this.expanded = flagId;
    } catch (err) {
      this.alerts.push(`could not load flag ${flagId}: ${(err as Error).message}`);
      return;
    }
    this.renderList();
  }

  private renderList(): void {
    const body = this.container.querySelector<HTMLElement>(".queue-body")!;
    if (this.flags.length === 0) {
      body.innerHTML = `<p class="empty">No open flags.</p>`;
      return;
    }
    body.innerHTML = `<ul class="flags">${this.flags.map((f) => this.itemHtml(f)).join("")}</ul>`;
  }

  private itemHtml(flag: FlagJson): string {
    const closest =
      flag.best_sku_id === null
        ? "no candidate"
        : `closest ${escapeHtml(flag.best_sku_id)} at ${flag.best_score?.toFixed(3)}`;
    const head = `
      <header class="flag-head">
        <code>${escapeHtml(flag.flag_id)}</code>
        <span>${closest}</span>
        <time>${formatTimestamp(flag.created_at)}</time>
        ${
          this.expanded === flag.flag_id
            ? `<button type="button" data-action="collapse">Close</button>`
            : `<button type="button" data-action="expand">Review</button>`
        }
      </header>`;
    const triage = this.expanded === flag.flag_id ? this.triageHtml(flag) : "";
    return `<li class="flag-item" data-flag-id="${escapeHtml(flag.flag_id)}">${head}${triage}</li>`;
  }

  private triageHtml(flag: FlagJson): string {
    const note = this.settled.get(flag.flag_id);
    const disabled = note !== undefined ? "disabled" : "";
    const patch =
      this.detail?.flag_id === flag.flag_id && this.detail.patch_png_base64
        ? `<img class="patch" alt="product crop" src="data:image/png;base64,${this.detail.patch_png_base64}">`
        : `<p class="empty">(no stored image)</p>`;
    return `
      <section class="triage">
        ${patch}
        <form class="triage-form">
          <label>SKU id <input name="sku_id" required placeholder="new or existing id" ${disabled}></label>
          <label>name <input name="name" placeholder="product name" ${disabled}></label>
          <label>price (¢) <input name="price_cents" type="number" min="0" step="1" value="0" ${disabled}></label>
          <label>category <input name="category" ${disabled}></label>
          <button type="submit" data-action="resolve" ${disabled}>Resolve into catalog</button>
          <button type="button" data-action="dismiss-flag" ${disabled}>Dismiss</button>
        </form>
        <p class="triage-note">${note !== undefined ? escapeHtml(note) : ""}</p>
      </section>`;
  }

  private setNote(item: HTMLElement, text: string): void {
    const note = item.querySelector<HTMLElement>(".triage-note");
    if (note) note.textContent = text;
  }

  private async settle(flagId: string, verb: "resolve" | "dismiss"): Promise<void> {
    const item = this.container.querySelector<HTMLElement>(`[data-flag-id="${flagId}"]`);
    if (!item || this.settled.has(flagId)) return;
    const controls = item.querySelectorAll<HTMLInputElement | HTMLButtonElement>("input, button");
    controls.forEach((el) => (el.disabled = true));

    try {
      if (verb === "resolve") {
        const form = item.querySelector<HTMLFormElement>("form.triage-form")!;
        const field = (name: string) =>
          form.querySelector<HTMLInputElement>(`input[name="${name}"]`)!.value.trim();
        const skuId = field("sku_id");
        if (!skuId) {
          this.setNote(item, "a SKU id is required");
          controls.forEach((el) => (el.disabled = false));
          return;
        }
        const sku = await this.api.resolveFlag(flagId, {
          sku_id: skuId,
          name: field("name"),
          price_cents: Number(field("price_cents") || "0"),
          category: field("category"),
        });
        this.settled.set(flagId, `resolved into ${sku.sku_id}`);
        this.options.onResolved?.(sku);
      } else {
        const flag = await this.api.dismissFlag(flagId);
        this.settled.set(flagId, "dismissed");
        this.options.onDismissed?.(flag);
      }
      this.expanded = null;
      this.detail = null;
      await this.refresh();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // Lost the race to another session; this flag's shot is spent here too.
        this.settled.set(flagId, "already handled in another session");
        this.setNote(item, "already handled in another session");
      } else if (err instanceof ApiError && err.status === 400) {
        this.setNote(item, `rejected: ${err.message}`);
        controls.forEach((el) => (el.disabled = false));
      } else {
        this.alerts.push(`${verb} failed: ${(err as Error).message}`);
        controls.forEach((el) => (el.disabled = false));
      }
    }
  }
}
