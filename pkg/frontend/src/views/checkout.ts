/**
 * Checkout page: run a checkout from a fixture id or an uploaded photo and
 * show the resulting receipt. Nothing is drawn until the API answers.
 */

import { ApiClient, ApiError } from "../api.js";
import { AlertHost, escapeHtml } from "../dom.js";
import type { ReceiptJson } from "../types.js";
import { ReceiptView } from "./receipt.js";

const HISTORY_KEY = "skuscan.console.fixtures";
const HISTORY_LIMIT = 12;

export interface CheckoutPageOptions {
  onReceipt?: (receipt: ReceiptJson) => void;
}

function loadHistory(): string[] {
  try {
    const raw = localStorage.getItem(HISTORY_KEY);
    const parsed = raw ? (JSON.parse(raw) as unknown) : [];
    return Array.isArray(parsed) ? parsed.filter((x) => typeof x === "string") : [];
  } catch {
    return [];
  }
}

export class CheckoutPage {
  private readonly receiptView: ReceiptView;
  private alerts!: AlertHost;
  private history: string[] = loadHistory();
  private busy = false;

  constructor(
    private readonly container: HTMLElement,
    private api: ApiClient,
    private readonly options: CheckoutPageOptions = {},
  ) {
    this.render();
    this.alerts = new AlertHost(this.container.querySelector<HTMLElement>(".alert-slot")!);
    this.receiptView = new ReceiptView(this.container.querySelector<HTMLElement>(".receipt-slot")!);
    this.bind();
  }

  setClient(api: ApiClient): void {
    this.api = api;
  }

  private render(): void {
    const datalist = this.history
      .map((id) => `<option value="${escapeHtml(id)}"></option>`)
      .join("");
    this.container.innerHTML = `
      <form class="checkout-form">
        <fieldset class="source">
          <label><input type="radio" name="source" value="fixture" checked> demo fixture</label>
          <label><input type="radio" name="source" value="upload"> photo upload</label>
        </fieldset>
        <label class="fixture-row">fixture id
          <input name="fixture-id" list="fixture-history" placeholder="e.g. scene-001" autocomplete="off">
          <datalist id="fixture-history">${datalist}</datalist>
        </label>
        <label class="upload-row hidden">image file
          <input name="image-file" type="file" accept="image/png,image/jpeg,image/bmp">
        </label>
        <button type="submit" data-action="run">Run checkout</button>
      </form>
      <div class="alert-slot"></div>
      <div class="receipt-slot"></div>`;
  }

  private bind(): void {
    const form = this.container.querySelector<HTMLFormElement>("form.checkout-form")!;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.runCheckout();
    });
    form.addEventListener("change", (event) => {
      const target = event.target as HTMLInputElement;
      if (target.name !== "source") return;
      const upload = target.value === "upload";
      form.querySelector(".fixture-row")!.classList.toggle("hidden", upload);
      form.querySelector(".upload-row")!.classList.toggle("hidden", !upload);
    });
  }

  private rememberFixture(id: string): void {
    this.history = [id, ...this.history.filter((x) => x !== id)].slice(0, HISTORY_LIMIT);
    localStorage.setItem(HISTORY_KEY, JSON.stringify(this.history));
    const datalist = this.container.querySelector("#fixture-history")!;
    datalist.innerHTML = this.history
      .map((x) => `<option value="${escapeHtml(x)}"></option>`)
      .join("");
  }

  private async runCheckout(): Promise<void> {
    if (this.busy) return;
    const form = this.container.querySelector<HTMLFormElement>("form.checkout-form")!;
    const source = form.querySelector<HTMLInputElement>('input[name="source"]:checked')!.value;
    const button = form.querySelector<HTMLButtonElement>('[data-action="run"]')!;

    this.busy = true;
    button.disabled = true;
    try {
      let receipt: ReceiptJson;
      let imageUrl: string | null = null;
      if (source === "fixture") {
        const fixtureId = form.querySelector<HTMLInputElement>('input[name="fixture-id"]')!.value.trim();
        if (!fixtureId) {
          this.alerts.push("enter a fixture id first");
          return;
        }
        receipt = await this.api.checkoutFixture(fixtureId);
        this.rememberFixture(fixtureId);
      } else {
        const fileInput = form.querySelector<HTMLInputElement>('input[name="image-file"]')!;
        const file = fileInput.files?.[0];
        if (!file) {
          this.alerts.push("choose an image file first");
          return;
        }
        const base64 = await readFileBase64(file);
        receipt = await this.api.checkoutImage(base64, file.name.replace(/\.[^.]+$/, ""));
        imageUrl = URL.createObjectURL(file);
      }
      this.receiptView.render(receipt, imageUrl);
      this.options.onReceipt?.(receipt);
    } catch (err) {
      if (err instanceof ApiError && err.code === "network") {
        this.alerts.push(`backend unreachable — check the connection settings, then retry. (${err.message})`);
      } else if (err instanceof ApiError) {
        this.alerts.push(`checkout failed: ${err.message} [${err.code}]`);
      } else {
        this.alerts.push(`checkout failed: ${(err as Error).message}`);
      }
    } finally {
      this.busy = false;
      button.disabled = false;
    }
  }
}

/** File → base64 payload (data-URL prefix stripped). */
export function readFileBase64(file: Blob): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onerror = () => reject(reader.error ?? new Error("file read failed"));
    reader.onload = () => {
      const url = String(reader.result);
      resolve(url.slice(url.indexOf(",") + 1));
    };
    reader.readAsDataURL(file);
  });
}
