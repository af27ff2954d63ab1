/**
 * Connection settings: the console's single configuration surface —
 * one base URL and an optional bearer token.
 */

import { ApiClient } from "../api.js";
import { escapeHtml } from "../dom.js";
import { ConsoleConfig, normalizeBaseUrl, saveConfig } from "../config.js";

export interface SettingsOptions {
  onSave?: (config: ConsoleConfig) => void;
}

export class SettingsView {
  constructor(
    private readonly container: HTMLElement,
    private config: ConsoleConfig,
    private readonly options: SettingsOptions = {},
  ) {
    this.render();
    this.bind();
  }

  private render(): void {
    this.container.innerHTML = `
      <form class="settings-form">
        <label>service base URL
          <input name="base-url" value="${escapeHtml(this.config.baseUrl)}" placeholder="http://127.0.0.1:8000">
        </label>
        <label>bearer token <small>(leave empty if the service runs without auth)</small>
          <input name="token" value="${escapeHtml(this.config.token)}" autocomplete="off">
        </label>
        <button type="submit" data-action="save">Save</button>
        <button type="button" data-action="check">Check connection</button>
      </form>
      <p class="settings-status"></p>`;
  }

  private formConfig(): ConsoleConfig {
    const field = (name: string) =>
      this.container.querySelector<HTMLInputElement>(`input[name="${name}"]`)!.value;
    return { baseUrl: normalizeBaseUrl(field("base-url")), token: field("token").trim() };
  }

  private setStatus(text: string): void {
    this.container.querySelector<HTMLElement>(".settings-status")!.textContent = text;
  }

  private bind(): void {
    const form = this.container.querySelector<HTMLFormElement>("form.settings-form")!;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      this.config = saveConfig(this.formConfig());
      this.setStatus(`saved — console now talks to ${this.config.baseUrl}`);
      this.options.onSave?.(this.config);
    });
    form.querySelector<HTMLButtonElement>('[data-action="check"]')!.addEventListener("click", async () => {
      this.setStatus("checking…");
      try {
        const health = await new ApiClient(this.formConfig()).health();
        this.setStatus(
          `ok — service ${health.version}, ${health.sku_count} SKUs, ` +
            `${health.open_flags} open flag${health.open_flags === 1 ? "" : "s"}`,
        );
      } catch (err) {
        this.setStatus(`connection failed: ${(err as Error).message}`);
      }
    });
  }
}
