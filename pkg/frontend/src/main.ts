/**
 * Console shell: hash-routed tabs over one shared API client.
 *
 * All state lives server-side; switching tabs or hard-refreshing the page
 * rebuilds every view from API responses alone.
 */

import { ApiClient } from "./api.js";
import { ConsoleConfig, loadConfig } from "./config.js";
import { BenchmarkView } from "./views/benchmark.js";
import { CatalogView } from "./views/catalog.js";
import { CheckoutPage } from "./views/checkout.js";
import { FlagQueueView } from "./views/flags.js";
import { SettingsView } from "./views/settings.js";

const TABS = ["checkout", "flags", "catalog", "benchmark", "settings"] as const;
type Tab = (typeof TABS)[number];

export function mountConsole(root: HTMLElement): void {
  let config: ConsoleConfig = loadConfig();
  let client = new ApiClient(config);

  root.innerHTML = `
    <header class="top">
      <h1>skuscan console</h1>
      <nav>${TABS.map((t) => `<a href="#${t}" data-tab="${t}">${t}</a>`).join("")}</nav>
      <span class="health-badge" title="service status">●</span>
    </header>
    <main>
      ${TABS.map((t) => `<section class="tab" data-tab-panel="${t}" hidden></section>`).join("")}
    </main>`;

  const panel = (tab: Tab) => root.querySelector<HTMLElement>(`[data-tab-panel="${tab}"]`)!;
  const healthBadge = root.querySelector<HTMLElement>(".health-badge")!;

  const catalog = new CatalogView(panel("catalog"), client);
  const flags = new FlagQueueView(panel("flags"), client, {
    // A resolved flag becomes a SKU; pull the catalog so it shows up
    // without a page reload.
    onResolved: () => void catalog.reload(),
  });
  const checkout = new CheckoutPage(panel("checkout"), client);
  const benchmark = new BenchmarkView(panel("benchmark"), client);
  new SettingsView(panel("settings"), config, {
    onSave: (next) => {
      config = next;
      client = new ApiClient(config);
      checkout.setClient(client);
      flags.setClient(client);
      catalog.setClient(client);
      benchmark.setClient(client);
      void refreshHealth();
    },
  });

  async function refreshHealth(): Promise<void> {
    try {
      const health = await client.health();
      healthBadge.classList.remove("down");
      healthBadge.classList.add("up");
      healthBadge.title = `service ${health.version} — ${health.sku_count} SKUs, ${health.open_flags} open flags`;
    } catch (err) {
      healthBadge.classList.remove("up");
      healthBadge.classList.add("down");
      healthBadge.title = `service unreachable: ${(err as Error).message}`;
    }
  }

  function route(): void {
    const hash = location.hash.replace(/^#/, "");
    const [name, flagId] = hash.split("/", 2);
    const tab: Tab = (TABS as readonly string[]).includes(name) ? (name as Tab) : "checkout";

    for (const t of TABS) panel(t).hidden = t !== tab;
    root.querySelectorAll<HTMLAnchorElement>("nav a").forEach((a) => {
      a.classList.toggle("active", a.dataset.tab === tab);
    });

    if (tab === "flags") {
      flags.start();
      if (flagId) void flags.focus(flagId);
    } else {
      flags.stop();
    }
    if (tab === "catalog") void catalog.reload();
  }

  window.addEventListener("hashchange", route);
  route();
  void refreshHealth();
}

declare global {
  interface Window {
    __consoleMounted?: boolean;
  }
}

// Auto-mount in the browser; tests import the pieces directly instead.
if (typeof document !== "undefined" && document.getElementById("app") && !window.__consoleMounted) {
  window.__consoleMounted = true;
  mountConsole(document.getElementById("app")!);
}
