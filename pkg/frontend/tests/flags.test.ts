import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { DEFAULT_POLL_MS, FlagQueueView } from "../src/views/flags.js";
import type { FlagJson, SkuJson } from "../src/types.js";
import { mockFetch, mount, waitFor } from "./helpers.js";

const client = new ApiClient({ baseUrl: "http://backend:9000", token: "" });

function makeFlag(id: string): FlagJson {
  return {
    flag_id: id,
    status: "open",
    best_sku_id: "sku-near",
    best_score: 0.4012,
    patch_ref: `${id}.png`,
    created_at: 1755168000,
  };
}

const resolvedSku: SkuJson = {
  sku_id: "sku-new",
  name: "oat bar",
  price_cents: 210,
  category: "snacks",
  reference_count: 1,
  registered_at: 1755168100,
  record_id: 7,
};

/** Standard mock backend over a mutable open-flag list. */
function flagBackend(open: FlagJson[]) {
  return mockFetch((method, url, body) => {
    const match = url.pathname.match(/^\/v1\/flags\/([^/]+)(?:\/(resolve|dismiss))?$/);
    if (url.pathname === "/v1/flags") {
      return { status: 200, json: { flags: open, count: open.length } };
    }
    if (match && !match[2]) {
      const flag = open.find((f) => f.flag_id === match[1]);
      return flag
        ? { status: 200, json: { ...flag, patch_png_base64: "aGk=" } }
        : { status: 404, json: { code: "unknown_flag", message: `no flag '${match[1]}'` } };
    }
    if (match && match[2] === "resolve") {
      const index = open.findIndex((f) => f.flag_id === match[1]);
      if (index === -1) {
        return { status: 409, json: { code: "flag_not_open", message: `flag '${match[1]}' is resolved` } };
      }
      open.splice(index, 1);
      const request = body as { sku_id: string; name: string; price_cents: number };
      return {
        status: 200,
        json: { ...resolvedSku, sku_id: request.sku_id, name: request.name, price_cents: request.price_cents },
      };
    }
    if (match && match[2] === "dismiss") {
      const index = open.findIndex((f) => f.flag_id === match[1]);
      if (index === -1) {
        return { status: 409, json: { code: "flag_not_open", message: "already closed" } };
      }
      const [flag] = open.splice(index, 1);
      return { status: 200, json: { ...flag, status: "dismissed" } };
    }
    return undefined;
  });
}

function fillTriage(root: HTMLElement, values: Record<string, string>): void {
  for (const [name, value] of Object.entries(values)) {
    root.querySelector<HTMLInputElement>(`.triage-form input[name="${name}"]`)!.value = value;
  }
}

afterEach(() => {
  vi.unstubAllGlobals();
  vi.useRealTimers();
});

describe("flag queue", () => {
  it("lists open flags and expands one with its stored crop", async () => {
    flagBackend([makeFlag("fg-1"), makeFlag("fg-2")]);
    const root = mount();
    const view = new FlagQueueView(root, client, { pollMs: 60000 });

    await view.refresh();
    expect(root.querySelectorAll("li.flag-item")).toHaveLength(2);
    expect(root.querySelector(".queue-count")!.textContent).toBe("open flags: 2");

    root.querySelector<HTMLButtonElement>('[data-flag-id="fg-1"] [data-action="expand"]')!.click();
    await waitFor(() => root.querySelector(".triage") !== null);
    expect(root.querySelector("img.patch")!.getAttribute("src")).toBe("data:image/png;base64,aGk=");
    expect(root.querySelector(".flag-head time")!.textContent).toBe("2025-08-14T10:40:00Z");
  });

  it("resolves a flag single-shot and reports the new SKU", async () => {
    const open = [makeFlag("fg-1")];
    const { calls } = flagBackend(open);
    const root = mount();
    const resolved: SkuJson[] = [];
    const view = new FlagQueueView(root, client, { pollMs: 60000, onResolved: (s) => resolved.push(s) });

    await view.refresh();
    root.querySelector<HTMLButtonElement>('[data-action="expand"]')!.click();
    await waitFor(() => root.querySelector(".triage") !== null);

    fillTriage(root, { sku_id: "sku-oat", name: "oat bar", price_cents: "210", category: "snacks" });
    root.querySelector<HTMLButtonElement>('[data-action="resolve"]')!.click();
    await waitFor(() => root.querySelector(".empty")?.textContent === "No open flags.");

    const resolveCall = calls.find((c) => c.path.endsWith("/resolve"))!;
    expect(resolveCall.body).toEqual({
      sku_id: "sku-oat",
      name: "oat bar",
      price_cents: 210,
      category: "snacks",
    });
    expect(resolved.map((s) => s.sku_id)).toEqual(["sku-oat"]);
  });

  it("shows the 409 state when another session already handled the flag", async () => {
    // The listing still shows fg-9, but resolving it 409s.
    mockFetch((method, url) => {
      if (url.pathname === "/v1/flags") {
        return { status: 200, json: { flags: [makeFlag("fg-9")], count: 1 } };
      }
      if (url.pathname === "/v1/flags/fg-9") {
        return { status: 200, json: { ...makeFlag("fg-9"), patch_png_base64: null } };
      }
      if (url.pathname.endsWith("/resolve") || url.pathname.endsWith("/dismiss")) {
        return { status: 409, json: { code: "flag_not_open", message: "flag 'fg-9' is resolved" } };
      }
      return undefined;
    });
    const root = mount();
    const resolved: SkuJson[] = [];
    const view = new FlagQueueView(root, client, { pollMs: 60000, onResolved: (s) => resolved.push(s) });

    await view.refresh();
    root.querySelector<HTMLButtonElement>('[data-action="expand"]')!.click();
    await waitFor(() => root.querySelector(".triage") !== null);
    fillTriage(root, { sku_id: "sku-dup" });
    root.querySelector<HTMLButtonElement>('[data-action="resolve"]')!.click();

    await waitFor(() =>
      root.querySelector(".triage-note")!.textContent!.includes("already handled"),
    );
    // Shot spent: both controls stay locked, nothing was registered.
    expect(root.querySelector<HTMLButtonElement>('[data-action="resolve"]')!.disabled).toBe(true);
    expect(root.querySelector<HTMLButtonElement>('[data-action="dismiss-flag"]')!.disabled).toBe(true);
    expect(resolved).toHaveLength(0);
  });

  it("re-arms the form after a validation rejection", async () => {
    mockFetch((method, url) => {
      if (url.pathname === "/v1/flags") {
        return { status: 200, json: { flags: [makeFlag("fg-3")], count: 1 } };
      }
      if (url.pathname === "/v1/flags/fg-3") {
        return { status: 200, json: { ...makeFlag("fg-3"), patch_png_base64: null } };
      }
      if (url.pathname.endsWith("/resolve")) {
        return {
          status: 400,
          json: { code: "validation_error", message: "a new SKU needs name, price_cents, and category" },
        };
      }
      return undefined;
    });
    const root = mount();
    const view = new FlagQueueView(root, client, { pollMs: 60000 });

    await view.refresh();
    root.querySelector<HTMLButtonElement>('[data-action="expand"]')!.click();
    await waitFor(() => root.querySelector(".triage") !== null);
    fillTriage(root, { sku_id: "sku-incomplete" });
    root.querySelector<HTMLButtonElement>('[data-action="resolve"]')!.click();

    await waitFor(() => root.querySelector(".triage-note")!.textContent!.includes("rejected"));
    expect(root.querySelector<HTMLButtonElement>('[data-action="resolve"]')!.disabled).toBe(false);
  });

  it("dismisses a flag without touching the catalog", async () => {
    const open = [makeFlag("fg-4")];
    const { calls } = flagBackend(open);
    const root = mount();
    let dismissals = 0;
    const view = new FlagQueueView(root, client, { pollMs: 60000, onDismissed: () => dismissals++ });

    await view.refresh();
    root.querySelector<HTMLButtonElement>('[data-action="expand"]')!.click();
    await waitFor(() => root.querySelector(".triage") !== null);
    root.querySelector<HTMLButtonElement>('[data-action="dismiss-flag"]')!.click();
    await waitFor(() => root.querySelector(".empty")?.textContent === "No open flags.");

    expect(dismissals).toBe(1);
    expect(calls.some((c) => c.path.endsWith("/dismiss"))).toBe(true);
    expect(calls.some((c) => c.method === "POST" && c.path === "/v1/skus")).toBe(false);
  });

  it("polls every 5 s by default without clobbering an open triage form", async () => {
    expect(DEFAULT_POLL_MS).toBe(5000);
    const open = [makeFlag("fg-1")];
    flagBackend(open);
    vi.useFakeTimers();
    const root = mount();
    const view = new FlagQueueView(root, client);

    view.start();
    await vi.advanceTimersByTimeAsync(0);
    expect(root.querySelectorAll("li.flag-item")).toHaveLength(1);

    root.querySelector<HTMLButtonElement>('[data-action="expand"]')!.click();
    await vi.advanceTimersByTimeAsync(0);
    const nameInput = root.querySelector<HTMLInputElement>('.triage-form input[name="name"]')!;
    nameInput.value = "half-typed nam";

    open.push(makeFlag("fg-2"));
    await vi.advanceTimersByTimeAsync(5000);

    // The tick refreshed the count but left the operator's form alone.
    expect(root.querySelector(".queue-count")!.textContent).toBe("open flags: 2");
    expect(
      root.querySelector<HTMLInputElement>('.triage-form input[name="name"]')!.value,
    ).toBe("half-typed nam");

    view.stop();
    open.push(makeFlag("fg-3"));
    await vi.advanceTimersByTimeAsync(20000);
    expect(root.querySelector(".queue-count")!.textContent).toBe("open flags: 2");
  });
});
