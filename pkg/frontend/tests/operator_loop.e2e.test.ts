/**
 * End-to-end operator loop against a live backend process.
 *
 * A checkout with one unregistered product raises a flag; the operator
 * resolves it through the console; an identical checkout then returns a
 * match carrying the operator-entered name and price. Every step goes
 * through the console's own components talking to the real HTTP API.
 */

import { mkdir, writeFile } from "node:fs/promises";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import type { ReceiptJson, SkuJson } from "../src/types.js";
import { CatalogView } from "../src/views/catalog.js";
import { CheckoutPage } from "../src/views/checkout.js";
import { FlagQueueView } from "../src/views/flags.js";
import { assertRenderedMoneyMatchesRaw } from "./fidelity.js";
import { mount, waitFor } from "./helpers.js";
import { labelLines, sceneBmp, solidPatchBase64, type SceneRegion } from "./scene.js";
import { startServer, type LiveServer } from "./server.js";

const SIZE = 128;
const GRANOLA: SceneRegion = { classId: 3, x0: 16, y0: 32, x1: 48, y1: 96 };
const MYSTERY: SceneRegion = { classId: 7, x0: 80, y0: 32, x1: 112, y1: 96 };
const CRACKERS: SceneRegion = { classId: 12, x0: 52, y0: 32, x1: 76, y1: 96 };
const STRANGER: SceneRegion = { classId: 42, x0: 16, y0: 100, x1: 112, y1: 124 };

const LOOP_FIXTURE = "lane-demo";
const SESSION_FIXTURE = "lane-mixed";

let server: LiveServer;
let client: ApiClient;

async function writeScene(name: string, regions: SceneRegion[]): Promise<void> {
  await writeFile(join(server.fixtureDir, `${name}.bmp`), sceneBmp(SIZE, regions));
  await writeFile(join(server.fixtureDir, `${name}.txt`), labelLines(SIZE, regions));
}

function runFixtureCheckout(root: HTMLElement, fixtureId: string): void {
  const form = root.querySelector<HTMLFormElement>("form.checkout-form")!;
  form.querySelector<HTMLInputElement>('input[name="fixture-id"]')!.value = fixtureId;
  form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
}

beforeAll(async () => {
  server = await startServer();
  client = new ApiClient({ baseUrl: server.baseUrl, token: server.token });
  await writeScene(LOOP_FIXTURE, [GRANOLA, MYSTERY]);
  await writeScene(SESSION_FIXTURE, [GRANOLA, CRACKERS, STRANGER]);
  await client.createSku({
    sku_id: "sku-granola",
    name: "granola bar",
    price_cents: 499,
    category: "snacks",
    references: [solidPatchBase64(GRANOLA.classId)],
  });
  await client.createSku({
    sku_id: "sku-crackers",
    name: "rice crackers",
    price_cents: 1249,
    category: "snacks",
    references: [solidPatchBase64(CRACKERS.classId)],
  });
}, 120_000);

afterAll(async () => {
  await server?.stop();
});

describe("operator loop against the live API", () => {
  it(
    "turns an unregistered product into a flag, resolves it, and the rerun checkout matches",
    async () => {
      // 1. Checkout with one registered and one unregistered product.
      const checkoutRoot = mount();
      const receipts: ReceiptJson[] = [];
      new CheckoutPage(checkoutRoot, client, { onReceipt: (r) => receipts.push(r) });
      runFixtureCheckout(checkoutRoot, LOOP_FIXTURE);
      await waitFor(() => receipts.length === 1, { timeout: 20000 });

      const first = receipts[0];
      expect(first.unknown_count).toBe(1);
      expect(first.flag_ids).toHaveLength(1);
      const flagId = first.flag_ids[0];

      const matchRow = checkoutRoot.querySelector("tr.line.match")!;
      expect(matchRow.textContent).toContain("granola bar");
      expect(matchRow.querySelector('[data-field="price_cents"]')!.textContent).toBe("499");
      expect(checkoutRoot.querySelector(".unknown-banner")).not.toBeNull();
      expect(
        checkoutRoot.querySelector<HTMLAnchorElement>("a.flag-link")!.getAttribute("href"),
      ).toBe(`#flags/${flagId}`);

      // 2. The flag shows up in the queue with the stored product crop.
      const queueRoot = mount();
      const resolvedSkus: SkuJson[] = [];
      const queue = new FlagQueueView(queueRoot, client, {
        pollMs: 600000,
        onResolved: (sku) => resolvedSkus.push(sku),
      });
      await queue.focus(flagId);
      const item = queueRoot.querySelector(`[data-flag-id="${flagId}"]`)!;
      expect(item.querySelector("img.patch")!.getAttribute("src")).toMatch(
        /^data:image\/png;base64,/,
      );

      // 3. Resolve it into a brand-new SKU with operator-entered details.
      for (const [name, value] of Object.entries({
        sku_id: "sku-trailmix",
        name: "trail mix",
        price_cents: "275",
        category: "snacks",
      })) {
        item.querySelector<HTMLInputElement>(`.triage-form input[name="${name}"]`)!.value = value;
      }
      item.querySelector<HTMLButtonElement>('[data-action="resolve"]')!.click();
      await waitFor(
        () => queueRoot.querySelector(".empty")?.textContent === "No open flags.",
        { timeout: 20000 },
      );
      expect(resolvedSkus.map((s) => [s.sku_id, s.name, s.price_cents])).toEqual([
        ["sku-trailmix", "trail mix", 275],
      ]);

      // 4. The identical checkout now matches everything, with the
      //    operator-entered name and price on the formerly unknown line.
      runFixtureCheckout(checkoutRoot, LOOP_FIXTURE);
      await waitFor(() => receipts.length === 2, { timeout: 20000 });
      const second = receipts[1];
      expect(second.unknown_count).toBe(0);
      expect(second.flag_ids).toHaveLength(0);
      expect(
        second.items.map((i) =>
          i.decision.kind === "match"
            ? [i.decision.sku_id, i.decision.name, i.decision.price_cents]
            : ["unknown"],
        ),
      ).toEqual([
        ["sku-granola", "granola bar", 499],
        ["sku-trailmix", "trail mix", 275],
      ]);

      expect(checkoutRoot.querySelector(".unknown-banner")).toBeNull();
      const prices = [...checkoutRoot.querySelectorAll('[data-field="price_cents"]')].map(
        (c) => c.textContent,
      );
      expect(prices).toEqual(["499", "275"]);
      expect(
        checkoutRoot.querySelector('[data-field="subtotal_cents"]')!.textContent,
      ).toBe(String(second.subtotal_cents));

      // 5. The new SKU is visible in the catalog view, straight from the API.
      const catalogRoot = mount();
      await new CatalogView(catalogRoot, client).reload();
      const row = catalogRoot.querySelector('[data-sku-id="sku-trailmix"]')!;
      expect(row.textContent).toContain("trail mix");
      expect(row.querySelector('[data-field="price_cents"]')!.textContent).toBe("275");
    },
    120_000,
  );

  it(
    "renders money values that byte-match a session recorded from the live API",
    async () => {
      const response = await fetch(`${server.baseUrl}/v1/checkout`, {
        method: "POST",
        headers: {
          "content-type": "application/json",
          authorization: `Bearer ${server.token}`,
        },
        body: JSON.stringify({ fixture_id: SESSION_FIXTURE }),
      });
      expect(response.status).toBe(200);
      const rawText = await response.text();

      const { receipt, renderedPrices } = assertRenderedMoneyMatchesRaw(rawText);
      // Two registered products plus one unknown region: both prices and the
      // subtotal rendered above came byte-for-byte from this live response.
      expect(renderedPrices).toEqual(["499", "1249"]);
      expect(receipt.unknown_count).toBe(1);

      if (process.env.RECORD_SESSION === "1") {
        const dir = join(process.cwd(), "tests", "fixtures");
        await mkdir(dir, { recursive: true });
        await writeFile(join(dir, "recorded-session.json"), rawText);
      }
    },
    60_000,
  );
});
