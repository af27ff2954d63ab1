/**
 * Shared display-fidelity check: render a receipt from the raw response
 * text of a recorded session and byte-compare every rendered money value
 * against the corresponding token in the raw JSON.
 */

import { expect } from "vitest";

import { ReceiptView } from "../src/views/receipt.js";
import type { ReceiptJson } from "../src/types.js";
import { mount } from "./helpers.js";

export interface FidelityResult {
  receipt: ReceiptJson;
  renderedPrices: string[];
  renderedSubtotal: string;
}

export function assertRenderedMoneyMatchesRaw(rawText: string): FidelityResult {
  const receipt = JSON.parse(rawText) as ReceiptJson;
  const root = mount();
  new ReceiptView(root).render(receipt);

  const renderedPrices = [...root.querySelectorAll('[data-field="price_cents"]')].map(
    (cell) => cell.textContent ?? "",
  );
  const renderedSubtotal =
    root.querySelector('[data-field="subtotal_cents"]')!.textContent ?? "";

  // In a receipt payload, price_cents tokens occur only inside matched line
  // decisions, in item order — the same order the table renders rows.
  const priceTokens = [...rawText.matchAll(/"price_cents":\s*(\d+)/g)].map((m) => m[1]);
  const subtotalToken = rawText.match(/"subtotal_cents":\s*(\d+)/)![1];

  expect(renderedPrices).toHaveLength(priceTokens.length);
  renderedPrices.forEach((rendered, i) => {
    expect(Buffer.from(rendered).equals(Buffer.from(priceTokens[i]))).toBe(true);
  });
  expect(Buffer.from(renderedSubtotal).equals(Buffer.from(subtotalToken))).toBe(true);

  return { receipt, renderedPrices, renderedSubtotal };
}
