import { vi } from "vitest";

/** Fresh container attached to the document, so event delegation works. */
export function mount(): HTMLElement {
  const el = document.createElement("div");
  document.body.appendChild(el);
  return el;
}

export async function waitFor(
  predicate: () => boolean,
  { timeout = 4000, interval = 15 } = {},
): Promise<void> {
  const deadline = Date.now() + timeout;
  while (!predicate()) {
    if (Date.now() > deadline) throw new Error("waitFor timed out");
    await new Promise((r) => setTimeout(r, interval));
  }
}

export interface RecordedCall {
  method: string;
  path: string;
  body: unknown;
  headers: Record<string, string>;
}

export type MockReply =
  | { status: number; json?: unknown; text?: string }
  | undefined;

/**
 * Replace global fetch with a route handler; returns the call log.
 * Undefined replies become the service's flat 404 envelope.
 */
export function mockFetch(
  handler: (method: string, url: URL, body: unknown) => MockReply,
): { calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  vi.stubGlobal(
    "fetch",
    vi.fn(async (input: RequestInfo | URL, init?: RequestInit) => {
      const url = new URL(String(input));
      const method = init?.method ?? "GET";
      const body = init?.body ? JSON.parse(String(init.body)) : undefined;
      calls.push({
        method,
        path: url.pathname + url.search,
        body,
        headers: Object.fromEntries(
          Object.entries((init?.headers ?? {}) as Record<string, string>),
        ),
      });
      const reply = handler(method, url, body) ?? {
        status: 404,
        json: { code: "not_found", message: `no mock route for ${method} ${url.pathname}` },
      };
      const text = reply.text ?? JSON.stringify(reply.json ?? null);
      return new Response(reply.status === 204 ? null : text, {
        status: reply.status,
        headers: { "content-type": "application/json" },
      });
    }),
  );
  return { calls };
}
