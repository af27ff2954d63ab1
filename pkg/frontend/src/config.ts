/**
 * Console configuration: one base URL plus an optional bearer token.
 * Persisted in localStorage so a hard refresh lands on the same backend.
 */

export interface ConsoleConfig {
  baseUrl: string;
  token: string;
}

export const DEFAULT_CONFIG: ConsoleConfig = {
  baseUrl: "http://127.0.0.1:8000",
  token: "",
};

const STORAGE_KEY = "skuscan.console.config";

/** Trim whitespace and trailing slashes so path joins stay predictable. */
export function normalizeBaseUrl(url: string): string {
  return url.trim().replace(/\/+$/, "");
}

export function loadConfig(storage: Storage = localStorage): ConsoleConfig {
  try {
    const raw = storage.getItem(STORAGE_KEY);
    if (!raw) return { ...DEFAULT_CONFIG };
    const parsed = JSON.parse(raw) as Partial<ConsoleConfig>;
    return {
      baseUrl: normalizeBaseUrl(String(parsed.baseUrl ?? DEFAULT_CONFIG.baseUrl)),
      token: String(parsed.token ?? ""),
    };
  } catch {
    return { ...DEFAULT_CONFIG };
  }
}

export function saveConfig(config: ConsoleConfig, storage: Storage = localStorage): ConsoleConfig {
  const cleaned: ConsoleConfig = {
    baseUrl: normalizeBaseUrl(config.baseUrl),
    token: config.token.trim(),
  };
  storage.setItem(STORAGE_KEY, JSON.stringify(cleaned));
  return cleaned;
}
