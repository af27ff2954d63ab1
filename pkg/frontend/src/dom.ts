/** Small DOM helpers shared by the views. */

export function escapeHtml(value: unknown): string {
  return String(value)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** Epoch seconds → ISO timestamp for display. */
export function formatTimestamp(epochSeconds: number): string {
  return new Date(epochSeconds * 1000).toISOString().replace(".000Z", "Z");
}

/**
 * Dismissible error banners. Alerts never vanish on their own: the operator
 * closes them, so no failure is silent.
 */
export class AlertHost {
  constructor(private readonly container: HTMLElement) {
    this.container.classList.add("alerts");
    this.container.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      if (target.dataset.action === "dismiss-alert") {
        target.closest(".alert")?.remove();
      }
    });
  }

  push(message: string): void {
    this.container.insertAdjacentHTML(
      "afterbegin",
      `<div class="alert" role="alert">
        <span class="alert-text">${escapeHtml(message)}</span>
        <button type="button" data-action="dismiss-alert" aria-label="dismiss">&times;</button>
      </div>`,
    );
  }

  clear(): void {
    this.container.replaceChildren();
  }
}
