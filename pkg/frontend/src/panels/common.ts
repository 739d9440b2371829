// Shared panel machinery: form access, busy indicators, error display,
// and the confirmation step destructive actions must pass through.

import { ApiError, ServiceDownError, type ApiClient } from "../api.js";
import type { ConsoleState } from "../state.js";
import { renderErrorNotice, renderEvidenceLink, renderFieldErrors } from "../render.js";
import type { FieldError } from "../validation.js";

export interface PanelContext {
  api: ApiClient;
  state: ConsoleState;
  root: HTMLElement;
  confirm: (message: string) => boolean;
  refreshInbox: () => Promise<void>;
}

export function field(root: HTMLElement, name: string): string {
  const el = root.querySelector<HTMLInputElement | HTMLSelectElement>(`[name="${name}"]`);
  return el ? el.value : "";
}

export function checkbox(root: HTMLElement, name: string): boolean {
  const el = root.querySelector<HTMLInputElement>(`[name="${name}"]`);
  return el ? el.checked : false;
}

export function resultArea(root: HTMLElement): HTMLElement {
  return root.querySelector<HTMLElement>(".panel-result")!;
}

export function errorArea(root: HTMLElement): HTMLElement {
  return root.querySelector<HTMLElement>(".panel-errors")!;
}

export function showFieldErrors(root: HTMLElement, errors: FieldError[]): boolean {
  errorArea(root).innerHTML = errors.length ? renderFieldErrors(errors) : "";
  return errors.length > 0;
}

export function setBusy(root: HTMLElement, busy: boolean): void {
  root.classList.toggle("busy", busy);
  root
    .querySelectorAll<HTMLButtonElement>("button[data-action]")
    .forEach((b) => (b.disabled = busy));
  const indicator = root.querySelector<HTMLElement>(".busy-indicator");
  if (indicator) indicator.hidden = !busy;
}

/** Run one API action with busy indication and uniform error rendering. */
export async function runAction(
  ctx: PanelContext,
  root: HTMLElement,
  action: () => Promise<string>,
): Promise<void> {
  setBusy(root, true);
  const target = resultArea(root);
  try {
    target.innerHTML = await action();
  } catch (error) {
    if (error instanceof ApiError) {
      if (error.fieldDetails.length) {
        showFieldErrors(root, error.fieldDetails);
        return;
      }
      target.innerHTML = renderErrorNotice(
        error.httpStatus === 502 ? "Target unreachable" : `HTTP ${error.httpStatus}`,
        error.message,
      );
    } else if (error instanceof ServiceDownError) {
      target.innerHTML = renderErrorNotice("Service unavailable", error.message);
      ctx.state.serviceDown = true;
      document.dispatchEvent(new CustomEvent("icskit:service-down"));
    } else {
      target.innerHTML = renderErrorNotice("Unexpected error", String(error));
    }
  } finally {
    setBusy(root, false);
  }
}

export function evidenceFooter(evidenceId: string | null): string {
  return renderEvidenceLink(evidenceId);
}

export function toolErrorNotice(result: Record<string, unknown>): string {
  const error = (result as { error?: { type?: string; message?: string } }).error ?? {};
  return renderErrorNotice(error.type ?? "Tool error", error.message ?? "operation failed");
}
