// Scan panel: target configuration and connect-scan results.

import type { ScanFinding } from "../api.js";
import { renderFindings } from "../render.js";
import { validateHosts, validatePorts } from "../validation.js";
import {
  checkbox,
  evidenceFooter,
  field,
  runAction,
  showFieldErrors,
  toolErrorNotice,
  type PanelContext,
} from "./common.js";

export function renderScanForm(): string {
  return `
  <form class="tool-form" data-panel="scan">
    <label>Hosts <input name="hosts" placeholder="127.0.0.1 or 10.0.0.0/29" value="127.0.0.1"></label>
    <label>Ports <input name="ports" placeholder="502,4840,5002"></label>
    <label>Timeout (ms) <input name="timeout" value="500" size="6"></label>
    <label>Concurrency <input name="concurrency" value="256" size="6"></label>
    <label class="check"><input type="checkbox" name="classify" checked> Classify services</label>
    <label class="check"><input type="checkbox" name="store_evidence"> Store as evidence</label>
    <button type="submit" data-action="scan">Run scan</button>
    <span class="busy-indicator" hidden>scanning…</span>
  </form>
  <div class="panel-errors"></div>
  <div class="panel-result"></div>`;
}

export function bindScanPanel(ctx: PanelContext): void {
  const root = ctx.root;
  root.querySelector("form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    const hosts = field(root, "hosts");
    const ports = field(root, "ports");
    const errors = [...validateHosts(hosts), ...validatePorts(ports)];
    if (showFieldErrors(root, errors)) return;
    void runAction(ctx, root, async () => {
      const response = await ctx.api.scan({
        hosts,
        ports,
        timeout_ms: parseInt(field(root, "timeout"), 10) || 500,
        concurrency: parseInt(field(root, "concurrency"), 10) || 256,
        classify: checkbox(root, "classify"),
        store_evidence: checkbox(root, "store_evidence"),
      });
      ctx.state.lastResults.scan = response;
      if (response.status !== "ok") return toolErrorNotice(response.result);
      const findings = (response.result.findings ?? []) as ScanFinding[];
      return renderFindings(findings) + evidenceFooter(response.evidence_id);
    });
  });
}
