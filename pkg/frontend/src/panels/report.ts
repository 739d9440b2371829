// Report panel: audience selection, generation, formatted display, and
// byte-exact download of the stored file.

import type { ReportResult } from "../api.js";
import { escapeHtml, renderMarkdown } from "../render.js";
import { validateReportForm } from "../validation.js";
import { field, runAction, showFieldErrors, type PanelContext } from "./common.js";

export function renderReportPanel(): string {
  return `
  <form class="tool-form" data-panel="report">
    <label>Audience
      <select name="audience">
        <option value="executive">executive</option>
        <option value="technical">technical</option>
      </select>
    </label>
    <label>Title <input name="title" value="ICS/OT Security Assessment" size="30"></label>
    <label>Max items <input name="max_items" value="200" size="6"></label>
    <button type="submit" data-action="generate">Generate report</button>
    <span class="busy-indicator" hidden>generating…</span>
  </form>
  <div class="panel-errors"></div>
  <div class="report-history"></div>
  <div class="panel-result"></div>`;
}

export function bindReportPanel(ctx: PanelContext): void {
  const root = ctx.root;
  const history = root.querySelector<HTMLElement>(".report-history")!;

  const renderHistory = () => {
    if (!ctx.state.reports.length) {
      history.innerHTML = "";
      return;
    }
    history.innerHTML =
      `<p>Generated this session:</p><ul>` +
      ctx.state.reports
        .map(
          (r) =>
            `<li><code>${escapeHtml(r.report_id)}</code> ${escapeHtml(r.audience)} — ` +
            `${escapeHtml(r.title)} ` +
            `<button data-report="${escapeHtml(r.report_id)}">download</button></li>`,
        )
        .join("") +
      `</ul>`;
    history.querySelectorAll<HTMLButtonElement>("button[data-report]").forEach((button) => {
      button.addEventListener("click", () => {
        void downloadReport(ctx, button.dataset.report!);
      });
    });
  };

  root.querySelector("form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    const audience = field(root, "audience");
    const title = field(root, "title");
    const errors = validateReportForm(audience, title);
    if (showFieldErrors(root, errors)) return;
    void runAction(ctx, root, async () => {
      const report: ReportResult = await ctx.api.generateReport({
        audience,
        title,
        max_items: parseInt(field(root, "max_items"), 10) || 200,
      });
      ctx.state.reports.push(report);
      renderHistory();
      return (
        `<p>Report <code>${escapeHtml(report.report_id)}</code> (${escapeHtml(report.audience)}):</p>` +
        `<article class="report-view">${renderMarkdown(report.markdown)}</article>`
      );
    });
  });
}

async function downloadReport(ctx: PanelContext, reportId: string): Promise<void> {
  const bytes = await ctx.api.downloadReport(reportId);
  const blob = new Blob([bytes.buffer as ArrayBuffer], { type: "text/markdown" });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = `${reportId}.md`;
  link.click();
  URL.revokeObjectURL(link.href);
}
