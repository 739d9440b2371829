// HTML renderers. Pure string builders so they are testable without a
// DOM; all interpolated content is escaped.

import type { BrowseNode, InboxItem, ScanFinding, VariableProfile } from "./api.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function renderTable(headers: string[], rows: (string | number | boolean | null)[][]): string {
  const head = headers.map((h) => `<th>${escapeHtml(h)}</th>`).join("");
  const body = rows
    .map((row) => `<tr>${row.map((c) => `<td>${escapeHtml(cellText(c))}</td>`).join("")}</tr>`)
    .join("");
  return `<table class="result-table"><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`;
}

function cellText(cell: string | number | boolean | null): string {
  if (cell === null) return "–";
  if (typeof cell === "boolean") return cell ? "true" : "false";
  return String(cell);
}

export function renderFindings(findings: ScanFinding[]): string {
  if (!findings.length) return `<p class="muted">No open ports found.</p>`;
  return renderTable(
    ["Host", "Port", "State", "Service", "Evidence"],
    findings.map((f) => [f.host, f.port, f.state, f.service_tag, f.evidence]),
  );
}

export function renderUnitScan(units: Record<string, { active: boolean; kinds: string[] }>): string {
  const rows = Object.entries(units)
    .sort(([a], [b]) => Number(a) - Number(b))
    .map(([unit, record]) => [unit, record.active, record.kinds.join(", ")]);
  if (!rows.length) return `<p class="muted">No active unit ids.</p>`;
  return renderTable(["Unit id", "Active", "Supported data types"], rows as never);
}

export function renderRegisterMap(values: Record<string, unknown>, limit = 200): string {
  const entries = Object.entries(values)
    .sort(([a], [b]) => Number(a) - Number(b))
    .slice(0, limit);
  if (!entries.length) return `<p class="muted">No readable addresses.</p>`;
  const table = renderTable(["Address", "Value"], entries.map(([a, v]) => [a, String(v)]));
  const note = Object.keys(values).length > limit
    ? `<p class="muted">Showing the first ${limit} of ${Object.keys(values).length} addresses.</p>`
    : "";
  return table + note;
}

export function renderBrowseTree(node: BrowseNode): string {
  const label =
    `<span class="tree-name">${escapeHtml(node.browse_name)}</span> ` +
    `<span class="tree-id">${escapeHtml(node.node_id)}</span> ` +
    `<span class="tree-class">${escapeHtml(node.node_class.toLowerCase())}</span>`;
  if (!node.children.length) return `<li>${label}</li>`;
  const children = node.children.map(renderBrowseTree).join("");
  return `<li><details open><summary>${label}</summary><ul class="tree">${children}</ul></details></li>`;
}

export function renderVariables(variables: VariableProfile[]): string {
  if (!variables.length) return `<p class="muted">No variables in this namespace.</p>`;
  return renderTable(
    ["Node id", "Name", "Type", "Access", "Value"],
    variables.map((v) => [
      v.node_id,
      v.display_name,
      v.data_type ?? "?",
      `${v.readable ? "r" : ""}${v.writable ? "w" : ""}`,
      v.value === null ? null : String(v.value.value),
    ]),
  );
}

export function renderInbox(items: InboxItem[]): string {
  if (!items.length) return `<p class="muted">The evidence inbox is empty.</p>`;
  return renderTable(
    ["Id", "Category", "Timestamp", "Action"],
    items.map((i) => [i.id, i.category, i.t, String(i.params["action"] ?? "–")]),
  );
}

// Minimal Markdown-to-HTML for report display: headings, lists, tables,
// bold, code spans, and front-matter shown as a metadata block.
export function renderMarkdown(markdown: string): string {
  let body = markdown;
  let meta = "";
  if (body.startsWith("---\n")) {
    const end = body.indexOf("\n---\n", 4);
    if (end > 0) {
      const header = body.slice(4, end);
      meta =
        `<div class="report-meta">` +
        header
          .split("\n")
          .map((line) => `<div>${inline(line)}</div>`)
          .join("") +
        `</div>`;
      body = body.slice(end + 5);
    }
  }
  const lines = body.split("\n");
  const out: string[] = [meta];
  let listOpen = false;
  let tableOpen = false;
  const closeBlocks = () => {
    if (listOpen) {
      out.push("</ul>");
      listOpen = false;
    }
    if (tableOpen) {
      out.push("</table>");
      tableOpen = false;
    }
  };
  for (const line of lines) {
    const heading = line.match(/^(#{1,4})\s+(.*)$/);
    if (heading) {
      closeBlocks();
      const level = heading[1].length;
      out.push(`<h${level}>${inline(heading[2])}</h${level}>`);
      continue;
    }
    if (/^\s*[-*]\s+/.test(line)) {
      if (tableOpen) {
        out.push("</table>");
        tableOpen = false;
      }
      if (!listOpen) {
        out.push('<ul class="md-list">');
        listOpen = true;
      }
      out.push(`<li>${inline(line.replace(/^\s*[-*]\s+/, ""))}</li>`);
      continue;
    }
    if (/^\|.*\|\s*$/.test(line)) {
      if (/^\|[\s\-|]+\|\s*$/.test(line)) continue; // separator row
      if (!tableOpen) {
        out.push('<table class="result-table">');
        tableOpen = true;
      }
      const cells = line.split("|").slice(1, -1).map((c) => c.trim());
      out.push(`<tr>${cells.map((c) => `<td>${inline(c)}</td>`).join("")}</tr>`);
      continue;
    }
    closeBlocks();
    if (line.trim()) out.push(`<p>${inline(line)}</p>`);
  }
  closeBlocks();
  return out.join("\n");
}

function inline(text: string): string {
  return escapeHtml(text)
    .replace(/\*\*([^*]+)\*\*/g, "<strong>$1</strong>")
    .replace(/`([^`]+)`/g, "<code>$1</code>");
}

export function renderFieldErrors(errors: { field: string; message: string }[]): string {
  return errors
    .map((e) => `<div class="field-error" data-field="${escapeHtml(e.field)}">${escapeHtml(e.field)}: ${escapeHtml(e.message)}</div>`)
    .join("");
}

export function renderErrorNotice(kind: string, message: string): string {
  return `<div class="error-notice"><strong>${escapeHtml(kind)}</strong> ${escapeHtml(message)}</div>`;
}

export function renderEvidenceLink(evidenceId: string | null): string {
  if (!evidenceId) return "";
  return `<p class="evidence-link">Stored as evidence item <a href="#inbox" data-evidence="${escapeHtml(evidenceId)}"><code>${escapeHtml(evidenceId)}</code></a></p>`;
}
