import { describe, expect, it } from "vitest";

import type { BrowseNode } from "../src/api.js";
import {
  escapeHtml,
  renderBrowseTree,
  renderFindings,
  renderInbox,
  renderMarkdown,
  renderRegisterMap,
  renderTable,
  renderUnitScan,
} from "../src/render.js";

describe("escaping", () => {
  it("neutralizes markup in interpolated content", () => {
    const html = renderTable(["<th>"], [["<script>alert(1)</script>"]]);
    expect(html).not.toContain("<script>alert");
    expect(html).toContain("&lt;script&gt;");
  });

  it("escapes quotes and ampersands", () => {
    expect(escapeHtml(`a & "b" 'c'`)).toBe("a &amp; &quot;b&quot; &#39;c&#39;");
  });
});

describe("result tables", () => {
  it("renders scan findings with service tags", () => {
    const html = renderFindings([
      { host: "127.0.0.1", port: 5002, state: "open", service_tag: "modbus",
        evidence: "exception", timestamp: "t" },
    ]);
    expect(html).toContain("<td>5002</td>");
    expect(html).toContain("<td>modbus</td>");
  });

  it("renders unit-scan rows sorted numerically with data types", () => {
    const html = renderUnitScan({
      "10": { active: true, kinds: ["coil", "holding_register"] },
      "5": { active: true, kinds: ["discrete_input"] },
    });
    expect(html.indexOf("<td>5</td>")).toBeLessThan(html.indexOf("<td>10</td>"));
    expect(html).toContain("coil, holding_register");
  });

  it("caps register maps and reports the cap", () => {
    const values = Object.fromEntries(
      Array.from({ length: 400 }, (_, i) => [String(i), i]),
    );
    const html = renderRegisterMap(values, 100);
    expect(html).toContain("first 100 of 400");
  });

  it("renders the inbox with category and timestamp columns", () => {
    const html = renderInbox([
      { id: "ev-1", t: "2026-01-01T00:00:00Z", category: "modbus",
        params: { action: "write" }, output: {} },
    ]);
    expect(html).toContain("<th>Category</th>");
    expect(html).toContain("<th>Timestamp</th>");
    expect(html).toContain("<td>write</td>");
  });
});

describe("browse tree", () => {
  const tree: BrowseNode = {
    node_id: "ns=0;i=85", browse_name: "Objects", node_class: "OBJECT",
    namespace_index: 0,
    children: [
      {
        node_id: "ns=2;i=1", browse_name: "Factory", node_class: "OBJECT",
        namespace_index: 2,
        children: [
          { node_id: "ns=2;i=30", browse_name: "Uptime",
            node_class: "VARIABLE", namespace_index: 2, children: [] },
        ],
      },
    ],
  };

  it("produces a collapsible nested list", () => {
    const html = renderBrowseTree(tree);
    expect(html).toContain("<details open>");
    expect(html).toContain("Factory");
    expect(html).toContain("ns=2;i=30");
    // leaf nodes are plain items
    expect(html).toContain("<li><span class=\"tree-name\">Uptime</span>");
  });
});

describe("markdown rendering", () => {
  const markdown = [
    "---",
    "title: Assessment",
    "audience: technical",
    "---",
    "",
    "# Assessment",
    "",
    "## Consolidated Mitigations",
    "",
    "- **M0930 Network Segmentation**: segment the OT network",
    "",
    "| Port | Service |",
    "| --- | --- |",
    "| 5002 | modbus |",
  ].join("\n");

  it("renders front matter, headings, lists, and tables", () => {
    const html = renderMarkdown(markdown);
    expect(html).toContain('class="report-meta"');
    expect(html).toContain("<h1>Assessment</h1>");
    expect(html).toContain("<h2>Consolidated Mitigations</h2>");
    expect(html).toContain("<strong>M0930 Network Segmentation</strong>");
    expect(html).toContain("<td>5002</td>");
    expect(html).not.toContain("| --- |");
  });

  it("escapes html inside markdown", () => {
    expect(renderMarkdown("# <img src=x>")).toContain("&lt;img");
  });
});
