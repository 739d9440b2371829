// OPC UA panel: endpoint metadata, namespace browse tree, variable
// enumeration, and node read/write.

import type { BrowseNode, VariableProfile } from "../api.js";
import { renderBrowseTree, renderTable, renderVariables } from "../render.js";
import {
  parseTypedValue,
  validateEndpointUrl,
  validateNodeId,
  type FieldError,
} from "../validation.js";
import {
  checkbox,
  evidenceFooter,
  field,
  runAction,
  showFieldErrors,
  toolErrorNotice,
  type PanelContext,
} from "./common.js";

export function renderOpcUaForm(): string {
  return `
  <form class="tool-form" data-panel="opcua">
    <fieldset>
      <legend>Connection</legend>
      <label>Endpoint URL <input name="url" value="opc.tcp://127.0.0.1:4840/server/" size="36"></label>
      <label>Username <input name="user" placeholder="(anonymous)" size="10"></label>
      <label>Password <input name="password" type="password" size="10"></label>
      <label class="check"><input type="checkbox" name="store_evidence"> Store as evidence</label>
    </fieldset>
    <fieldset>
      <legend>Operation</legend>
      <label>Action
        <select name="operation">
          <option value="endpoints">list endpoints</option>
          <option value="browse">browse</option>
          <option value="enumerate">enumerate variables</option>
          <option value="read">read node</option>
          <option value="write">write node</option>
        </select>
      </label>
      <label>Depth <input name="depth" value="3" size="4"></label>
      <label>Max nodes <input name="max_nodes" value="500" size="6"></label>
      <label>Namespace <input name="namespace" value="2" size="4"></label>
      <label>Node id <input name="node" placeholder="ns=2;i=20" size="12"></label>
      <label>Value type
        <select name="value_type">
          <option>INT32</option><option>DOUBLE</option>
          <option>BOOLEAN</option><option>STRING</option>
        </select>
      </label>
      <label>Value <input name="value" size="10"></label>
      <label class="check"><input type="checkbox" name="read_back" checked> Read back after write</label>
    </fieldset>
    <button type="submit" data-action="opcua">Execute</button>
    <span class="busy-indicator" hidden>talking to server…</span>
  </form>
  <div class="panel-errors"></div>
  <div class="panel-result"></div>`;
}

export function bindOpcUaPanel(ctx: PanelContext): void {
  const root = ctx.root;
  root.querySelector("form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    const operation = field(root, "operation");
    const url = field(root, "url");
    const errors: FieldError[] = [...validateEndpointUrl(url)];
    const common: Record<string, unknown> = {
      endpoint_url: url,
      store_evidence: checkbox(root, "store_evidence"),
    };
    const user = field(root, "user").trim();
    if (user) common.auth = { username: user, password: field(root, "password") };

    let run: (() => Promise<string>) | null = null;

    if (operation === "endpoints") {
      if (showFieldErrors(root, errors)) return;
      run = async () => {
        const response = await ctx.api.opcua("endpoints", common);
        ctx.state.lastResults.opcua = response;
        if (response.status !== "ok") return toolErrorNotice(response.result);
        const endpoints = response.result.endpoints as {
          url: string; security_policy: string; security_mode: string;
          token_types: string[];
        }[];
        return renderTable(
          ["URL", "Policy", "Mode", "Token types"],
          endpoints.map((e) => [e.url, e.security_policy, e.security_mode,
                                e.token_types.join(", ")]),
        ) + evidenceFooter(response.evidence_id);
      };
    } else if (operation === "browse") {
      if (showFieldErrors(root, errors)) return;
      run = async () => {
        const response = await ctx.api.opcua("browse", {
          ...common,
          depth: parseInt(field(root, "depth"), 10) || 3,
          max_nodes: parseInt(field(root, "max_nodes"), 10) || 500,
        });
        ctx.state.lastResults.opcua = response;
        if (response.status !== "ok") return toolErrorNotice(response.result);
        const tree = response.result.tree as BrowseNode;
        const note = response.result.truncated
          ? `<p class="muted">Traversal truncated at the node budget.</p>` : "";
        return `<ul class="tree">${renderBrowseTree(tree)}</ul>${note}` +
          evidenceFooter(response.evidence_id);
      };
    } else if (operation === "enumerate") {
      if (showFieldErrors(root, errors)) return;
      run = async () => {
        const response = await ctx.api.opcua("enumerate", {
          ...common,
          namespace_index: parseInt(field(root, "namespace"), 10) || 0,
        });
        ctx.state.lastResults.opcua = response;
        if (response.status !== "ok") return toolErrorNotice(response.result);
        return renderVariables(response.result.variables as VariableProfile[]) +
          evidenceFooter(response.evidence_id);
      };
    } else if (operation === "read") {
      errors.push(...validateNodeId(field(root, "node")));
      if (showFieldErrors(root, errors)) return;
      run = async () => {
        const response = await ctx.api.opcua("read", {
          ...common,
          node_id: field(root, "node").trim(),
        });
        ctx.state.lastResults.opcua = response;
        if (response.status !== "ok") return toolErrorNotice(response.result);
        const value = response.result.value as { type: string; value: unknown };
        return renderTable(["Node", "Type", "Value"],
                           [[field(root, "node"), value.type, String(value.value)]]) +
          evidenceFooter(response.evidence_id);
      };
    } else {
      errors.push(...validateNodeId(field(root, "node")));
      const parsed = parseTypedValue(field(root, "value_type"), field(root, "value"));
      errors.push(...parsed.errors);
      if (showFieldErrors(root, errors)) return;
      if (!ctx.confirm(`Write ${field(root, "value_type")} ${field(root, "value")} to ${field(root, "node")} at ${url}?`)) {
        return;
      }
      run = async () => {
        const response = await ctx.api.opcua("write", {
          ...common,
          node_id: field(root, "node").trim(),
          value: parsed.value,
          read_back: checkbox(root, "read_back"),
        });
        ctx.state.lastResults.opcua = response;
        if (response.status !== "ok") return toolErrorNotice(response.result);
        const rows: string[][] = [["write", "accepted"]];
        if (response.result.readback !== undefined) {
          const readback = response.result.readback as { type: string; value: unknown };
          rows.push(["readback", `${readback.type} ${String(readback.value)}`]);
        }
        return renderTable(["Field", "Value"], rows) +
          evidenceFooter(response.evidence_id);
      };
    }

    if (run) void runAction(ctx, root, run);
  });
}
