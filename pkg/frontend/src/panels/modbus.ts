// Modbus panel: connection parameters plus one sub-form per operation.

import { renderRegisterMap, renderTable, renderUnitScan } from "../render.js";
import {
  parseWriteValues,
  validateAddress,
  validateCount,
  validateModbusTarget,
  validateRange,
  validateUnitIdRange,
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

const DATA_TYPES = ["coil", "discrete_input", "holding_register", "input_register"];

export function renderModbusForm(): string {
  const typeOptions = DATA_TYPES
    .map((t) => `<option value="${t}"${t === "holding_register" ? " selected" : ""}>${t}</option>`)
    .join("");
  return `
  <form class="tool-form" data-panel="modbus">
    <fieldset>
      <legend>Connection</legend>
      <label>Host <input name="host" value="127.0.0.1"></label>
      <label>Port <input name="port" value="502" size="6"></label>
      <label>Unit id <input name="unit" value="1" size="4"></label>
      <label>Timeout (ms) <input name="timeout" value="1000" size="6"></label>
      <label>Retries <input name="retries" value="1" size="4"></label>
      <label class="check"><input type="checkbox" name="store_evidence"> Store as evidence</label>
    </fieldset>
    <fieldset>
      <legend>Operation</legend>
      <label>Action
        <select name="operation">
          <option value="read">read</option>
          <option value="write">write</option>
          <option value="enumerate">enumerate</option>
          <option value="scan-units">scan unit ids</option>
          <option value="scan-range">scan register range</option>
        </select>
      </label>
      <label>Data type <select name="dtype">${typeOptions}</select></label>
      <label>Address <input name="address" value="0" size="6"></label>
      <label>Count <input name="count" value="1" size="6"></label>
      <label>Start <input name="start" value="0" size="6"></label>
      <label>End <input name="end" value="999" size="6"></label>
      <label>Chunk size <input name="chunk_size" value="1000" size="6"></label>
      <label>Unit id range <input name="range" value="1-15" size="8"></label>
      <label>Values <input name="values" placeholder="500 or 1,0,1"></label>
      <label class="check"><input type="checkbox" name="read_back" checked> Read back after write</label>
    </fieldset>
    <button type="submit" data-action="modbus">Execute</button>
    <span class="busy-indicator" hidden>talking to device…</span>
  </form>
  <div class="panel-errors"></div>
  <div class="panel-result"></div>`;
}

export function bindModbusPanel(ctx: PanelContext): void {
  const root = ctx.root;
  root.querySelector("form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    const operation = field(root, "operation");
    const target = {
      host: field(root, "host"),
      port: field(root, "port"),
      unit: field(root, "unit"),
      timeout: field(root, "timeout"),
      retries: field(root, "retries"),
    };
    const dtype = field(root, "dtype");
    const errors: FieldError[] = [...validateModbusTarget(target)];
    const common = {
      host: target.host,
      port: parseInt(target.port, 10),
      unit_id: parseInt(target.unit, 10),
      timeout_ms: parseInt(target.timeout, 10),
      retries: parseInt(target.retries, 10),
      store_evidence: checkbox(root, "store_evidence"),
    };

    let run: (() => Promise<string>) | null = null;

    if (operation === "read") {
      errors.push(...validateAddress(field(root, "address")),
                  ...validateCount(field(root, "count")));
      if (showFieldErrors(root, errors)) return;
      run = async () => {
        const response = await ctx.api.modbus("read", {
          ...common,
          type: dtype,
          address: parseInt(field(root, "address"), 10),
          count: parseInt(field(root, "count"), 10),
        });
        ctx.state.lastResults.modbus = response;
        if (response.status !== "ok") return toolErrorNotice(response.result);
        const values = response.result.values as (number | boolean)[];
        const base = parseInt(field(root, "address"), 10);
        return renderTable(["Address", "Value"],
                           values.map((v, i) => [base + i, v])) +
          evidenceFooter(response.evidence_id);
      };
    } else if (operation === "write") {
      errors.push(...validateAddress(field(root, "address")));
      const bitType = dtype === "coil" || dtype === "discrete_input";
      const parsed = parseWriteValues(field(root, "values"), bitType);
      errors.push(...parsed.errors);
      if (showFieldErrors(root, errors)) return;
      if (!ctx.confirm(`Write ${field(root, "values")} to ${dtype} @${field(root, "address")} on ${target.host}:${target.port} (unit ${target.unit})?`)) {
        return;
      }
      run = async () => {
        const response = await ctx.api.modbus("write", {
          ...common,
          type: dtype,
          address: parseInt(field(root, "address"), 10),
          values: parsed.values,
          read_back: checkbox(root, "read_back"),
        });
        ctx.state.lastResults.modbus = response;
        if (response.status !== "ok") return toolErrorNotice(response.result);
        const rows: (string | number)[][] = [
          ["acknowledged address", String(response.result.address)],
          ["count", String(response.result.count)],
        ];
        if (response.result.before !== undefined)
          rows.push(["before", JSON.stringify(response.result.before)]);
        if (response.result.readback !== undefined)
          rows.push(["readback", JSON.stringify(response.result.readback)]);
        return renderTable(["Field", "Value"], rows) + evidenceFooter(response.evidence_id);
      };
    } else if (operation === "enumerate") {
      errors.push(...validateRange(field(root, "start"), field(root, "end")));
      if (showFieldErrors(root, errors)) return;
      run = async () => {
        const response = await ctx.api.modbus("enumerate", {
          ...common,
          type: dtype,
          start: parseInt(field(root, "start"), 10),
          end: parseInt(field(root, "end"), 10),
        });
        ctx.state.lastResults.modbus = response;
        if (response.status !== "ok") return toolErrorNotice(response.result);
        return (
          `<p>${String(response.result.present)} readable, ` +
          `${String(response.result.absent)} absent.</p>` +
          renderRegisterMap(response.result.values as Record<string, unknown>) +
          evidenceFooter(response.evidence_id)
        );
      };
    } else if (operation === "scan-units") {
      errors.push(...validateUnitIdRange(field(root, "range")));
      if (showFieldErrors(root, errors)) return;
      const m = field(root, "range").match(/^(\d+)\s*-\s*(\d+)$/)!;
      run = async () => {
        const response = await ctx.api.modbus("scan-units", {
          ...common,
          start: parseInt(m[1], 10),
          end: parseInt(m[2], 10),
        });
        ctx.state.lastResults.modbus = response;
        if (response.status !== "ok") return toolErrorNotice(response.result);
        return renderUnitScan(
          response.result.units as Record<string, { active: boolean; kinds: string[] }>,
        ) + evidenceFooter(response.evidence_id);
      };
    } else {
      errors.push(...validateRange(field(root, "start"), field(root, "end")));
      if (showFieldErrors(root, errors)) return;
      run = async () => {
        const response = await ctx.api.modbus("scan-range", {
          ...common,
          type: dtype,
          start: parseInt(field(root, "start"), 10),
          end: parseInt(field(root, "end"), 10),
          chunk_size: parseInt(field(root, "chunk_size"), 10) || 1000,
        });
        ctx.state.lastResults.modbus = response;
        if (response.status !== "ok") return toolErrorNotice(response.result);
        const chunks = response.result.chunks as {
          start_address: number; requested_count: number; status: string;
        }[];
        return renderTable(
          ["Start", "Count", "Status"],
          chunks.map((c) => [c.start_address, c.requested_count, c.status]),
        ) + evidenceFooter(response.evidence_id);
      };
    }

    if (run) void runAction(ctx, root, run);
  });
}
