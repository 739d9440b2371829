// Client-side form validation mirroring the server's request schemas.
// A request is only sent when the corresponding validator returns no
// errors, so malformed input never leaves the browser.

export interface FieldError {
  field: string;
  message: string;
}

const HOST_TOKEN = /^[A-Za-z0-9]([A-Za-z0-9.\-/]*[A-Za-z0-9])?$/;
const NODE_ID = /^(ns=\d+;)?(i=\d+|s=.+)$/;

function intIn(value: string, lo: number, hi: number): number | null {
  if (!/^-?\d+$/.test(value.trim())) return null;
  const parsed = parseInt(value.trim(), 10);
  return parsed >= lo && parsed <= hi ? parsed : null;
}

export function validateHosts(hosts: string): FieldError[] {
  if (!hosts.trim()) return [{ field: "hosts", message: "host spec is required" }];
  const bad = hosts
    .split(",")
    .map((t) => t.trim())
    .filter((t) => t.length > 0 && !HOST_TOKEN.test(t));
  return bad.length
    ? [{ field: "hosts", message: `not a host, CIDR block, or hostname: ${bad[0]}` }]
    : [];
}

export function validatePorts(ports: string): FieldError[] {
  if (!ports.trim()) return [{ field: "ports", message: "port spec is required" }];
  for (const token of ports.split(",").map((t) => t.trim()).filter(Boolean)) {
    const range = token.split("-");
    if (range.length > 2) {
      return [{ field: "ports", message: `bad port range: ${token}` }];
    }
    for (const part of range) {
      if (intIn(part, 1, 65535) === null) {
        return [{ field: "ports", message: `port out of range [1, 65535]: ${part}` }];
      }
    }
    if (range.length === 2 && parseInt(range[0], 10) > parseInt(range[1], 10)) {
      return [{ field: "ports", message: `reversed port range: ${token}` }];
    }
  }
  return [];
}

export interface ModbusTargetForm {
  host: string;
  port: string;
  unit: string;
  timeout: string;
  retries: string;
}

export function validateModbusTarget(form: ModbusTargetForm): FieldError[] {
  const errors: FieldError[] = [];
  if (!form.host.trim()) errors.push({ field: "host", message: "host is required" });
  if (intIn(form.port, 1, 65535) === null)
    errors.push({ field: "port", message: "port must be 1-65535" });
  if (intIn(form.unit, 0, 255) === null)
    errors.push({ field: "unit", message: "unit id must be 0-255" });
  if (intIn(form.timeout, 1, 600000) === null)
    errors.push({ field: "timeout", message: "timeout (ms) must be positive" });
  if (intIn(form.retries, 0, 100) === null)
    errors.push({ field: "retries", message: "retries must be 0 or more" });
  return errors;
}

export function validateAddress(address: string): FieldError[] {
  return intIn(address, 0, 65535) === null
    ? [{ field: "address", message: "address must be 0-65535" }]
    : [];
}

export function validateCount(count: string): FieldError[] {
  return intIn(count, 1, 65536) === null
    ? [{ field: "count", message: "count must be a positive integer" }]
    : [];
}

export function validateRange(start: string, end: string): FieldError[] {
  const errors: FieldError[] = [];
  const lo = intIn(start, 0, 65535);
  const hi = intIn(end, 0, 65535);
  if (lo === null) errors.push({ field: "start", message: "start must be 0-65535" });
  if (hi === null) errors.push({ field: "end", message: "end must be 0-65535" });
  if (lo !== null && hi !== null && lo > hi)
    errors.push({ field: "end", message: "end must not be below start" });
  return errors;
}

export function validateUnitIdRange(range: string): FieldError[] {
  const m = range.trim().match(/^(\d+)\s*-\s*(\d+)$/);
  if (!m) return [{ field: "range", message: "use start-end, e.g. 1-15" }];
  const lo = parseInt(m[1], 10);
  const hi = parseInt(m[2], 10);
  if (lo > 255 || hi > 255 || lo > hi)
    return [{ field: "range", message: "unit ids must be 0-255, ascending" }];
  return [];
}

export function parseWriteValues(raw: string, bitType: boolean): { values?: (number | boolean)[]; errors: FieldError[] } {
  const tokens = raw.split(",").map((t) => t.trim()).filter(Boolean);
  if (!tokens.length) {
    return { errors: [{ field: "values", message: "at least one value is required" }] };
  }
  const values: (number | boolean)[] = [];
  for (const token of tokens) {
    if (!/^\d+$/.test(token)) {
      return { errors: [{ field: "values", message: `not a number: ${token}` }] };
    }
    const n = parseInt(token, 10);
    if (bitType) {
      if (n > 1) return { errors: [{ field: "values", message: `bit values are 0 or 1: ${token}` }] };
      values.push(n === 1);
    } else {
      if (n > 65535) return { errors: [{ field: "values", message: `register values are 0-65535: ${token}` }] };
      values.push(n);
    }
  }
  return { values, errors: [] };
}

export function validateEndpointUrl(url: string): FieldError[] {
  if (!url.trim()) return [{ field: "url", message: "endpoint URL is required" }];
  if (!url.startsWith("opc.tcp://"))
    return [{ field: "url", message: "URL scheme must be opc.tcp://" }];
  return [];
}

export function validateNodeId(nodeId: string): FieldError[] {
  return NODE_ID.test(nodeId.trim())
    ? []
    : [{ field: "node", message: 'node id must look like "ns=2;i=20"' }];
}

export function parseTypedValue(
  type: string,
  raw: string,
): { value?: { type: string; value: unknown }; errors: FieldError[] } {
  const trimmed = raw.trim();
  switch (type) {
    case "INT32": {
      if (!/^-?\d+$/.test(trimmed))
        return { errors: [{ field: "value", message: `not an integer: ${raw}` }] };
      const n = parseInt(trimmed, 10);
      if (n < -2147483648 || n > 2147483647)
        return { errors: [{ field: "value", message: "outside Int32 range" }] };
      return { value: { type, value: n }, errors: [] };
    }
    case "DOUBLE": {
      const n = Number(trimmed);
      if (trimmed === "" || Number.isNaN(n))
        return { errors: [{ field: "value", message: `not a number: ${raw}` }] };
      return { value: { type, value: n }, errors: [] };
    }
    case "BOOLEAN": {
      if (trimmed === "true" || trimmed === "1") return { value: { type, value: true }, errors: [] };
      if (trimmed === "false" || trimmed === "0") return { value: { type, value: false }, errors: [] };
      return { errors: [{ field: "value", message: "boolean values are true/false" }] };
    }
    case "STRING":
      return { value: { type, value: raw }, errors: [] };
    default:
      return { errors: [{ field: "value", message: `unsupported type ${type}` }] };
  }
}

export function validateReportForm(audience: string, title: string): FieldError[] {
  const errors: FieldError[] = [];
  if (audience !== "executive" && audience !== "technical")
    errors.push({ field: "audience", message: "audience is executive or technical" });
  if (!title.trim()) errors.push({ field: "title", message: "title is required" });
  return errors;
}
