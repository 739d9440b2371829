// Console state. Every field is written from an API response and from
// nowhere else; the UI keeps no engagement truth of its own.

import type { HealthInfo, InboxItem, ReportResult, ToolResponse } from "./api.js";

export interface ConsoleState {
  health: HealthInfo | null;
  serviceDown: boolean;
  lastResults: Partial<Record<PanelName, ToolResponse>>;
  inbox: InboxItem[];
  reports: ReportResult[];
}

export type PanelName = "scan" | "modbus" | "opcua" | "inbox" | "report";

export const PANELS: PanelName[] = ["scan", "modbus", "opcua", "inbox", "report"];

export function initialState(): ConsoleState {
  return {
    health: null,
    serviceDown: false,
    lastResults: {},
    inbox: [],
    reports: [],
  };
}
