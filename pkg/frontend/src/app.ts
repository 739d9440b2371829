// Console bootstrap: navigation, service-health banner, panel wiring.

import { ApiClient, ServiceDownError } from "./api.js";
import { initialState, PANELS, type PanelName } from "./state.js";
import { bindInboxPanel, renderInboxPanel } from "./panels/inbox.js";
import { bindModbusPanel, renderModbusForm } from "./panels/modbus.js";
import { bindOpcUaPanel, renderOpcUaForm } from "./panels/opcua.js";
import { bindReportPanel, renderReportPanel } from "./panels/report.js";
import { bindScanPanel, renderScanForm } from "./panels/scan.js";
import type { PanelContext } from "./panels/common.js";
import { escapeHtml } from "./render.js";

const PANEL_TITLES: Record<PanelName, string> = {
  scan: "Scan",
  modbus: "Modbus",
  opcua: "OPC UA",
  inbox: "Inbox",
  report: "Report",
};

const PANEL_RENDERERS: Record<PanelName, () => string> = {
  scan: renderScanForm,
  modbus: renderModbusForm,
  opcua: renderOpcUaForm,
  inbox: renderInboxPanel,
  report: renderReportPanel,
};

const PANEL_BINDERS: Record<PanelName, (ctx: PanelContext) => void> = {
  scan: bindScanPanel,
  modbus: bindModbusPanel,
  opcua: bindOpcUaPanel,
  inbox: bindInboxPanel,
  report: bindReportPanel,
};

export function mountConsole(container: HTMLElement, api = new ApiClient()): void {
  const state = initialState();

  container.innerHTML = `
    <header>
      <h1>ICS Assessment Console</h1>
      <nav>${PANELS.map((p) =>
        `<button class="nav-tab" data-panel="${p}">${PANEL_TITLES[p]}</button>`,
      ).join("")}</nav>
      <span class="llm-mode" title="report generation mode"></span>
    </header>
    <div class="service-banner" hidden>
      Service unreachable. <button class="retry-health">Retry</button>
    </div>
    <main>${PANELS.map((p) =>
      `<section class="panel" data-panel="${p}" hidden></section>`,
    ).join("")}</main>`;

  const banner = container.querySelector<HTMLElement>(".service-banner")!;
  const llmMode = container.querySelector<HTMLElement>(".llm-mode")!;

  const checkHealth = async () => {
    try {
      const health = await api.health();
      state.health = health;
      state.serviceDown = false;
      banner.hidden = true;
      llmMode.textContent = `LLM: ${health.llm_mode} · v${escapeHtml(health.version)}`;
    } catch (error) {
      if (error instanceof ServiceDownError) {
        state.serviceDown = true;
        banner.hidden = false;
      }
    }
  };
  container.querySelector(".retry-health")!.addEventListener("click", () => {
    void checkHealth();
  });
  document.addEventListener("icskit:service-down", () => {
    banner.hidden = false;
  });

  for (const name of PANELS) {
    const section = container.querySelector<HTMLElement>(
      `section[data-panel="${name}"]`,
    )!;
    section.innerHTML = `<h2>${PANEL_TITLES[name]}</h2>` + PANEL_RENDERERS[name]();
    const ctx: PanelContext = {
      api,
      state,
      root: section,
      confirm: (message) => window.confirm(message),
      refreshInbox: async () => {},
    };
    PANEL_BINDERS[name](ctx);
  }

  const show = (name: PanelName) => {
    container.querySelectorAll<HTMLElement>("section.panel").forEach((section) => {
      section.hidden = section.dataset.panel !== name;
    });
    container.querySelectorAll<HTMLButtonElement>(".nav-tab").forEach((tab) => {
      tab.classList.toggle("active", tab.dataset.panel === name);
    });
  };
  container.querySelectorAll<HTMLButtonElement>(".nav-tab").forEach((tab) => {
    tab.addEventListener("click", () => show(tab.dataset.panel as PanelName));
  });

  show("scan");
  void checkHealth();
}
