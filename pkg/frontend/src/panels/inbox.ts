// Inbox panel: listing with category filter, and the (confirmed) clear.

import { renderInbox } from "../render.js";
import { field, runAction, type PanelContext } from "./common.js";

export function renderInboxPanel(): string {
  return `
  <div class="tool-form" data-panel="inbox">
    <label>Category filter
      <select name="category">
        <option value="">all</option>
        <option value="scan">scan</option>
        <option value="modbus">modbus</option>
        <option value="opcua">opcua</option>
      </select>
    </label>
    <button data-action="refresh">Refresh</button>
    <button data-action="clear" class="danger">Clear inbox</button>
    <span class="busy-indicator" hidden>loading…</span>
  </div>
  <div class="panel-errors"></div>
  <div class="panel-result"></div>`;
}

export function bindInboxPanel(ctx: PanelContext): void {
  const root = ctx.root;

  const refresh = () =>
    runAction(ctx, root, async () => {
      const category = field(root, "category") || undefined;
      const listing = await ctx.api.inboxList(category);
      ctx.state.inbox = listing.items;
      return `<p>${listing.count} item(s).</p>` + renderInbox(listing.items);
    });

  root.querySelector('[data-action="refresh"]')!.addEventListener("click", () => {
    void refresh();
  });
  root.querySelector('[name="category"]')!.addEventListener("change", () => {
    void refresh();
  });
  root.querySelector('[data-action="clear"]')!.addEventListener("click", () => {
    if (!ctx.confirm("Delete every stored evidence item? This cannot be undone.")) return;
    void runAction(ctx, root, async () => {
      await ctx.api.inboxClear();
      ctx.state.inbox = [];
      return `<p class="muted">Inbox cleared.</p>`;
    });
  });

  ctx.refreshInbox = refresh;
}
