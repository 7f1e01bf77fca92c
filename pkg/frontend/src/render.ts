/** Pure HTML rendering of the panel state.
 *
 * Returns a markup string from state alone so the view is testable without a
 * browser; the app shell swaps it into the page and handles events by
 * delegation on `data-action` attributes.
 */

import type { PanelState } from "./flows.js";
import type { CardJson, ValidationIssue } from "./types.js";
import { isGroup } from "./types.js";
import type { CatalogView, ValueWidget } from "./widgets.js";
import { operatorsForTag, valueWidgetFor } from "./widgets.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function attr(value: string): string {
  return `"${escapeHtml(value)}"`;
}

function option(value: string, selected: boolean): string {
  return `<option value=${attr(value)}${selected ? " selected" : ""}>${escapeHtml(value)}</option>`;
}

function issueBadges(issues: ValidationIssue[] | undefined): string {
  if (!issues || issues.length === 0) return "";
  const items = issues
    .map((issue) => `<span class="badge" title=${attr(issue.message)}>${escapeHtml(issue.code)}</span>`)
    .join("");
  return `<span class="badges">${items}</span>`;
}

function valueInput(nodeId: string, value: string, widget: ValueWidget): string {
  const common = `data-action="set-value" data-node=${attr(nodeId)}`;
  switch (widget.kind) {
    case "select": {
      const current = widget.options.includes(value) ? "" : option(value, true);
      const options = widget.options.map((v) => option(v, v === value)).join("");
      return `<select class="value" ${common}>${current}${options}</select>`;
    }
    case "number":
      return `<input class="value" type="text" inputmode="decimal" placeholder="0" ${common} value=${attr(value)}>`;
    case "number-pair":
      return `<input class="value" type="text" placeholder="lo,hi" ${common} value=${attr(value)}>`;
    case "text":
      return `<input class="value" type="text" ${common} value=${attr(value)}>`;
  }
}

function renderNode(
  card: CardJson,
  catalog: CatalogView | null,
  issues: Map<string, ValidationIssue[]>,
  isRoot: boolean,
): string {
  const badges = issueBadges(issues.get(card.node_id));
  if (isGroup(card)) {
    const combinator = ["AND", "OR"]
      .map((c) => option(c, c === card.combinator))
      .join("");
    const children = card.children
      .map((child) => `<li>${renderNode(child, catalog, issues, false)}</li>`)
      .join("");
    const remove = isRoot
      ? ""
      : `<button data-action="remove" data-node=${attr(card.node_id)}>remove</button>`;
    return (
      `<div class="group" data-node=${attr(card.node_id)}>` +
      `<div class="group-head">` +
      `<select data-action="set-combinator" data-node=${attr(card.node_id)}>${combinator}</select>` +
      badges +
      `<button data-action="add-condition" data-node=${attr(card.node_id)}>+ condition</button>` +
      `<button data-action="add-group" data-node=${attr(card.node_id)}>+ group</button>` +
      remove +
      `</div>` +
      (card.children.length === 0
        ? `<p class="empty">empty group &mdash; add a condition or remove it</p>`
        : `<ul>${children}</ul>`) +
      `</div>`
    );
  }

  const tag = catalog?.get(card.key);
  const operators = operatorsForTag(tag);
  const operatorOptions = [
    operators.includes(card.operator) ? "" : option(card.operator, true),
    ...operators.map((op) => option(op, op === card.operator)),
  ].join("");
  return (
    `<div class="condition" data-node=${attr(card.node_id)}>` +
    `<input class="key" type="text" list="tag-names" data-action="set-key" data-node=${attr(card.node_id)} value=${attr(card.key)}>` +
    `<select class="operator" data-action="set-operator" data-node=${attr(card.node_id)}>${operatorOptions}</select>` +
    valueInput(card.node_id, card.value, valueWidgetFor(tag, card.operator)) +
    badges +
    `<button data-action="wrap" data-node=${attr(card.node_id)}>wrap</button>` +
    `<button data-action="remove" data-node=${attr(card.node_id)}>remove</button>` +
    `</div>`
  );
}

export function renderPanel(
  state: PanelState,
  catalog: CatalogView | null,
  exportBlockers: string[],
): string {
  const parts: string[] = [];

  const backends = state.health
    ? `model ${escapeHtml(state.health.backends.llm)} &middot; ` +
      `${state.health.backends.users} users &middot; ${state.health.backends.tags} tags`
    : "connecting&hellip;";
  parts.push(
    `<header>` +
      `<form data-action="translate">` +
      `<input id="demand" type="text" placeholder="Describe the audience&hellip;" value=${attr(state.demand)}>` +
      `<button type="submit"${state.busy ? " disabled" : ""}>Search</button>` +
      `</form>` +
      `<span class="status">${backends}</span>` +
      `</header>`,
  );

  if (state.banner) {
    parts.push(
      `<div class="banner" role="alert">${escapeHtml(state.banner)}` +
        `<button data-action="retry">retry</button></div>`,
    );
  }

  if (state.card === null) {
    parts.push(`<p class="empty">No card yet &mdash; search for a demand to start.</p>`);
  } else {
    parts.push(
      `<section class="card-panel">` +
        `<div class="toolbar">` +
        `<button data-action="undo">undo</button>` +
        `<button data-action="redo">redo</button>` +
        `</div>` +
        renderNode(state.card, catalog, state.issues, true) +
        `</section>`,
    );
  }

  const sellLine = state.cardProblem
    ? `<span class="problem">${escapeHtml(state.cardProblem.message)}</span>`
    : state.sell
      ? `<code>${escapeHtml(state.sell)}</code>`
      : "&mdash;";
  const skeleton = state.skeleton ? `<code>${escapeHtml(state.skeleton)}</code>` : "&mdash;";
  const count = state.count === null ? "&mdash;" : String(state.count);
  const blocked = exportBlockers.length > 0;
  const reasons = blocked
    ? `<ul class="blockers">${exportBlockers
        .map((reason) => `<li>${escapeHtml(reason)}</li>`)
        .join("")}</ul>`
    : "";
  parts.push(
    `<section class="preview">` +
      `<dl>` +
      `<dt>SELL</dt><dd>${sellLine}</dd>` +
      `<dt>Structure</dt><dd>${skeleton}</dd>` +
      `<dt>Matching users</dt><dd>${count}</dd>` +
      `</dl>` +
      `<button data-action="export" data-format="csv"${blocked ? " disabled" : ""}>Export CSV</button>` +
      `<button data-action="export" data-format="json"${blocked ? " disabled" : ""}>Export JSON</button>` +
      reasons +
      `</section>`,
  );

  if (state.provenance) {
    const rows = state.provenance.retrieved
      .map(
        (entry) =>
          `<li><code>${escapeHtml(entry.id)}</code> similarity ${entry.similarity.toFixed(4)}</li>`,
      )
      .join("");
    parts.push(
      `<section class="provenance">` +
        `<h2>Analogical examples used</h2>` +
        `<ul>${rows}</ul>` +
        `<p>retrieved ${state.provenance.retrieved.length} of k=${state.provenance.config.k}, ` +
        `prompt ${state.provenance.rendered_chars} chars</p>` +
        `</section>`,
    );
  }

  const datalist = catalog
    ? `<datalist id="tag-names">${catalog.tags
        .map((tag) => `<option value=${attr(tag.name)}></option>`)
        .join("")}</datalist>`
    : "";
  parts.push(datalist);

  return parts.join("\n");
}
