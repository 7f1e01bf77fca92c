/** Browser shell: binds the panel session to the DOM.
 *
 * All logic lives in flows/model/render; this file only routes DOM events to
 * session methods (by delegation on `data-action`) and swaps the rendered
 * markup back in.
 */

import { HttpApiClient } from "./api.js";
import { ExportBlockedError, PanelSession, describeError } from "./flows.js";
import {
  addCondition,
  addGroup,
  removeNode,
  setCombinator,
  setKey,
  setOperator,
  setValue,
  wrapInGroup,
} from "./model.js";
import { renderPanel } from "./render.js";

const DEFAULT_SERVICE = "http://127.0.0.1:8012";

function serviceUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("service") ?? DEFAULT_SERVICE;
}

function download(filename: string, content: string, contentType: string): void {
  const blob = new Blob([content], { type: contentType || "text/plain" });
  const url = URL.createObjectURL(blob);
  const link = document.createElement("a");
  link.href = url;
  link.download = filename;
  link.click();
  URL.revokeObjectURL(url);
}

export function boot(root: HTMLElement): PanelSession {
  const session = new PanelSession(new HttpApiClient(serviceUrl()));

  const paint = () => {
    root.innerHTML = renderPanel(session.state, session.catalog, session.exportBlockers());
  };

  const run = (work: Promise<unknown>) => {
    work
      .catch((error) => {
        if (!(error instanceof ExportBlockedError)) {
          session.state.banner = describeError(error);
        }
      })
      .finally(paint);
  };

  const nodeOf = (el: Element): string => el.getAttribute("data-node") ?? "";

  root.addEventListener("submit", (event) => {
    const form = (event.target as Element).closest("[data-action=translate]");
    if (!form) return;
    event.preventDefault();
    const input = root.querySelector<HTMLInputElement>("#demand");
    run(session.translate(input?.value ?? ""));
  });

  root.addEventListener("click", (event) => {
    const el = (event.target as Element).closest("[data-action]");
    if (!el) return;
    const action = el.getAttribute("data-action");
    switch (action) {
      case "undo":
        return run(session.undo());
      case "redo":
        return run(session.redo());
      case "retry":
        session.state.banner = null;
        return run(session.translate(session.state.demand));
      case "remove":
        return run(session.applyEdit((card) => removeNode(card, nodeOf(el))));
      case "add-condition":
        return run(
          session.applyEdit((card) => addCondition(card, nodeOf(el), session.ids.fresh())),
        );
      case "add-group":
        return run(
          session.applyEdit((card) => addGroup(card, nodeOf(el), session.ids.fresh(), "AND")),
        );
      case "wrap":
        return run(
          session.applyEdit((card) => wrapInGroup(card, nodeOf(el), session.ids.fresh(), "AND")),
        );
      case "export": {
        const format = el.getAttribute("data-format") === "json" ? "json" : "csv";
        return run(
          session.exportSegment(format).then((result) => {
            download(result.filename, result.content, result.contentType);
          }),
        );
      }
      default:
        return;
    }
  });

  root.addEventListener("change", (event) => {
    const el = (event.target as Element).closest("[data-action]");
    if (!el) return;
    const value = (el as HTMLInputElement | HTMLSelectElement).value;
    switch (el.getAttribute("data-action")) {
      case "set-combinator":
        return run(
          session.applyEdit((card) =>
            setCombinator(card, nodeOf(el), value === "OR" ? "OR" : "AND"),
          ),
        );
      case "set-key":
        return run(session.applyEdit((card) => setKey(card, nodeOf(el), value)));
      case "set-operator":
        return run(session.applyEdit((card) => setOperator(card, nodeOf(el), value)));
      case "set-value":
        return run(session.applyEdit((card) => setValue(card, nodeOf(el), value)));
      default:
        return;
    }
  });

  run(session.init());
  return session;
}

const rootElement = document.getElementById("app");
if (rootElement) boot(rootElement);
