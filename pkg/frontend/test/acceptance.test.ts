/** Release gate for the card panel, one test per criterion:
 *
 *  - round-trip: loading a canonical SELL and exporting without edits yields
 *    the identical SELL text;
 *  - operator menus follow the type matrix (7 numeric / 2 membership);
 *  - the export count preview equals what `nl2sell select` prints for the
 *    same expression and fixture database;
 *  - undo/redo behaves as a bounded-depth state machine (property test in
 *    undo_redo_property.test.ts; the session-level slice is checked here).
 *
 * Exchanges were recorded off the real service by
 * scripts/gen_frontend_fixtures.py; a replay miss fails the test, so these
 * flows cannot drift from genuine server behaviour unnoticed.
 */

import { describe, expect, it } from "vitest";

import { ApiError } from "../src/api.js";
import { ExportBlockedError, PanelSession } from "../src/flows.js";
import {
  addCondition,
  removeNode,
  setCombinator,
  setOperator,
  setValue,
  wrapInGroup,
} from "../src/model.js";
import { operatorsForTag } from "../src/widgets.js";
import { ReplayApiClient, loadReplay } from "./fake_api.js";

const replay = loadReplay();

function freshSession(): PanelSession {
  return new PanelSession(new ReplayApiClient(replay));
}

function pass(name: string, detail: string): void {
  console.log(`acceptance[${name}]: PASS (${detail})`);
}

describe("ui round-trip", () => {
  it("load with no edits exports the identical canonical SELL", async () => {
    expect(replay.testset_sells).toHaveLength(10);
    for (const sell of replay.testset_sells) {
      const session = freshSession();
      await session.loadSell(sell);

      // the canonical preview is byte-identical to what was loaded
      expect(session.state.sell).toBe(sell);
      expect(session.state.validation?.ok).toBe(true);
      expect(session.exportBlockers()).toEqual([]);

      // and the exported segment is keyed by exactly that SELL: a replay
      // miss here would mean the UI serialized something else
      const result = await session.exportSegment("csv");
      const lines = result.content.trimEnd().split("\n");
      expect(lines[0]).toBe("user_id");
      expect(lines.length - 1).toBe(session.state.count);
      expect(result.filename).toBe("segment.csv");
    }
    pass("ui-round-trip", `${replay.testset_sells.length}/10 expressions identical`);
  });
});

describe("operator menus", () => {
  it("respect the type matrix over the whole served catalog", async () => {
    const session = freshSession();
    await session.init();
    const tags = session.catalog?.tags ?? [];
    expect(tags.length).toBe(session.state.health?.backends.tags);

    let numeric = 0;
    let membership = 0;
    for (const tag of tags) {
      const menu = operatorsForTag(tag);
      if (tag.value_type === "numeric") {
        expect(menu).toEqual([
          "Equal To",
          "Greater Than",
          "Less Than",
          "Not Equal To",
          "Not Greater Than",
          "Not Less Than",
          "Between",
        ]);
        numeric++;
      } else {
        expect(menu).toEqual(["Belongs To", "Not Belongs To"]);
        membership++;
      }
    }
    expect(numeric + membership).toBe(tags.length);
    expect(numeric).toBeGreaterThan(0);
    expect(membership).toBeGreaterThan(0);
    pass(
      "operator-menus",
      `${tags.length} tags: ${numeric}x 7-entry numeric, ${membership}x 2-entry membership`,
    );
  });
});

describe("export count equals the command line", () => {
  it("matches `nl2sell select` for every cross-checked expression", async () => {
    const cases = Object.entries(replay.cli_select);
    expect(cases.length).toBeGreaterThanOrEqual(5);
    for (const [sell, cli] of cases) {
      const session = freshSession();
      await session.loadSell(sell);
      expect(session.state.count).toBe(cli.count);
      expect(session.state.userIds).toEqual(cli.user_ids);

      const result = await session.exportSegment("csv");
      const rows = result.content.trimEnd().split("\n").slice(1).filter((r) => r !== "");
      expect(rows).toEqual(cli.user_ids);
    }
    const empty = replay.cli_select[replay.empty_match_sell];
    expect(empty?.count).toBe(0); // the header-only export case is included
    pass("export-count-vs-cli", `${cases.length} expressions, counts and ids equal`);
  });
});

describe("edit loop against recorded server behaviour", () => {
  it("hoists the sibling when one leaf of a two-leaf group is deleted", async () => {
    const session = freshSession();
    await session.loadSell(replay.edit_base_sell);
    await session.applyEdit((card) => removeNode(card, "n0.1"));
    expect(session.state.sell).toBe(replay.edited_sells.removed_leaf);
    expect(session.state.sell).toBe("(User Age Group#Between#18,35)");

    await session.undo();
    expect(session.state.sell).toBe(replay.edit_base_sell);
  });

  it("updates the structure preview when the root combinator flips", async () => {
    const session = freshSession();
    await session.loadSell(replay.edit_base_sell);
    expect(session.state.skeleton).toBe("(##) AND (##)");
    await session.applyEdit((card) => setCombinator(card, "n0", "OR"));
    expect(session.state.sell).toBe(replay.edited_sells.root_or);
    expect(session.state.skeleton).toBe("(##) OR (##)");
  });

  it("pins a bad value onto the edited leaf and blocks export", async () => {
    const session = freshSession();
    await session.loadSell(replay.edit_base_sell);
    await session.applyEdit((card) => setValue(card, "n0.1", "Skiing"));
    expect(session.state.validation?.ok).toBe(false);
    expect(session.state.issues.get("n0.1")).toMatchObject([{ code: "ValueNotAllowed" }]);
    expect(session.state.count).toBeNull();

    const error = await session.exportSegment("csv").catch((e) => e);
    expect(error).toBeInstanceOf(ExportBlockedError);
    expect(error.reasons.join(" ")).toContain("ValueNotAllowed");
  });

  it("maps validation paths through a collapsed singleton wrapper", async () => {
    const session = freshSession();
    await session.loadSell(replay.edit_base_sell);
    const wrapperId = session.ids.fresh(); // "c1", as recorded
    await session.applyEdit((card) => wrapInGroup(card, "n0.0", wrapperId, "AND"));
    await session.applyEdit((card) => setValue(card, "n0.1", "Skiing"));
    // the server collapses the wrapper, so the canonical SELL is the same...
    expect(session.state.sell).toBe(replay.edited_sells.wrapped_bad_value);
    // ...and the issue still lands on the right client node
    expect(session.state.issues.get("n0.1")).toMatchObject([{ code: "ValueNotAllowed" }]);
  });

  it("maps validation paths through same-combinator flattening", async () => {
    const session = freshSession();
    await session.loadSell(replay.edit_base_sell);
    await session.applyEdit((card) => wrapInGroup(card, "n0.1", "c2", "AND"));
    await session.applyEdit((card) =>
      addCondition(card, "c2", "c3", {
        key: "Preference",
        operator: "Belongs To",
        value: "Skiing",
      }),
    );
    expect(session.state.sell).toBe(replay.edited_sells.nested_bad_value);
    expect(session.state.issues.get("c3")).toMatchObject([{ code: "ValueNotAllowed" }]);
    expect(session.state.issues.has("n0.1")).toBe(false);
  });

  it("flags an operator/value clash as an unprintable card", async () => {
    const session = freshSession();
    await session.loadSell(replay.edit_base_sell);
    await session.applyEdit((card) => setOperator(card, "n0.0", "Equal To"));
    expect(session.state.cardProblem?.code).toBe("CardError");
    expect(session.state.cardProblem?.message).toContain("not a decimal literal");
    expect(session.state.sell).toBeNull();
    const error = await session.exportSegment("csv").catch((e) => e);
    expect(error).toBeInstanceOf(ExportBlockedError);

    // undo returns to the printable state
    await session.undo();
    expect(session.state.sell).toBe(replay.edit_base_sell);
    expect(session.state.cardProblem).toBeNull();
  });
});

describe("translate loop against recorded server behaviour", () => {
  it("renders the demanded card with provenance and live previews", async () => {
    const demand = replay.translate_demands[0]!;
    const session = freshSession();
    await session.init();
    expect(await session.translate(demand)).toBe(true);

    expect(session.state.sell).toBe(replay.testset_sells[0]);
    expect(session.state.validation?.ok).toBe(true);
    expect(session.state.skeleton).toBe(
      "((##) AND (##) AND (##)) OR ((##) AND (##) AND (##))",
    );
    expect(session.state.count).not.toBeNull();
    expect(session.state.provenance?.retrieved.length).toBeGreaterThan(0);
    expect(session.state.provenance?.config.k).toBe(3);
  });

  it("banners a backend failure and leaves the card untouched", async () => {
    const demand = replay.translate_demands[0]!;
    const session = freshSession();
    await session.translate(demand);
    const cardBefore = session.state.card;

    expect(await session.translate("completely unrecorded demand")).toBe(false);
    expect(session.state.banner).toContain("CassetteMissError");
    expect(session.state.card).toBe(cardBefore);
  });

  it("rejects malformed SELL on load with the parse position", async () => {
    const session = freshSession();
    const error = await session.loadSell("(Gender#").catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.status).toBe(422);
    expect(error.code).toBe("SellSyntaxError");
    expect(error.path).toBe(8);
  });
});
