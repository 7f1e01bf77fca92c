/** Schema-driven editor widgets.
 *
 * Operator menus and value inputs are derived from catalog metadata fetched
 * once at load; the panel hardcodes nothing about individual tags.  Numeric
 * tags take the seven comparison operators, string and boolean tags take the
 * two membership operators.
 */

import type { TagInfo } from "./types.js";

export const NUMERIC_OPERATORS: readonly string[] = [
  "Equal To",
  "Greater Than",
  "Less Than",
  "Not Equal To",
  "Not Greater Than",
  "Not Less Than",
  "Between",
];

export const SET_OPERATORS: readonly string[] = ["Belongs To", "Not Belongs To"];

export const ALL_OPERATORS: readonly string[] = [
  ...NUMERIC_OPERATORS,
  ...SET_OPERATORS,
];

/** The operator menu for a tag, or every operator when the tag is unknown. */
export function operatorsForTag(tag: TagInfo | undefined): readonly string[] {
  if (!tag) return ALL_OPERATORS;
  return tag.value_type === "numeric" ? NUMERIC_OPERATORS : SET_OPERATORS;
}

export type ValueWidget =
  | { kind: "number" }
  | { kind: "number-pair" }
  | { kind: "select"; options: string[] }
  | { kind: "text" };

/** The value input to render for a tag/operator pair. */
export function valueWidgetFor(
  tag: TagInfo | undefined,
  operator: string,
): ValueWidget {
  if (operator === "Between") return { kind: "number-pair" };
  if (NUMERIC_OPERATORS.includes(operator)) return { kind: "number" };
  if (!tag) return { kind: "text" };
  if (tag.value_type === "boolean") return { kind: "select", options: ["True", "False"] };
  if (tag.value_type === "string" && tag.allowed_values) {
    return { kind: "select", options: [...tag.allowed_values] };
  }
  return { kind: "text" };
}

/** Case-insensitive tag lookup over the loaded catalog. */
export class CatalogView {
  private readonly byName = new Map<string, TagInfo>();

  constructor(public readonly tags: TagInfo[]) {
    for (const tag of tags) {
      this.byName.set(tag.name.toLowerCase(), tag);
    }
  }

  get(name: string): TagInfo | undefined {
    return this.byName.get(name.trim().toLowerCase());
  }
}
