/** Card document model: pure tree mutations, undo/redo, path mapping.
 *
 * The card under edit lives entirely in the client; the service only parses,
 * prints and validates.  Every mutation returns a fresh tree (inputs are
 * never modified), so history snapshots stay valid by construction.
 *
 * Client edits may leave the tree non-canonical (singleton groups after a
 * delete, same-combinator nesting after a drag); the server re-canonicalizes
 * on print.  Validation issue paths therefore refer to the canonical
 * expression, and `nodeIdAtCanonicalPath` maps them back onto client nodes.
 */

import type { CardJson, Combinator, ConditionCard, GroupCard, ValidationIssue } from "./types.js";
import { isCondition, isGroup } from "./types.js";

export class EditError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "EditError";
  }
}

// ---------------------------------------------------------------------------
// Lookup helpers

export function findNode(card: CardJson | null, nodeId: string): CardJson | undefined {
  if (card === null) return undefined;
  if (card.node_id === nodeId) return card;
  if (isGroup(card)) {
    for (const child of card.children) {
      const hit = findNode(child, nodeId);
      if (hit) return hit;
    }
  }
  return undefined;
}

export function listNodeIds(card: CardJson | null): string[] {
  if (card === null) return [];
  const out = [card.node_id];
  if (isGroup(card)) {
    for (const child of card.children) out.push(...listNodeIds(child));
  }
  return out;
}

export function countNodes(card: CardJson | null): number {
  return listNodeIds(card).length;
}

function contains(card: CardJson, nodeId: string): boolean {
  return findNode(card, nodeId) !== undefined;
}

// ---------------------------------------------------------------------------
// Mutations (all pure: the input tree is never touched)

type NodeTransform = (node: CardJson) => CardJson | null;

/** Replace the node with the given id via `fn`; `null` removes it. */
function mapNode(card: CardJson, nodeId: string, fn: NodeTransform): CardJson | null {
  if (card.node_id === nodeId) return fn(card);
  if (!isGroup(card)) return card;
  let changed = false;
  const children: CardJson[] = [];
  for (const child of card.children) {
    const next = mapNode(child, nodeId, fn);
    if (next !== child) changed = true;
    if (next !== null) children.push(next);
  }
  return changed ? { ...card, children } : card;
}

function mustFind(card: CardJson | null, nodeId: string): CardJson {
  const node = card === null ? undefined : findNode(card, nodeId);
  if (!node) throw new EditError(`no node with id ${JSON.stringify(nodeId)}`);
  return node;
}

function mustBeGroup(node: CardJson): GroupCard {
  if (!isGroup(node)) throw new EditError(`node ${node.node_id} is not a group`);
  return node;
}

function mustBeCondition(node: CardJson): ConditionCard {
  if (!isCondition(node)) throw new EditError(`node ${node.node_id} is not a condition`);
  return node;
}

export function setCombinator(
  card: CardJson,
  nodeId: string,
  combinator: Combinator,
): CardJson {
  mustBeGroup(mustFind(card, nodeId));
  return mapNode(card, nodeId, (node) => ({ ...(node as GroupCard), combinator }))!;
}

export function setKey(card: CardJson, nodeId: string, key: string): CardJson {
  mustBeCondition(mustFind(card, nodeId));
  return mapNode(card, nodeId, (node) => ({ ...(node as ConditionCard), key }))!;
}

export function setOperator(card: CardJson, nodeId: string, operator: string): CardJson {
  mustBeCondition(mustFind(card, nodeId));
  return mapNode(card, nodeId, (node) => ({ ...(node as ConditionCard), operator }))!;
}

export function setValue(card: CardJson, nodeId: string, value: string): CardJson {
  mustBeCondition(mustFind(card, nodeId));
  return mapNode(card, nodeId, (node) => ({ ...(node as ConditionCard), value }))!;
}

export interface ConditionInit {
  key?: string;
  operator?: string;
  value?: string;
}

/** Append a new condition leaf to a group. */
export function addCondition(
  card: CardJson,
  groupId: string,
  newId: string,
  init: ConditionInit = {},
): CardJson {
  assertFreshId(card, newId);
  mustBeGroup(mustFind(card, groupId));
  const leaf: ConditionCard = {
    kind: "condition",
    node_id: newId,
    key: init.key ?? "",
    operator: init.operator ?? "Belongs To",
    value: init.value ?? "",
  };
  return mapNode(card, groupId, (node) => ({
    ...(node as GroupCard),
    children: [...(node as GroupCard).children, leaf],
  }))!;
}

/** Append a new empty group to a group (filled in by later edits). */
export function addGroup(
  card: CardJson,
  groupId: string,
  newId: string,
  combinator: Combinator,
): CardJson {
  assertFreshId(card, newId);
  mustBeGroup(mustFind(card, groupId));
  const group: GroupCard = {
    kind: "group",
    node_id: newId,
    combinator,
    children: [],
  };
  return mapNode(card, groupId, (node) => ({
    ...(node as GroupCard),
    children: [...(node as GroupCard).children, group],
  }))!;
}

/** Replace a node with a new group that contains it. */
export function wrapInGroup(
  card: CardJson,
  nodeId: string,
  newId: string,
  combinator: Combinator,
): CardJson {
  assertFreshId(card, newId);
  mustFind(card, nodeId);
  return mapNode(card, nodeId, (node) => ({
    kind: "group",
    node_id: newId,
    combinator,
    children: [node],
  }))!;
}

/** Remove a node; removing the root empties the card. */
export function removeNode(card: CardJson, nodeId: string): CardJson | null {
  mustFind(card, nodeId);
  return mapNode(card, nodeId, () => null);
}

/** Detach a node and re-insert it into a group at the given index. */
export function moveNode(
  card: CardJson,
  nodeId: string,
  targetGroupId: string,
  index: number,
): CardJson {
  const moved = mustFind(card, nodeId);
  if (card.node_id === nodeId) throw new EditError("cannot move the root node");
  if (contains(moved, targetGroupId)) {
    throw new EditError("cannot move a node into its own subtree");
  }
  mustBeGroup(mustFind(card, targetGroupId));
  const detached = mapNode(card, nodeId, () => null);
  if (detached === null) throw new EditError("cannot move the root node");
  return mapNode(detached, targetGroupId, (node) => {
    const group = node as GroupCard;
    const children = [...group.children];
    const at = Math.max(0, Math.min(index, children.length));
    children.splice(at, 0, moved);
    return { ...group, children };
  })!;
}

function assertFreshId(card: CardJson, newId: string): void {
  if (!newId) throw new EditError("new node id must be non-empty");
  if (contains(card, newId)) {
    throw new EditError(`node id ${JSON.stringify(newId)} already in use`);
  }
}

/** Monotonic source of client-side node ids ("c1", "c2", ...). */
export class IdSource {
  private next = 1;

  fresh(): string {
    return `c${this.next++}`;
  }
}

// ---------------------------------------------------------------------------
// Canonical-path mapping

interface LeafView {
  kind: "leaf";
  nodeId: string;
}

interface GroupView {
  kind: "group";
  nodeId: string;
  combinator: Combinator;
  children: View[];
}

type View = LeafView | GroupView;

/** Mirror of the server's re-canonicalization, keeping client node ids:
 * singleton groups collapse into their child, same-combinator nesting
 * flattens.  Assumes a printable tree (no empty groups). */
function canonicalView(card: CardJson): View | null {
  if (isCondition(card)) return { kind: "leaf", nodeId: card.node_id };
  const children: View[] = [];
  for (const child of card.children) {
    const view = canonicalView(child);
    if (view === null) continue;
    if (view.kind === "group" && view.combinator === card.combinator) {
      children.push(...view.children);
    } else {
      children.push(view);
    }
  }
  if (children.length === 0) return null;
  if (children.length === 1) return children[0]!;
  return {
    kind: "group",
    nodeId: card.node_id,
    combinator: card.combinator,
    children,
  };
}

/** The client node a canonical-expression path lands on, if any. */
export function nodeIdAtCanonicalPath(
  card: CardJson,
  path: number[],
): string | undefined {
  let view = canonicalView(card);
  for (const index of path) {
    if (!view || view.kind !== "group") return undefined;
    view = view.children[index] ?? null;
  }
  return view?.nodeId;
}

/** Group validation issues by the client node they refer to; issues that
 * cannot be mapped attach to the root so nothing is silently dropped. */
export function issuesByNode(
  card: CardJson,
  issues: ValidationIssue[],
): Map<string, ValidationIssue[]> {
  const out = new Map<string, ValidationIssue[]>();
  for (const issue of issues) {
    const nodeId = nodeIdAtCanonicalPath(card, issue.path) ?? card.node_id;
    const bucket = out.get(nodeId);
    if (bucket) bucket.push(issue);
    else out.set(nodeId, [issue]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Undo/redo history

/** Snapshots kept on the undo stack; the contract floor is 20. */
export const HISTORY_DEPTH = 50;

export class CardHistory {
  private past: (CardJson | null)[] = [];
  private future: (CardJson | null)[] = [];

  constructor(
    public present: CardJson | null = null,
    private readonly depth: number = HISTORY_DEPTH,
  ) {}

  get undoDepth(): number {
    return this.past.length;
  }

  get redoDepth(): number {
    return this.future.length;
  }

  canUndo(): boolean {
    return this.past.length > 0;
  }

  canRedo(): boolean {
    return this.future.length > 0;
  }

  /** Record an edit: the current card becomes undoable, redo clears. */
  push(next: CardJson | null): void {
    this.past.push(this.present);
    if (this.past.length > this.depth) this.past.shift();
    this.present = next;
    this.future = [];
  }

  /** Replace the document and drop all history (e.g. after translate). */
  reset(card: CardJson | null): void {
    this.present = card;
    this.past = [];
    this.future = [];
  }

  undo(): boolean {
    const previous = this.past.pop();
    if (previous === undefined) return false;
    this.future.push(this.present);
    this.present = previous;
    return true;
  }

  redo(): boolean {
    const next = this.future.pop();
    if (next === undefined) return false;
    this.past.push(this.present);
    this.present = next;
    return true;
  }
}
