/** Panel session: the marketer loop wired to the service.
 *
 * Search: translate a demand into a card.  Edit: mutate the card tree, with
 * every change re-printed, re-validated and re-counted server-side.  Export:
 * download the matching user segment.  The session keeps all state client
 * side; the service stays stateless.
 *
 * Refreshes follow latest-wins: a new edit aborts and supersedes the
 * in-flight refresh, and per-node tag autocompletes supersede older queries
 * for the same node.
 */

import { ApiError } from "./api.js";
import type { ApiClient } from "./api.js";
import type {
  CardJson,
  ExportResult,
  HealthResponse,
  PromptProvenance,
  TagInfo,
  ValidationIssue,
  ValidationReport,
} from "./types.js";
import { CardHistory, IdSource, issuesByNode } from "./model.js";
import { CatalogView } from "./widgets.js";

export interface CardProblem {
  code: string;
  message: string;
}

export interface PanelState {
  demand: string;
  card: CardJson | null;
  /** Canonical SELL of the current card, as printed by the service. */
  sell: string | null;
  skeleton: string | null;
  validation: ValidationReport | null;
  issues: Map<string, ValidationIssue[]>;
  /** Print rejected the tree (incomplete condition, empty group, ...). */
  cardProblem: CardProblem | null;
  count: number | null;
  userIds: string[] | null;
  provenance: PromptProvenance | null;
  /** Surfaced backend failure; the card itself is untouched. */
  banner: string | null;
  busy: boolean;
  health: HealthResponse | null;
}

export class ExportBlockedError extends Error {
  constructor(public readonly reasons: string[]) {
    super(`export blocked: ${reasons.join("; ")}`);
    this.name = "ExportBlockedError";
  }
}

function emptyState(): PanelState {
  return {
    demand: "",
    card: null,
    sell: null,
    skeleton: null,
    validation: null,
    issues: new Map(),
    cardProblem: null,
    count: null,
    userIds: null,
    provenance: null,
    banner: null,
    busy: false,
    health: null,
  };
}

export class PanelSession {
  readonly state: PanelState = emptyState();
  readonly history = new CardHistory();
  readonly ids = new IdSource();
  catalog: CatalogView | null = null;

  private refreshSeq = 0;
  private refreshAbort: AbortController | null = null;
  private autocompleteSeq = new Map<string, number>();
  private autocompleteAbort = new Map<string, AbortController>();

  constructor(private readonly api: ApiClient) {}

  /** Fetch backend status and the tag catalog (once, at load). */
  async init(): Promise<void> {
    this.state.health = await this.api.health();
    this.catalog = new CatalogView(await this.api.searchTags(""));
  }

  /** Search: demand in, rendered card out.  On failure the card under edit
   * is left exactly as it was and the error lands in the banner. */
  async translate(demand: string): Promise<boolean> {
    this.state.demand = demand;
    this.state.busy = true;
    this.state.banner = null;
    try {
      const response = await this.api.translate(demand);
      this.history.reset(response.card);
      this.state.card = response.card;
      this.state.provenance = response.prompt_provenance;
      await this.refresh();
      return true;
    } catch (error) {
      this.state.banner = describeError(error);
      return false;
    } finally {
      this.state.busy = false;
    }
  }

  /** Load an existing SELL expression into the editor. */
  async loadSell(sell: string): Promise<void> {
    const card = await this.api.parse(sell);
    this.history.reset(card);
    this.state.card = card;
    this.state.provenance = null;
    this.state.banner = null;
    await this.refresh();
  }

  /** Apply a pure tree mutation, record it in history, re-sync. */
  async applyEdit(mutate: (card: CardJson) => CardJson | null): Promise<void> {
    if (this.state.card === null) throw new ExportBlockedError(["no card loaded"]);
    const next = mutate(this.state.card);
    this.history.push(next);
    this.state.card = next;
    await this.refresh();
  }

  async undo(): Promise<boolean> {
    if (!this.history.undo()) return false;
    this.state.card = this.history.present;
    await this.refresh();
    return true;
  }

  async redo(): Promise<boolean> {
    if (!this.history.redo()) return false;
    this.state.card = this.history.present;
    await this.refresh();
    return true;
  }

  /** Re-derive everything the panel previews from the current card:
   * canonical SELL, validation badges, structure skeleton, match count.
   * Latest call wins; superseded results are discarded. */
  async refresh(): Promise<void> {
    const seq = ++this.refreshSeq;
    this.refreshAbort?.abort();
    const abort = new AbortController();
    this.refreshAbort = abort;

    const card = this.state.card;
    if (card === null) {
      this.clearDerived();
      return;
    }

    try {
      const sell = await this.api.print(card, { signal: abort.signal });
      if (seq !== this.refreshSeq) return;
      this.state.sell = sell;
      this.state.cardProblem = null;

      const [validation, skeleton] = await Promise.all([
        this.api.validate(sell, { signal: abort.signal }),
        this.api.structure(sell, { signal: abort.signal }),
      ]);
      if (seq !== this.refreshSeq) return;
      this.state.validation = validation;
      this.state.issues = issuesByNode(card, validation.issues);
      this.state.skeleton = skeleton;

      if (!validation.ok) {
        this.state.count = null;
        this.state.userIds = null;
        return;
      }
      const selection = await this.api.selectUsers(sell, { signal: abort.signal });
      if (seq !== this.refreshSeq) return;
      this.state.count = selection.count;
      this.state.userIds = selection.user_ids;
    } catch (error) {
      if (seq !== this.refreshSeq) return; // superseded: result no longer wanted
      if (isAbort(error)) return;
      if (error instanceof ApiError && error.status === 400) {
        // the tree itself is not printable/selectable in its current shape
        this.state.cardProblem = { code: error.code, message: error.message };
        this.state.sell = null;
        this.state.validation = null;
        this.state.issues = new Map();
        this.state.skeleton = null;
        this.state.count = null;
        this.state.userIds = null;
        return;
      }
      this.state.banner = describeError(error);
    }
  }

  /** Tag-name autocomplete for one leaf; newer queries for the same node
   * abort and supersede older ones. */
  async autocomplete(nodeId: string, q: string, n = 8): Promise<TagInfo[] | null> {
    const seq = (this.autocompleteSeq.get(nodeId) ?? 0) + 1;
    this.autocompleteSeq.set(nodeId, seq);
    this.autocompleteAbort.get(nodeId)?.abort();
    const abort = new AbortController();
    this.autocompleteAbort.set(nodeId, abort);
    try {
      const tags = await this.api.searchTags(q, n, { signal: abort.signal });
      if (this.autocompleteSeq.get(nodeId) !== seq) return null;
      return tags;
    } catch (error) {
      if (this.autocompleteSeq.get(nodeId) !== seq || isAbort(error)) return null;
      throw error;
    }
  }

  /** Everything that currently stands between this card and an export. */
  exportBlockers(): string[] {
    const reasons: string[] = [];
    if (this.state.card === null) reasons.push("no card loaded");
    if (this.state.cardProblem) reasons.push(this.state.cardProblem.message);
    if (this.state.validation && !this.state.validation.ok) {
      for (const issue of this.state.validation.issues) {
        reasons.push(`${issue.code}: ${issue.message}`);
      }
    }
    if (this.state.card !== null && !this.state.cardProblem && !this.state.validation) {
      reasons.push("card not validated yet");
    }
    return reasons;
  }

  /** Export: the segment for the current card, in CSV or JSON. */
  async exportSegment(format: "csv" | "json" = "csv"): Promise<ExportResult> {
    const reasons = this.exportBlockers();
    if (reasons.length > 0 || this.state.sell === null) {
      throw new ExportBlockedError(reasons.length ? reasons : ["no canonical SELL"]);
    }
    return this.api.exportSegment(this.state.sell, format);
  }

  private clearDerived(): void {
    this.state.sell = null;
    this.state.skeleton = null;
    this.state.validation = null;
    this.state.issues = new Map();
    this.state.cardProblem = null;
    this.state.count = null;
    this.state.userIds = null;
  }
}

function isAbort(error: unknown): boolean {
  return error instanceof Error && error.name === "AbortError";
}

export function describeError(error: unknown): string {
  if (error instanceof ApiError) {
    return `${error.code}: ${error.message}`;
  }
  return error instanceof Error ? error.message : String(error);
}
