/** JSON shapes exchanged with the targeting service. */

export type Combinator = "AND" | "OR";

export interface GroupCard {
  kind: "group";
  node_id: string;
  combinator: Combinator;
  children: CardJson[];
}

export interface ConditionCard {
  kind: "condition";
  node_id: string;
  key: string;
  operator: string;
  value: string;
}

export type CardJson = GroupCard | ConditionCard;

export type ValueType = "numeric" | "string" | "boolean";

export interface TagInfo {
  name: string;
  value_type: ValueType;
  allowed_values?: string[];
  multi_valued?: boolean;
  description?: string;
  sample_range?: [number, number];
}

export interface ValidationIssue {
  /** Child indexes from the canonical expression root to the bad node. */
  path: number[];
  code: string;
  message: string;
}

export interface ValidationReport {
  ok: boolean;
  issues: ValidationIssue[];
}

export interface RetrievedExample {
  id: string;
  similarity: number;
}

export interface PromptProvenance {
  retrieved: RetrievedExample[];
  config: {
    k: number;
    n: number;
    max_chars: number | null;
    embedder_version: string;
  };
  dropped: RetrievedExample[];
  rendered_chars: number;
}

export interface TranslateResponse {
  sell: string;
  card: CardJson;
  validation: ValidationReport;
  prompt_provenance: PromptProvenance;
}

export interface SelectUsersResponse {
  user_ids: string[];
  count: number;
}

export interface ExportResult {
  content: string;
  contentType: string;
  filename: string;
}

export interface HealthResponse {
  ok: boolean;
  version: string;
  backends: {
    llm: string;
    embedder: string;
    library_entries: number;
    users: number;
    tags: number;
  };
}

export function isGroup(card: CardJson): card is GroupCard {
  return card.kind === "group";
}

export function isCondition(card: CardJson): card is ConditionCard {
  return card.kind === "condition";
}
