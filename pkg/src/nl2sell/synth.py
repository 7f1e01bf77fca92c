"""Training-data synthesis.

Two directions: demand→answer (prompt a model, collect SELL, queue failures
for human review) and answer→demand (sample an expression from a logic
template, then ask a model to write the demand). Reasoning steps are
generated and checked against the answer, and the corpus emitter writes the
multi-task training records plus the ablation variants.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Optional, Sequence, Union

from .catalog import TagCatalog, TagDef, ValueType
from .gateway import Backend, CompletionRequest
from .prompts import (
    InstructionSet,
    PromptBundle,
    build_demand_generation_prompt,
    build_multitask_inputs,
    build_predict_prompt,
    build_reasoning_completion_prompt,
)
from .retrieval import (
    Embedder,
    REASONING_STEP_LABELS,
    ReasoningLibrary,
    has_reasoning_schema,
)
from .sell.ast import (
    Bool,
    Condition,
    NUMERIC_OPERATORS,
    Number,
    NumberPair,
    Operator,
    SET_OPERATORS,
    SellExpr,
    Text,
    make_and,
    make_or,
)
from .sell.parser import find_sell
from .sell.printer import print_sell
from .sell.validation import validate


class TagWithoutValuesError(ValueError):
    pass


class SchemaMismatchError(ValueError):
    pass


class AnswerMismatchError(ValueError):
    pass


class EmptyCompletionError(ValueError):
    pass


class MissingReasoningError(ValueError):
    pass


@dataclass(frozen=True)
class LogicTemplate:
    """A combinator pattern over placeholder ``c`` leaves."""

    template_id: int
    pattern: str

    @property
    def leaf_count(self) -> int:
        return self.pattern.count("c")


# The fixed template inventory for answer synthesis: every AND/OR shape with
# at most four conditions and at most two nesting levels that the pipeline
# draws from.
TEMPLATES = tuple(
    LogicTemplate(i + 1, p)
    for i, p in enumerate([
        "c",
        "c AND c",
        "c AND c AND c",
        "c AND c AND c AND c",
        "c OR c",
        "c OR c OR c",
        "c OR c OR c OR c",
        "(c AND c) OR c",
        "(c OR c) AND c",
        "(c AND c) OR (c AND c)",
        "(c OR c) AND (c OR c)",
        "c AND (c OR c OR c)",
        "c OR (c AND c AND c)",
        "(c AND c) OR (c OR c)",
        "(c AND c) AND (c OR c)",
        "c AND ((c AND c) OR c)",
        "c AND ((c OR c) AND c)",
        "c OR ((c OR c) AND c)",
        "c OR ((c AND c) OR c)",
    ])
)


def _parse_pattern(pattern: str):
    """Parse a template pattern into nested ('AND'|'OR', children) tuples
    with 'c' leaves. Same precedence as SELL: AND over OR."""
    tokens = pattern.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take(expected=None):
        nonlocal pos
        tok = peek()
        if tok is None or (expected is not None and tok != expected):
            raise ValueError(f"bad template pattern {pattern!r} at token {pos}")
        pos += 1
        return tok

    def factor():
        if peek() == "(":
            take("(")
            node = expr()
            take(")")
            return node
        take("c")
        return "c"

    def term():
        nodes = [factor()]
        while peek() == "AND":
            take("AND")
            nodes.append(factor())
        return nodes[0] if len(nodes) == 1 else ("AND", tuple(nodes))

    def expr():
        nodes = [term()]
        while peek() == "OR":
            take("OR")
            nodes.append(term())
        return nodes[0] if len(nodes) == 1 else ("OR", tuple(nodes))

    node = expr()
    if pos != len(tokens):
        raise ValueError(f"trailing tokens in template pattern {pattern!r}")
    return node


def sample_condition(catalog: TagCatalog, rng: random.Random) -> Condition:
    """One uniformly sampled valid condition: uniform tag, uniform operator
    within the tag's class, value drawn per value type."""
    tags = list(catalog)
    if not tags:
        raise ValueError("catalog is empty")
    tag: TagDef = rng.choice(tags)
    if tag.value_type is ValueType.NUMERIC:
        operator = rng.choice(NUMERIC_OPERATORS)
        lo, hi = tag.sample_range if tag.sample_range is not None else (0, 100)
        if operator is Operator.BETWEEN:
            a = rng.randint(lo, hi)
            b = rng.randint(lo, hi)
            value = NumberPair(Decimal(min(a, b)), Decimal(max(a, b)))
        else:
            value = Number(Decimal(rng.randint(lo, hi)))
        return Condition(key=tag.name, operator=operator, value=value)
    operator = rng.choice(SET_OPERATORS)
    if tag.value_type is ValueType.BOOLEAN:
        return Condition(key=tag.name, operator=operator, value=Bool(rng.choice([True, False])))
    if not tag.allowed_values:
        raise TagWithoutValuesError(f"string tag {tag.name!r} has no allowed values to sample")
    return Condition(key=tag.name, operator=operator, value=Text(rng.choice(list(tag.allowed_values))))


def synthesize_answer(template: LogicTemplate, catalog: TagCatalog, rng: random.Random) -> SellExpr:
    """Instantiate a template, sampling each leaf condition independently."""
    node = _parse_pattern(template.pattern)

    def build(n):
        if n == "c":
            return sample_condition(catalog, rng)
        kind, children = n
        maker = make_and if kind == "AND" else make_or
        return maker([build(child) for child in children])

    return build(node)


def split_rng(seed: Union[int, str], index: Union[int, str]) -> random.Random:
    """Independent per-sample stream; string seeding is stable across runs
    and processes, so concurrency cannot reorder outcomes."""
    return random.Random(f"{seed}|{index}")


@dataclass(frozen=True)
class TrainSample:
    sample_id: str
    demand: str
    sell: str
    reasoning: Optional[str] = None
    source: str = "answer_to_demand"
    verified: bool = False

    def to_json_obj(self) -> dict:
        return {
            "id": self.sample_id,
            "demand": self.demand,
            "sell": self.sell,
            "reasoning": self.reasoning,
            "source": self.source,
            "verified": self.verified,
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "TrainSample":
        return TrainSample(
            sample_id=str(obj["id"]),
            demand=str(obj["demand"]),
            sell=str(obj["sell"]),
            reasoning=obj.get("reasoning"),
            source=str(obj.get("source", "answer_to_demand")),
            verified=bool(obj.get("verified", False)),
        )


@dataclass(frozen=True)
class Rejection:
    demand: str
    completion: str
    code: str
    reason: str

    def to_json_obj(self) -> dict:
        return {"demand": self.demand, "completion": self.completion,
                "code": self.code, "reason": self.reason}


@dataclass(frozen=True)
class GeneratedDemand:
    demand: str
    raw: str
    prompt: PromptBundle


@dataclass(frozen=True)
class AnswerResult:
    prompt: PromptBundle
    raw: str
    expr: Optional[SellExpr] = None
    rejection: Optional[Rejection] = None

    @property
    def accepted(self) -> bool:
        return self.expr is not None


def _library_pairs(library: ReasoningLibrary, count: int) -> list:
    return [(e.demand, e.sell) for e in library.entries[:count]]


def _library_triples(library: ReasoningLibrary, count: int) -> list:
    return [(e.demand, e.reasoning, e.sell) for e in library.entries[:count]]


def generate_demand(sell: SellExpr, library: ReasoningLibrary, backend: Backend,
                    instructions: InstructionSet, example_count: int = 3,
                    model: str = "default") -> GeneratedDemand:
    """Ask the model to write a fluent demand for a synthesized expression."""
    bundle = build_demand_generation_prompt(_library_pairs(library, example_count), sell, instructions)
    result = backend.complete(CompletionRequest(prompt=bundle.rendered, model=model))
    cleaned = " ".join(result.text.split())
    if not cleaned:
        raise EmptyCompletionError("model returned an empty demand")
    return GeneratedDemand(demand=cleaned, raw=result.text, prompt=bundle)


def generate_answer(demand: str, library: ReasoningLibrary, catalog: TagCatalog,
                    embedder: Embedder, backend: Backend, instructions: InstructionSet,
                    k: int = 3, n: int = 20, model: str = "default") -> AnswerResult:
    """Ask the model for the SELL answer to a demand; anything that fails to
    parse or validate comes back as a structured rejection for the review
    queue instead of an exception."""
    bundle = build_predict_prompt(demand, library, catalog, embedder, instructions, k=k, n=n)
    result = backend.complete(CompletionRequest(prompt=bundle.rendered, model=model))
    raw = result.text
    expr = find_sell(raw)
    if expr is None:
        return AnswerResult(prompt=bundle, raw=raw, rejection=Rejection(
            demand=demand, completion=raw, code="parse_error",
            reason="completion contains no parseable SELL expression"))
    report = validate(expr, catalog)
    if not report.ok:
        issue = report.issues[0]
        return AnswerResult(prompt=bundle, raw=raw, rejection=Rejection(
            demand=demand, completion=raw, code="validation_error",
            reason=f"{issue.code} at {list(issue.path)}: {issue.message}"))
    return AnswerResult(prompt=bundle, raw=raw, expr=expr)


def extract_final_sell(reasoning: str) -> Optional[SellExpr]:
    """The SELL expression stated in the last (Combine) step, if any."""
    label = REASONING_STEP_LABELS[-1]
    at = reasoning.rfind(label)
    if at < 0:
        return None
    return find_sell(reasoning[at + len(label):])


def generate_reasoning(demand: str, sell: SellExpr, library: ReasoningLibrary,
                       backend: Backend, instructions: InstructionSet,
                       seed_count: int = 2, model: str = "default") -> str:
    """Ask the model to fill in the four reasoning steps for a (demand, sell)
    pair. Accepts only completions that carry all four step labels and whose
    final step restates exactly the given expression."""
    canonical = print_sell(sell)
    bundle = build_reasoning_completion_prompt(
        _library_triples(library, seed_count), (demand, canonical), instructions)
    result = backend.complete(CompletionRequest(prompt=bundle.rendered, model=model, max_tokens=1024))
    text = result.text.strip()
    if not has_reasoning_schema(text):
        raise SchemaMismatchError("completion lacks the four labeled reasoning steps")
    stated = extract_final_sell(text)
    if stated is None:
        raise AnswerMismatchError("final step states no parseable SELL expression")
    if print_sell(stated) != canonical:
        raise AnswerMismatchError(
            f"final step answer {print_sell(stated)!r} differs from target {canonical!r}")
    return text


class CorpusMode(str, enum.Enum):
    MULTITASK = "multitask"
    ANSWER_ONLY = "answer_only"            # drops the reasoning task
    NO_DEMO_REASONING = "no_demo_reasoning"  # demonstrations without reasoning
    PLAIN = "plain"                        # instruction + demand, no demonstrations


def emit_corpus(samples: Sequence, library: Optional[ReasoningLibrary], catalog: TagCatalog,
                embedder: Embedder, instructions: InstructionSet, mode: CorpusMode,
                k: int = 3, n: int = 20, path: Optional[Union[str, Path]] = None) -> list:
    """Render training records for a sample set.

    Multi-task emits two records per sample (answer + reasoning tasks);
    answer_only drops the reasoning record; no_demo_reasoning keeps both but
    strips demonstration reasoning; plain pairs the bare instruction+demand
    with the answer. Each record's provenance suffices to re-render its
    input against the same library and catalog.
    """
    mode = CorpusMode(mode)
    records = []
    for sample in samples:
        needs_reasoning = mode in (CorpusMode.MULTITASK, CorpusMode.NO_DEMO_REASONING)
        if needs_reasoning and not sample.reasoning:
            raise MissingReasoningError(f"sample {sample.sample_id!r} has no reasoning")

        if mode is CorpusMode.PLAIN:
            rendered = f"{instructions.predict}\n\nDemand: {sample.demand}"
            records.append({
                "id": f"{sample.sample_id}-answer",
                "input": rendered,
                "output": sample.sell,
                "task": "answer",
                "source": sample.source,
                "provenance": {"mode": mode.value, "sample_id": sample.sample_id,
                               "demand": sample.demand},
            })
            continue

        include_reasoning = mode is not CorpusMode.NO_DEMO_REASONING
        answer_input, reasoning_input = build_multitask_inputs(
            sample.demand, library, catalog, embedder, instructions,
            k=k, n=n, include_reasoning=include_reasoning)
        base_prov = {
            "mode": mode.value,
            "sample_id": sample.sample_id,
            "demand": sample.demand,
            **answer_input.provenance,
        }
        records.append({
            "id": f"{sample.sample_id}-answer",
            "input": answer_input.rendered,
            "output": sample.sell,
            "task": "answer",
            "source": sample.source,
            "provenance": base_prov,
        })
        if mode in (CorpusMode.MULTITASK, CorpusMode.NO_DEMO_REASONING):
            records.append({
                "id": f"{sample.sample_id}-reasoning",
                "input": reasoning_input.rendered,
                "output": sample.reasoning,
                "task": "reasoning",
                "source": sample.source,
                "provenance": base_prov,
            })
    if path is not None:
        with Path(path).open("w", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps(record, ensure_ascii=False, sort_keys=True))
                f.write("\n")
    return records


def write_review_queue(rejections: Sequence, path: Union[str, Path]) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        for rejection in rejections:
            f.write(json.dumps(rejection.to_json_obj(), ensure_ascii=False, sort_keys=True))
            f.write("\n")
    return path


def load_samples(path: Union[str, Path]) -> list:
    samples = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                samples.append(TrainSample.from_json_obj(json.loads(line)))
    return samples


def save_samples(samples: Sequence, path: Union[str, Path]) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        for sample in samples:
            f.write(json.dumps(sample.to_json_obj(), ensure_ascii=False, sort_keys=True))
            f.write("\n")
    return path
