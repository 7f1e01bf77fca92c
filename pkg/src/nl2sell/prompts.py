"""Prompt assembly.

Every prompt is a pure function of its inputs: instruction text from an
editable template file, demonstration blocks in a fixed labeled layout
(Demand: / Tags: / Reasoning: / Answer:), then the target. Builders carry
provenance (retrieved ids, similarity scores, config) so any rendered
prompt can be reproduced exactly.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Union

from .catalog import TagCatalog
from .retrieval import (
    Embedder,
    REASONING_STEP_LABELS,
    ReasoningLibrary,
    top_k_scored,
    top_n_tags,
)
from .sell.ast import SellExpr
from .sell.printer import print_sell


class PromptKind(str, enum.Enum):
    PREDICT = "predict"
    MULTITASK_ANSWER = "multitask_answer"
    MULTITASK_REASONING = "multitask_reasoning"
    REASONING_COMPLETION = "reasoning_completion"
    DEMAND_GENERATION = "demand_generation"
    JUDGE = "judge"


class TemplateError(ValueError):
    pass


_SLOTS = {
    "numeric_operators": "Equal To, Greater Than, Less Than, Not Equal To, Not Greater Than, Not Less Than, Between",
    "set_operators": "Belongs To, Not Belongs To",
    "steps": ", ".join(REASONING_STEP_LABELS),
}

_REQUIRED_SECTIONS = (
    "predict",
    "multitask_preamble",
    "answer_directive",
    "reasoning_directive",
    "reasoning_completion",
    "demand_generation",
    "judge",
)


@dataclass(frozen=True)
class InstructionSet:
    """Named instruction texts; the two multi-task instructions share their
    preamble by construction, differing only in the task directive."""

    predict: str
    answer_task: str
    reasoning_task: str
    reasoning_completion: str
    demand_generation: str
    judge: str
    language: str = "en"


def _parse_sections(text: str) -> dict:
    sections: dict = {}
    name = None
    lines: list = []
    for raw in text.splitlines():
        stripped = raw.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            if name is not None:
                sections[name] = "\n".join(lines).strip()
            name = stripped[1:-1]
            lines = []
        elif name is None:
            if stripped and not stripped.startswith("#"):
                raise TemplateError(f"text before first section header: {stripped!r}")
        else:
            lines.append(raw)
    if name is not None:
        sections[name] = "\n".join(lines).strip()
    return sections


def load_instructions(path: Optional[Union[str, Path]] = None) -> InstructionSet:
    """Load instruction texts; the packaged English file is the default."""
    if path is None:
        text = resources.files("nl2sell.templates").joinpath("instructions_en.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    sections = _parse_sections(text)
    missing = [s for s in _REQUIRED_SECTIONS if s not in sections]
    if missing:
        raise TemplateError(f"template file lacks sections: {', '.join(missing)}")
    try:
        filled = {name: body.format(**_SLOTS) for name, body in sections.items()}
    except (KeyError, IndexError) as exc:
        raise TemplateError(f"unknown slot in template: {exc}") from None
    preamble = filled["multitask_preamble"]
    return InstructionSet(
        predict=filled["predict"],
        answer_task=f"{preamble}\n{filled['answer_directive']}",
        reasoning_task=f"{preamble}\n{filled['reasoning_directive']}",
        reasoning_completion=filled["reasoning_completion"],
        demand_generation=filled["demand_generation"],
        judge=filled["judge"],
        language=sections.get("language", "en"),
    )


@dataclass(frozen=True)
class PromptBundle:
    kind: PromptKind
    instruction: str
    demonstrations: tuple
    target: dict
    rendered: str
    provenance: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind.value,
            "instruction": self.instruction,
            "demonstrations": [dict(d) for d in self.demonstrations],
            "target": dict(self.target),
            "rendered": self.rendered,
            "provenance": json.loads(json.dumps(self.provenance)),
        }


def _demo_block(index: int, demand: str, tags: Sequence, reasoning: Optional[str], answer: str) -> str:
    lines = [f"Example {index}:", f"Demand: {demand}"]
    if tags:
        lines.append(f"Tags: {', '.join(tags)}")
    if reasoning is not None:
        lines.append("Reasoning:")
        lines.append(reasoning)
    lines.append(f"Answer: {answer}")
    return "\n".join(lines)


def _target_block(demand: str, tags: Sequence) -> str:
    return f"Demand: {demand}\nTags: {', '.join(tags)}"


def _render(instruction: str, blocks: Sequence, target: str) -> str:
    return "\n\n".join([instruction, *blocks, target])


def _fit_budget(instruction: str, demos: list, target: str, max_chars: Optional[int]) -> tuple:
    """Drop lowest-similarity demonstrations (the last ones) until the
    rendered prompt fits; the target is never dropped."""
    dropped: list = []
    while True:
        rendered = _render(instruction, [d["block"] for d in demos], target)
        if max_chars is None or len(rendered) <= max_chars or not demos:
            return rendered, demos, dropped
        dropped.append(demos[-1]["id"])
        demos = demos[:-1]


def _retrieve_demos(demand: str, library: Optional[ReasoningLibrary], embedder: Embedder,
                    k: int, include_reasoning: bool) -> tuple:
    if k == 0:
        return [], []
    if library is None:
        raise ValueError("k >= 1 requires a reasoning library")
    hits = top_k_scored(demand, k, library, embedder)
    demos = []
    for i, hit in enumerate(hits, start=1):
        e = hit.entry
        demos.append({
            "id": e.entry_id,
            "demand": e.demand,
            "tags": list(e.tags),
            "reasoning": e.reasoning if include_reasoning else None,
            "answer": e.sell,
            "block": _demo_block(i, e.demand, e.tags, e.reasoning if include_reasoning else None, e.sell),
        })
    scores = [{"id": h.entry.entry_id, "similarity": h.similarity} for h in hits]
    return demos, scores


def _bundle(kind: PromptKind, instruction: str, demos: list, target: dict,
            rendered: str, provenance: dict) -> PromptBundle:
    clean = tuple(
        {k: v for k, v in d.items() if k != "block"}
        for d in demos
    )
    provenance = dict(provenance)
    provenance["rendered_chars"] = len(rendered)
    return PromptBundle(
        kind=kind,
        instruction=instruction,
        demonstrations=clean,
        target=target,
        rendered=rendered,
        provenance=provenance,
    )


def build_predict_prompt(demand: str, library: Optional[ReasoningLibrary], catalog: TagCatalog,
                         embedder: Embedder, instructions: InstructionSet,
                         k: int = 3, n: int = 20, max_chars: Optional[int] = None,
                         tag_index=None) -> PromptBundle:
    """The prediction prompt: instruction, k retrieved demonstrations in
    descending similarity, then the target demand with its own tag list.
    k=0 yields the zero-shot form."""
    if k < 0:
        raise ValueError("k must be >= 0")
    demos, scores = _retrieve_demos(demand, library, embedder, k, include_reasoning=True)
    target_tags = top_n_tags(demand, n, catalog, embedder, index=tag_index)
    target = _target_block(demand, target_tags)
    rendered, demos, dropped = _fit_budget(instructions.predict, demos, target, max_chars)
    return _bundle(
        PromptKind.PREDICT,
        instructions.predict,
        demos,
        {"demand": demand, "tags": target_tags},
        rendered,
        {
            "retrieved": scores,
            "config": {"k": k, "n": n, "max_chars": max_chars, "embedder_version": embedder.version},
            "dropped": dropped,
        },
    )


def build_multitask_inputs(demand: str, library: Optional[ReasoningLibrary], catalog: TagCatalog,
                           embedder: Embedder, instructions: InstructionSet,
                           k: int = 3, n: int = 20, include_reasoning: bool = True,
                           max_chars: Optional[int] = None, tag_index=None) -> tuple:
    """The paired training inputs: identical demonstrations and target, only
    the instruction differs. include_reasoning=False strips every
    demonstration's reasoning block (the reasoning-ablated variant)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    demos, scores = _retrieve_demos(demand, library, embedder, k, include_reasoning)
    target_tags = top_n_tags(demand, n, catalog, embedder, index=tag_index)
    target = _target_block(demand, target_tags)
    target_obj = {"demand": demand, "tags": target_tags}

    bundles = []
    for kind, instruction in (
        (PromptKind.MULTITASK_ANSWER, instructions.answer_task),
        (PromptKind.MULTITASK_REASONING, instructions.reasoning_task),
    ):
        rendered, kept, dropped = _fit_budget(instruction, list(demos), target, max_chars)
        bundles.append(_bundle(
            kind,
            instruction,
            kept,
            target_obj,
            rendered,
            {
                "retrieved": scores,
                "config": {
                    "k": k, "n": n, "max_chars": max_chars,
                    "include_reasoning": include_reasoning,
                    "embedder_version": embedder.version,
                },
                "dropped": dropped,
            },
        ))
    return bundles[0], bundles[1]


def build_reasoning_completion_prompt(seed_examples: Sequence, target: tuple,
                                      instructions: InstructionSet) -> PromptBundle:
    """Prompt asking for the four reasoning steps linking a demand to its
    answer, demonstrated on seed (demand, reasoning, sell) triples."""
    if not seed_examples:
        raise ValueError("at least one seed example is required")
    demos = []
    for i, (demand, reasoning, sell) in enumerate(seed_examples, start=1):
        demos.append({
            "id": f"seed-{i}",
            "demand": demand,
            "tags": [],
            "reasoning": reasoning,
            "answer": sell,
            "block": _demo_block(i, demand, (), reasoning, sell),
        })
    target_demand, target_sell = target
    target_text = f"Demand: {target_demand}\nAnswer: {target_sell}\nReasoning:"
    rendered = _render(instructions.reasoning_completion, [d["block"] for d in demos], target_text)
    return _bundle(
        PromptKind.REASONING_COMPLETION,
        instructions.reasoning_completion,
        demos,
        {"demand": target_demand, "sell": target_sell},
        rendered,
        {"config": {"seed_examples": len(demos)}},
    )


def build_demand_generation_prompt(examples: Sequence, sell: SellExpr,
                                   instructions: InstructionSet) -> PromptBundle:
    """Prompt asking for a fluent demand matching a synthesized expression,
    demonstrated on (demand, sell) pairs."""
    if not examples:
        raise ValueError("at least one example pair is required")
    blocks = []
    demos = []
    for i, (demand, sell_text) in enumerate(examples, start=1):
        blocks.append(f"Example {i}:\nSELL: {sell_text}\nDemand: {demand}")
        demos.append({"id": f"pair-{i}", "demand": demand, "tags": [], "reasoning": None,
                      "answer": sell_text, "block": blocks[-1]})
    canonical = print_sell(sell)
    target_text = f"SELL: {canonical}\nDemand:"
    rendered = _render(instructions.demand_generation, blocks, target_text)
    return _bundle(
        PromptKind.DEMAND_GENERATION,
        instructions.demand_generation,
        demos,
        {"sell": canonical},
        rendered,
        {"config": {"examples": len(demos)}},
    )


def build_judge_prompt(demand: str, prediction: str, reference: str,
                       rubric_examples: Sequence, instructions: InstructionSet) -> PromptBundle:
    """Scoring prompt for grading a prediction against its reference, 0 to 10."""
    blocks = []
    demos = []
    for i, ex in enumerate(rubric_examples, start=1):
        block = (
            f"Example {i}:\nDemand: {ex['demand']}\nPredicted: {ex['prediction']}\n"
            f"Reference: {ex['reference']}\nScore: {ex['score']}"
        )
        blocks.append(block)
        demos.append({"id": f"rubric-{i}", "demand": ex["demand"], "tags": [],
                      "reasoning": None, "answer": str(ex["score"]), "block": block})
    target_text = f"Demand: {demand}\nPredicted: {prediction}\nReference: {reference}\nScore:"
    rendered = _render(instructions.judge, blocks, target_text)
    return _bundle(
        PromptKind.JUDGE,
        instructions.judge,
        demos,
        {"demand": demand, "prediction": prediction, "reference": reference},
        rendered,
        {"config": {"rubric_examples": len(demos)}},
    )
