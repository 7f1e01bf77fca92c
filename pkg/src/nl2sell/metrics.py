"""Similarity metrics and the benchmark report.

Structure accuracy compares logic skeletons (conditions blanked to ``(##)``)
with normalized Levenshtein and Ratcliff/Obershelp similarity; overall
accuracy is corpus-level BLEU over the raw SELL strings.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from difflib import SequenceMatcher
from pathlib import Path
from typing import Sequence, Union

from .sell.parser import SellParseError, parse
from .sell.printer import extract_structure, skeleton_of_text

# Whitespace split, then ( ) # isolated, then CJK codepoints one token each
# and other runs kept whole. Recorded in report metadata so scores remain
# comparable across versions.
TOKENIZER_VERSION = "ws-symbol-cjk-1"
BLEU_SMOOTHING = "epsilon-floor-1e-9"
_EPS = 1e-9

_CJK_RANGES = (
    (0x3040, 0x30FF),    # kana
    (0x3400, 0x4DBF),    # CJK extension A
    (0x4E00, 0x9FFF),    # CJK unified
    (0xAC00, 0xD7AF),    # hangul syllables
    (0xF900, 0xFAFF),    # CJK compatibility
    (0x20000, 0x2FA1F),  # CJK extensions B+
)


class LengthMismatchError(ValueError):
    pass


def edit_distance(a: str, b: str) -> int:
    """Unit-cost Levenshtein distance over Unicode scalar values."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


def levenshtein_sim(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    return 1.0 - edit_distance(a, b) / max(len(a), len(b))


def ratcliff_obershelp(a: str, b: str) -> float:
    """Gestalt pattern-matching ratio 2M/(|a|+|b|), no junk heuristic."""
    if not a and not b:
        return 1.0
    return SequenceMatcher(None, a, b, autojunk=False).ratio()


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def tokenize(text: str) -> list:
    tokens: list = []
    for chunk in text.split():
        run: list = []
        for ch in chunk:
            if ch in "()#":
                if run:
                    tokens.append("".join(run))
                    run = []
                tokens.append(ch)
            elif _is_cjk(ch):
                if run:
                    tokens.append("".join(run))
                    run = []
                tokens.append(ch)
            else:
                run.append(ch)
        if run:
            tokens.append("".join(run))
    return tokens


def _ngrams(tokens: Sequence, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(preds: Sequence, refs: Sequence) -> float:
    """Corpus BLEU in [0, 100]: clipped n-gram precisions n=1..4, brevity penalty."""
    if len(preds) != len(refs):
        raise LengthMismatchError(f"{len(preds)} predictions vs {len(refs)} references")
    if not preds:
        raise LengthMismatchError("empty corpus")

    matched = [0, 0, 0, 0]
    possible = [0, 0, 0, 0]
    pred_len = 0
    ref_len = 0
    for pred, ref in zip(preds, refs):
        pred_tokens = tokenize(pred)
        ref_tokens = tokenize(ref)
        pred_len += len(pred_tokens)
        ref_len += len(ref_tokens)
        for n in range(1, 5):
            pred_counts = _ngrams(pred_tokens, n)
            ref_counts = _ngrams(ref_tokens, n)
            possible[n - 1] += sum(pred_counts.values())
            matched[n - 1] += sum(min(c, ref_counts[g]) for g, c in pred_counts.items())

    if pred_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(4):
        precision = matched[n] / possible[n] if possible[n] else 0.0
        log_sum += 0.25 * math.log(max(precision, _EPS))
    brevity = 1.0 if pred_len >= ref_len else math.exp(1.0 - ref_len / pred_len)
    return 100.0 * brevity * math.exp(log_sum)


@dataclass(frozen=True)
class StructureScore:
    l: float
    ro: float

    @property
    def mean(self) -> float:
        return (self.l + self.ro) / 2.0

    def to_json_obj(self) -> dict:
        return {"l": self.l, "ro": self.ro, "mean": self.mean}


def structure_accuracy(pred: str, gold: str) -> StructureScore:
    """Skeleton similarity; unparseable predictions fall back to a regex skeleton."""
    gold_skeleton = extract_structure(gold)
    try:
        pred_skeleton = extract_structure(pred)
    except SellParseError:
        pred_skeleton = skeleton_of_text(pred)
    return StructureScore(
        l=levenshtein_sim(pred_skeleton, gold_skeleton),
        ro=ratcliff_obershelp(pred_skeleton, gold_skeleton),
    )


@dataclass(frozen=True)
class BenchmarkItem:
    item_id: str
    demand: str
    prediction: str
    reference: str
    structure: StructureScore
    parse_ok: bool

    def to_json_obj(self) -> dict:
        return {
            "id": self.item_id,
            "demand": self.demand,
            "prediction": self.prediction,
            "reference": self.reference,
            "structure": self.structure.to_json_obj(),
            "parse_ok": self.parse_ok,
        }


@dataclass(frozen=True)
class BenchmarkReport:
    items: tuple
    overall_bleu: float
    mean_l: float
    mean_ro: float
    mean_structure: float
    parse_rate: float

    def to_json_obj(self) -> dict:
        return {
            "items": [item.to_json_obj() for item in self.items],
            "aggregates": {
                "overall_bleu": self.overall_bleu,
                "mean_l": self.mean_l,
                "mean_ro": self.mean_ro,
                "mean_structure": self.mean_structure,
                "parse_rate": self.parse_rate,
            },
            "metadata": {
                "tokenizer": TOKENIZER_VERSION,
                "bleu_smoothing": BLEU_SMOOTHING,
                "bleu_level": "corpus",
            },
        }


def _load_jsonl(path: Union[str, Path]) -> list:
    rows = []
    with Path(path).open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from None
    return rows


def evaluate_items(rows: Sequence) -> BenchmarkReport:
    """Score (id, demand, prediction, reference) rows, preserving order."""
    items = []
    for item_id, demand, prediction, reference in rows:
        try:
            parse(prediction)
            parse_ok = True
        except SellParseError:
            parse_ok = False
        items.append(BenchmarkItem(
            item_id=str(item_id),
            demand=str(demand),
            prediction=str(prediction),
            reference=str(reference),
            structure=structure_accuracy(str(prediction), str(reference)),
            parse_ok=parse_ok,
        ))
    if not items:
        raise ValueError("nothing to evaluate")
    n = len(items)
    return BenchmarkReport(
        items=tuple(items),
        overall_bleu=corpus_bleu([i.prediction for i in items], [i.reference for i in items]),
        mean_l=sum(i.structure.l for i in items) / n,
        mean_ro=sum(i.structure.ro for i in items) / n,
        mean_structure=sum(i.structure.mean for i in items) / n,
        parse_rate=sum(1 for i in items if i.parse_ok) / n,
    )


def evaluate_benchmark(predictions_path: Union[str, Path], testset_path: Union[str, Path]) -> BenchmarkReport:
    """Score a predictions file against a testset file (JSONL, {id, demand, sell})."""
    testset = _load_jsonl(testset_path)
    predictions = {}
    for row in _load_jsonl(predictions_path):
        if "id" not in row or "sell" not in row:
            raise ValueError(f"{predictions_path}: prediction rows need id and sell fields")
        predictions[str(row["id"])] = str(row["sell"])

    rows = []
    for row in testset:
        if "id" not in row or "sell" not in row:
            raise ValueError(f"{testset_path}: testset rows need id and sell fields")
        item_id = str(row["id"])
        if item_id not in predictions:
            raise ValueError(f"no prediction for testset item {item_id!r}")
        rows.append((item_id, row.get("demand", ""), predictions[item_id], row["sell"]))
    if not rows:
        raise ValueError("testset is empty")
    return evaluate_items(rows)


def render_report_table(report: BenchmarkReport) -> str:
    """Plain-text table over the aggregate columns."""
    headers = ["S-BLEU", "L", "R/O", "Mean", "Parse%"]
    values = [
        f"{report.overall_bleu:.2f}",
        f"{report.mean_l:.4f}",
        f"{report.mean_ro:.4f}",
        f"{report.mean_structure:.4f}",
        f"{100.0 * report.parse_rate:.1f}",
    ]
    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    head = " | ".join(h.ljust(w) for h, w in zip(headers, widths))
    rule = "-+-".join("-" * w for w in widths)
    body = " | ".join(v.ljust(w) for v, w in zip(values, widths))
    return "\n".join([head, rule, body, f"items: {len(report.items)}"])
