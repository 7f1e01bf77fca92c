"""Canonical serialization of SELL ASTs and logic-skeleton extraction."""

from __future__ import annotations

import re
from typing import Union

from .ast import And, Condition, Or, SellExpr
from .parser import parse


def print_sell(expr: SellExpr) -> str:
    """Serialize to canonical SELL text.

    Conditions render as ``(key#op#value)`` with no spaces around ``#``;
    siblings join with `` AND `` / `` OR ``; a child group whose combinator
    differs from its parent is parenthesized; the top level is unwrapped.
    """
    return _render(expr, blank_conditions=False)


def extract_structure(expr_or_text: Union[SellExpr, str]) -> str:
    """Reduce an expression to its logic skeleton.

    Every condition becomes ``(##)``; combinators and grouping parentheses
    keep the canonical print layout.  String input is parsed first, so parse
    errors propagate.
    """
    expr = parse(expr_or_text) if isinstance(expr_or_text, str) else expr_or_text
    return _render(expr, blank_conditions=True)


def _render(expr: SellExpr, blank_conditions: bool) -> str:
    if isinstance(expr, Condition):
        if blank_conditions:
            return "(##)"
        return f"({expr.key}#{expr.operator.surface}#{expr.value.render()})"
    joiner = " AND " if isinstance(expr, And) else " OR "
    parts = []
    for child in expr.children:
        text = _render(child, blank_conditions)
        if isinstance(child, (And, Or)):
            text = f"({text})"
        parts.append(text)
    return joiner.join(parts)


# Fallback skeleton for text that fails to parse: condition-shaped spans
# collapse to (##), combinator words and parens survive, everything else is
# dropped, and the survivors re-join in canonical spacing.

_CONDITION_SPAN = re.compile(r"\(\s*[^()#]*#[^()#]*#[^()#]*\)")
_STRUCTURE_TOKEN = re.compile(r"\(##\)|AND|OR|\(|\)")


def skeleton_of_text(text: str) -> str:
    """Best-effort skeleton of arbitrary (possibly unparseable) text."""
    blanked = _CONDITION_SPAN.sub("(##)", text)
    tokens = _STRUCTURE_TOKEN.findall(blanked)
    out: list[str] = []
    for token in tokens:
        if token in ("AND", "OR"):
            out.append(f" {token} ")
        else:
            out.append(token)
    return "".join(out)
