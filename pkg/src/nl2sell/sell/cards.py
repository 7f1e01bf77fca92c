"""Card-tree projection of SELL expressions.

The card tree is what the editor panel renders and mutates: group nodes with
an AND/OR combinator and condition leaves, each carrying a stable node id.
`to_card` and `from_card` are mutually inverse up to node ids; `from_card`
re-canonicalizes, so edited trees (singleton groups, same-combinator
nesting) come back as valid expressions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .ast import (
    And,
    Condition,
    SellExpr,
    make_and,
    make_or,
    operator_from_surface,
    value_for,
)


class CardError(ValueError):
    pass


@dataclass(frozen=True)
class CardNode:
    kind: str                                  # "group" | "condition"
    node_id: str
    combinator: Optional[str] = None           # "AND" | "OR" on groups
    children: tuple["CardNode", ...] = ()
    key: Optional[str] = None                  # condition fields
    operator: Optional[str] = None             # canonical surface string
    value: Optional[str] = None                # surface form

    def to_json_obj(self) -> dict:
        if self.kind == "group":
            return {
                "kind": "group",
                "node_id": self.node_id,
                "combinator": self.combinator,
                "children": [c.to_json_obj() for c in self.children],
            }
        return {
            "kind": "condition",
            "node_id": self.node_id,
            "key": self.key,
            "operator": self.operator,
            "value": self.value,
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "CardNode":
        kind = obj.get("kind")
        if kind == "group":
            return CardNode(
                kind="group",
                node_id=str(obj.get("node_id", "")),
                combinator=obj.get("combinator"),
                children=tuple(CardNode.from_json_obj(c) for c in obj.get("children", [])),
            )
        if kind == "condition":
            return CardNode(
                kind="condition",
                node_id=str(obj.get("node_id", "")),
                key=obj.get("key"),
                operator=obj.get("operator"),
                value=obj.get("value"),
            )
        raise CardError(f"unknown card node kind {kind!r}")


def to_card(expr: SellExpr) -> CardNode:
    """Project an expression into a card tree with path-derived node ids."""
    return _to_card(expr, "n0")


def _to_card(expr: SellExpr, node_id: str) -> CardNode:
    if isinstance(expr, Condition):
        return CardNode(
            kind="condition",
            node_id=node_id,
            key=expr.key,
            operator=expr.operator.surface,
            value=expr.value.render(),
        )
    combinator = "AND" if isinstance(expr, And) else "OR"
    children = tuple(
        _to_card(child, f"{node_id}.{i}") for i, child in enumerate(expr.children)
    )
    return CardNode(kind="group", node_id=node_id, combinator=combinator, children=children)


def from_card(card: CardNode) -> SellExpr:
    """Rebuild the canonical expression a card tree denotes.

    Singleton groups collapse into their only child and same-combinator
    chains flatten; empty groups are rejected.
    """
    if card.kind == "condition":
        if not card.key or not card.key.strip():
            raise CardError(f"condition {card.node_id!r} has no key")
        if card.operator is None:
            raise CardError(f"condition {card.node_id!r} has no operator")
        if card.value is None or not str(card.value).strip():
            raise CardError(f"condition {card.node_id!r} has no value")
        try:
            operator = operator_from_surface(card.operator)
        except ValueError as exc:
            raise CardError(str(exc)) from None
        try:
            value = value_for(operator, str(card.value))
        except ValueError as exc:
            raise CardError(f"condition {card.node_id!r}: {exc}") from None
        return Condition(key=card.key.strip(), operator=operator, value=value)

    if card.kind != "group":
        raise CardError(f"unknown card node kind {card.kind!r}")
    if not card.children:
        raise CardError(f"group {card.node_id!r} is empty")
    if card.combinator not in ("AND", "OR"):
        raise CardError(f"group {card.node_id!r} has invalid combinator {card.combinator!r}")
    children = [from_card(child) for child in card.children]
    if len(children) == 1:
        return children[0]
    maker = make_and if card.combinator == "AND" else make_or
    return maker(children)
