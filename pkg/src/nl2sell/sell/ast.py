"""AST for SELL targeting expressions.

A SELL expression is either a single condition ``(key#operator#value)`` or
an n-ary AND/OR combination of sub-expressions.  ASTs produced by the parser
and the smart constructors are canonical: same-combinator chains are
flattened into one node, groups always have at least two children, and a
singleton group collapses into its only child.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Iterable, Sequence, Union


class Operator(enum.Enum):
    """The nine condition operators, keyed by canonical surface string."""

    EQUAL_TO = "Equal To"
    GREATER_THAN = "Greater Than"
    LESS_THAN = "Less Than"
    NOT_EQUAL_TO = "Not Equal To"
    NOT_GREATER_THAN = "Not Greater Than"
    NOT_LESS_THAN = "Not Less Than"
    BETWEEN = "Between"
    BELONGS_TO = "Belongs To"
    NOT_BELONGS_TO = "Not Belongs To"

    @property
    def surface(self) -> str:
        return self.value

    @property
    def is_numeric(self) -> bool:
        """True for the seven operators that compare numeric values."""
        return self not in (Operator.BELONGS_TO, Operator.NOT_BELONGS_TO)

    @property
    def is_set(self) -> bool:
        """True for the two membership operators (string/boolean values)."""
        return self in (Operator.BELONGS_TO, Operator.NOT_BELONGS_TO)


NUMERIC_OPERATORS = tuple(op for op in Operator if op.is_numeric)
SET_OPERATORS = (Operator.BELONGS_TO, Operator.NOT_BELONGS_TO)


@dataclass(frozen=True)
class Number:
    """A single exact decimal value."""

    value: Decimal

    def render(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class NumberPair:
    """An interval value, used with Between.

    Out-of-order bounds are representable (an edited card may produce them);
    the validator reports them as an issue.
    """

    lo: Decimal
    hi: Decimal

    def render(self) -> str:
        return f"{self.lo},{self.hi}"


@dataclass(frozen=True)
class Text:
    """A plain string value."""

    value: str

    def render(self) -> str:
        return self.value


@dataclass(frozen=True)
class Bool:
    """A True/False value, used with the membership operators."""

    value: bool

    def render(self) -> str:
        return "True" if self.value else "False"


SellValue = Union[Number, NumberPair, Text, Bool]

_FORBIDDEN_IN_ATOM = ("#", "(", ")")


def _check_atom(text: str, what: str) -> str:
    if not text:
        raise ValueError(f"{what} must be non-empty")
    for ch in _FORBIDDEN_IN_ATOM:
        if ch in text:
            raise ValueError(f"{what} may not contain {ch!r}: {text!r}")
    return text


@dataclass(frozen=True)
class Condition:
    """One ``(key#operator#value)`` leaf."""

    key: str
    operator: Operator
    value: SellValue

    def __post_init__(self) -> None:
        _check_atom(self.key, "condition key")
        if isinstance(self.value, Text):
            _check_atom(self.value.value, "condition value")


@dataclass(frozen=True)
class And:
    """Intersection of two or more sub-expressions."""

    children: tuple["SellExpr", ...]

    def __post_init__(self) -> None:
        _check_group(self.children, And)


@dataclass(frozen=True)
class Or:
    """Union of two or more sub-expressions."""

    children: tuple["SellExpr", ...]

    def __post_init__(self) -> None:
        _check_group(self.children, Or)


SellExpr = Union[Condition, And, Or]


def _check_group(children: Sequence[SellExpr], kind: type) -> None:
    if len(children) < 2:
        raise ValueError(f"{kind.__name__} group needs at least 2 children")
    for child in children:
        if isinstance(child, kind):
            raise ValueError(
                f"{kind.__name__} group may not directly contain another "
                f"{kind.__name__}; flatten the chain first"
            )


def make_and(children: Iterable[SellExpr]) -> SellExpr:
    """Build an And node, flattening nested Ands and collapsing singletons."""
    return _make_group(children, And)


def make_or(children: Iterable[SellExpr]) -> SellExpr:
    """Build an Or node, flattening nested Ors and collapsing singletons."""
    return _make_group(children, Or)


def _make_group(children: Iterable[SellExpr], kind: type) -> SellExpr:
    flat: list[SellExpr] = []
    for child in children:
        if isinstance(child, kind):
            flat.extend(child.children)
        else:
            flat.append(child)
    if not flat:
        raise ValueError(f"{kind.__name__} group needs at least one child")
    if len(flat) == 1:
        return flat[0]
    return kind(tuple(flat))


def canonicalize(expr: SellExpr) -> SellExpr:
    """Re-establish canonical shape on an arbitrary well-typed tree."""
    if isinstance(expr, Condition):
        return expr
    maker = make_and if isinstance(expr, And) else make_or
    return maker(canonicalize(c) for c in expr.children)


def conditions(expr: SellExpr) -> list[Condition]:
    """All condition leaves, left to right."""
    if isinstance(expr, Condition):
        return [expr]
    out: list[Condition] = []
    for child in expr.children:
        out.extend(conditions(child))
    return out


def value_for(operator: Operator, raw: str) -> SellValue:
    """Type a raw value string according to its operator.

    Between takes a ``lo,hi`` decimal pair; the other numeric operators take
    a single decimal; membership operators take True/False or plain text.
    Raises ValueError when a Between value is not a pair of decimals, or a
    non-Between numeric value is not a decimal (callers translate this into
    their own error type; the parser falls back to Text for the latter so
    near-miss output stays representable).
    """
    raw = raw.strip()
    if operator is Operator.BETWEEN:
        parts = raw.split(",")
        if len(parts) != 2:
            raise ValueError(f"Between value must be 'lo,hi', got {raw!r}")
        return NumberPair(_parse_decimal(parts[0]), _parse_decimal(parts[1]))
    if operator.is_set:
        if raw == "True":
            return Bool(True)
        if raw == "False":
            return Bool(False)
        return Text(raw)
    return Number(_parse_decimal(raw))


def _parse_decimal(text: str) -> Decimal:
    text = text.strip()
    # Plain integer or decimal-point literals only; no exponents, so the
    # printed form round-trips byte for byte.
    if not text or text.strip("0123456789.+-") or text.count(".") > 1:
        raise ValueError(f"not a decimal literal: {text!r}")
    try:
        return Decimal(text)
    except InvalidOperation as exc:
        raise ValueError(f"not a decimal literal: {text!r}") from exc


# --- JSON interchange ------------------------------------------------------
#
# Groups serialize as {"op": "AND"|"OR", "children": [...]}, leaves as
# {"key": ..., "operator": <canonical surface>, "value": <surface string>}.
# The value keeps its surface form so exact decimals survive the round trip;
# deserialization re-types it from the operator, exactly like the parser.


def to_json_obj(expr: SellExpr) -> dict:
    if isinstance(expr, Condition):
        return {
            "key": expr.key,
            "operator": expr.operator.surface,
            "value": expr.value.render(),
        }
    op = "AND" if isinstance(expr, And) else "OR"
    return {"op": op, "children": [to_json_obj(c) for c in expr.children]}


def from_json_obj(obj: dict) -> SellExpr:
    if "op" in obj:
        op = obj["op"]
        if op not in ("AND", "OR"):
            raise ValueError(f"unknown group op {op!r}")
        children = [from_json_obj(c) for c in obj.get("children", [])]
        maker = make_and if op == "AND" else make_or
        return maker(children)
    key = obj["key"]
    operator = operator_from_surface(obj["operator"])
    value = value_for(operator, str(obj["value"]))
    return Condition(key=key, operator=operator, value=value)


def to_json(expr: SellExpr) -> str:
    return json.dumps(to_json_obj(expr), ensure_ascii=False)


def from_json(text: str) -> SellExpr:
    return from_json_obj(json.loads(text))


_SURFACE_TO_OPERATOR = {op.surface: op for op in Operator}


def operator_from_surface(surface: str) -> Operator:
    """Resolve a canonical operator surface string, exactly."""
    try:
        return _SURFACE_TO_OPERATOR[surface]
    except KeyError:
        raise ValueError(f"unknown operator {surface!r}") from None
