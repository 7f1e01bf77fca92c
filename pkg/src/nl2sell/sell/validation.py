"""Catalog-aware validation of SELL expressions."""

from __future__ import annotations

from dataclasses import dataclass

from ..catalog import TagCatalog, ValueType
from .ast import (
    And,
    Bool,
    Condition,
    Number,
    NumberPair,
    Or,
    SellExpr,
    Text,
)


@dataclass(frozen=True)
class Issue:
    path: tuple[int, ...]   # child indexes from the root to the offending node
    code: str
    message: str

    def to_json_obj(self) -> dict:
        return {"path": list(self.path), "code": self.code, "message": self.message}


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...]

    @property
    def ok(self) -> bool:
        return not self.issues

    def to_json_obj(self) -> dict:
        return {"ok": self.ok, "issues": [i.to_json_obj() for i in self.issues]}


UNKNOWN_KEY = "UnknownKey"
OPERATOR_TYPE_MISMATCH = "OperatorTypeMismatch"
VALUE_NOT_ALLOWED = "ValueNotAllowed"
BOOLEAN_VALUE_INVALID = "BooleanValueInvalid"
BETWEEN_BOUNDS_OUT_OF_ORDER = "BetweenBoundsOutOfOrder"
NON_NUMERIC_VALUE = "NonNumericValue"


def validate(expr: SellExpr, catalog: TagCatalog) -> ValidationReport:
    """Check every condition against the catalog; the report carries all findings."""
    issues: list[Issue] = []
    _walk(expr, (), catalog, issues)
    return ValidationReport(tuple(issues))


def _walk(expr: SellExpr, path: tuple[int, ...], catalog: TagCatalog, issues: list[Issue]) -> None:
    if isinstance(expr, (And, Or)):
        for i, child in enumerate(expr.children):
            _walk(child, path + (i,), catalog, issues)
        return
    _check_condition(expr, path, catalog, issues)


def _check_condition(cond: Condition, path: tuple[int, ...], catalog: TagCatalog, issues: list[Issue]) -> None:
    def report(code: str, message: str) -> None:
        issues.append(Issue(path=path, code=code, message=message))

    tag = catalog.get(cond.key)
    if tag is None:
        report(UNKNOWN_KEY, f"key {cond.key!r} is not in the catalog")
        return

    op = cond.operator
    if tag.value_type is ValueType.NUMERIC:
        if not op.is_numeric:
            report(
                OPERATOR_TYPE_MISMATCH,
                f"operator {op.surface!r} does not apply to numeric tag {tag.name!r}",
            )
            return
        if isinstance(cond.value, NumberPair):
            if cond.value.lo > cond.value.hi:
                report(
                    BETWEEN_BOUNDS_OUT_OF_ORDER,
                    f"Between bounds out of order: {cond.value.render()}",
                )
        elif not isinstance(cond.value, Number):
            report(
                NON_NUMERIC_VALUE,
                f"numeric tag {tag.name!r} needs a decimal value, got {cond.value.render()!r}",
            )
        return

    # String and boolean tags accept only the membership operators.
    if not op.is_set:
        report(
            OPERATOR_TYPE_MISMATCH,
            f"operator {op.surface!r} does not apply to {tag.value_type.value} tag {tag.name!r}",
        )
        return

    if tag.value_type is ValueType.BOOLEAN:
        if not isinstance(cond.value, Bool):
            report(
                BOOLEAN_VALUE_INVALID,
                f"boolean tag {tag.name!r} takes True or False, got {cond.value.render()!r}",
            )
        return

    # String tag: check the closed value set when one is declared.
    if tag.allowed_values is not None:
        rendered = cond.value.render() if isinstance(cond.value, (Text, Bool)) else None
        if rendered is None or rendered not in tag.allowed_values:
            report(
                VALUE_NOT_ALLOWED,
                f"value {cond.value.render()!r} is not an allowed value of {tag.name!r}",
            )
