"""Evaluate SELL expressions against a user-tag database.

Semantics are fixed here, not in the language: Between is inclusive on both
ends, numeric comparison is exact decimal arithmetic, string comparison is
exact after NFC normalization and trimming, and a record missing the tag
evaluates false for every operator including the Not* ones (absence means
unknown, never targeted).
"""

from __future__ import annotations

import csv
import io
import json
import unicodedata
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Mapping, Sequence, Union

from .catalog import TagCatalog, TagDef, ValueType
from .sell.ast import And, Bool, Condition, Number, NumberPair, Operator, Or, SellExpr, Text
from .sell.validation import ValidationReport, validate

TagValue = Union[Decimal, str, frozenset, bool]


class TypeMismatchError(ValueError):
    """A record value conflicts with the catalog's declared type (corrupt DB)."""


class SegmentValidationError(ValueError):
    """The expression does not validate against the database catalog."""

    def __init__(self, report: ValidationReport):
        self.report = report
        lines = "; ".join(f"{i.code}: {i.message}" for i in report.issues)
        super().__init__(f"expression failed validation: {lines}")


@dataclass(frozen=True)
class UserRecord:
    user_id: str
    assignments: Mapping[str, TagValue]

    def to_json_obj(self) -> dict:
        out: dict = {}
        for name in sorted(self.assignments):
            value = self.assignments[name]
            if isinstance(value, frozenset):
                out[name] = sorted(value)
            elif isinstance(value, Decimal):
                # Integral numerics stay JSON numbers; exact decimals go
                # through strings so nothing passes through binary floats.
                out[name] = int(value) if value == value.to_integral_value() else str(value)
            else:
                out[name] = value
        return {"user_id": self.user_id, "assignments": out}


@dataclass(frozen=True)
class UserDb:
    catalog: TagCatalog
    records: tuple

    def __len__(self) -> int:
        return len(self.records)


def _coerce_assignment(tag: TagDef, raw: object) -> TagValue:
    if tag.value_type is ValueType.NUMERIC:
        if isinstance(raw, bool):
            raise TypeMismatchError(f"tag {tag.name!r} is numeric, got boolean")
        if isinstance(raw, Decimal):
            return raw
        if isinstance(raw, int):
            return Decimal(raw)
        if isinstance(raw, str):
            try:
                return Decimal(raw)
            except InvalidOperation:
                raise TypeMismatchError(f"tag {tag.name!r} is numeric, got {raw!r}") from None
        raise TypeMismatchError(f"tag {tag.name!r} is numeric, got {type(raw).__name__}")
    if tag.value_type is ValueType.BOOLEAN:
        if isinstance(raw, bool):
            return raw
        raise TypeMismatchError(f"tag {tag.name!r} is boolean, got {type(raw).__name__}")
    # String tags: single value, or a set when the tag is multi-valued.
    if isinstance(raw, str):
        _check_allowed(tag, raw)
        return raw
    if isinstance(raw, (list, tuple, set, frozenset)):
        if not tag.multi_valued:
            raise TypeMismatchError(f"tag {tag.name!r} is single-valued, got a list")
        values = []
        for item in raw:
            if not isinstance(item, str):
                raise TypeMismatchError(f"tag {tag.name!r} holds strings, got {type(item).__name__}")
            _check_allowed(tag, item)
            values.append(item)
        return frozenset(values)
    raise TypeMismatchError(f"tag {tag.name!r} is a string tag, got {type(raw).__name__}")


def _check_allowed(tag: TagDef, value: str) -> None:
    if tag.allowed_values is not None and value not in tag.allowed_values:
        raise TypeMismatchError(f"tag {tag.name!r} does not allow value {value!r}")


def make_record(user_id: str, assignments: Mapping[str, object], catalog: TagCatalog) -> UserRecord:
    """Build a validated record; assignment keys resolve to canonical tag names."""
    resolved: dict = {}
    for name, raw in assignments.items():
        tag = catalog.get(name)
        if tag is None:
            raise TypeMismatchError(f"assignment for unknown tag {name!r}")
        if tag.name in resolved:
            raise TypeMismatchError(f"duplicate assignment for tag {tag.name!r}")
        resolved[tag.name] = _coerce_assignment(tag, raw)
    return UserRecord(user_id=str(user_id), assignments=resolved)


def _norm_text(value: str) -> str:
    return unicodedata.normalize("NFC", value).strip()


def _condition_text(cond: Condition) -> str:
    # Set-operator values arrive as Text or Bool; compare on the surface form.
    return _norm_text(cond.value.render())


def eval_condition(cond: Condition, record: UserRecord, catalog: TagCatalog) -> bool:
    tag = catalog.get(cond.key)
    if tag is None:
        raise TypeMismatchError(f"condition key {cond.key!r} not in catalog")
    if tag.name not in record.assignments:
        return False
    value = record.assignments[tag.name]
    op = cond.operator

    if op.is_numeric:
        if not isinstance(value, Decimal):
            raise TypeMismatchError(f"tag {tag.name!r}: expected numeric value, got {type(value).__name__}")
        if op is Operator.BETWEEN:
            if not isinstance(cond.value, NumberPair):
                raise TypeMismatchError(f"tag {tag.name!r}: Between requires a number pair")
            return cond.value.lo <= value <= cond.value.hi
        if not isinstance(cond.value, Number):
            raise TypeMismatchError(f"tag {tag.name!r}: numeric operator requires a numeric value")
        bound = cond.value.value
        if op is Operator.EQUAL_TO:
            return value == bound
        if op is Operator.NOT_EQUAL_TO:
            return value != bound
        if op is Operator.GREATER_THAN:
            return value > bound
        if op is Operator.LESS_THAN:
            return value < bound
        if op is Operator.NOT_GREATER_THAN:
            return value <= bound
        if op is Operator.NOT_LESS_THAN:
            return value >= bound
        raise TypeMismatchError(f"unhandled numeric operator {op!r}")

    # Set operators.
    if tag.value_type is ValueType.BOOLEAN:
        if not isinstance(cond.value, Bool):
            raise TypeMismatchError(f"tag {tag.name!r}: boolean tag requires a True/False value")
        member = value is cond.value.value
    elif isinstance(value, frozenset):
        wanted = _condition_text(cond)
        member = any(_norm_text(v) == wanted for v in value)
    elif isinstance(value, str):
        member = _norm_text(value) == _condition_text(cond)
    else:
        raise TypeMismatchError(f"tag {tag.name!r}: expected string value, got {type(value).__name__}")

    return member if op is Operator.BELONGS_TO else not member


def eval_expr(expr: SellExpr, record: UserRecord, catalog: TagCatalog) -> bool:
    if isinstance(expr, Condition):
        return eval_condition(expr, record, catalog)
    if isinstance(expr, And):
        return all(eval_expr(child, record, catalog) for child in expr.children)
    if isinstance(expr, Or):
        return any(eval_expr(child, record, catalog) for child in expr.children)
    raise TypeError(f"not a SELL expression: {expr!r}")


def select_users(expr: SellExpr, db: UserDb) -> list:
    """All user ids matched by the expression, sorted for determinism."""
    report = validate(expr, db.catalog)
    if not report.ok:
        raise SegmentValidationError(report)
    matched = [r.user_id for r in db.records if eval_expr(expr, r, db.catalog)]
    return sorted(matched)


def render_segment(ids: Sequence, format: str = "csv") -> str:
    """Segment file content: CSV with a ``user_id`` header, or a JSON list."""
    if format == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["user_id"])
        for uid in ids:
            writer.writerow([uid])
        return buffer.getvalue()
    if format == "json":
        return json.dumps(list(ids), ensure_ascii=False, indent=2) + "\n"
    raise ValueError(f"unknown export format {format!r}")


def export_segment(ids: Sequence, path: Union[str, Path], format: str = "csv") -> Path:
    """Write a segment to disk as CSV (header ``user_id``) or a JSON list."""
    path = Path(path)
    path.write_text(render_segment(ids, format), encoding="utf-8", newline="")
    return path


def read_segment(path: Union[str, Path]) -> list:
    """Read back an exported segment (either format)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("["):
        return [str(x) for x in json.loads(text)]
    with path.open("r", newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != ["user_id"]:
        raise ValueError(f"{path}: not a segment CSV")
    return [row[0] for row in rows[1:]]


def load_user_db(path: Union[str, Path], catalog: TagCatalog) -> UserDb:
    """Load a JSON Lines user database, validating every record."""
    records = []
    seen = set()
    with Path(path).open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line, parse_float=Decimal, parse_int=Decimal)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            user_id = obj.get("user_id")
            if not user_id:
                raise ValueError(f"{path}:{lineno}: record has no user_id")
            if user_id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate user_id {user_id!r}")
            seen.add(user_id)
            try:
                records.append(make_record(user_id, obj.get("assignments", {}), catalog))
            except TypeMismatchError as exc:
                raise TypeMismatchError(f"{path}:{lineno}: {exc}") from None
    return UserDb(catalog=catalog, records=tuple(records))


def save_user_db(db: UserDb, path: Union[str, Path]) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        for record in db.records:
            f.write(json.dumps(record.to_json_obj(), ensure_ascii=False, sort_keys=True))
            f.write("\n")
    return path
