"""SELL core: AST, parser, printer, validation, and the card-tree projection."""

from .ast import (
    And,
    Bool,
    Condition,
    NUMERIC_OPERATORS,
    Number,
    NumberPair,
    Operator,
    Or,
    SET_OPERATORS,
    SellExpr,
    SellValue,
    Text,
    canonicalize,
    conditions,
    from_json,
    from_json_obj,
    make_and,
    make_or,
    operator_from_surface,
    to_json,
    to_json_obj,
    value_for,
)
from .cards import CardError, CardNode, from_card, to_card
from .parser import (
    DEFAULT_OPERATOR_ALIASES,
    MalformedBetweenValueError,
    SellParseError,
    SellSyntaxError,
    UnknownOperatorError,
    find_sell,
    normalize_surface,
    parse,
    resolve_operator,
)
from .printer import extract_structure, print_sell, skeleton_of_text
from .validation import (
    BETWEEN_BOUNDS_OUT_OF_ORDER,
    BOOLEAN_VALUE_INVALID,
    Issue,
    NON_NUMERIC_VALUE,
    OPERATOR_TYPE_MISMATCH,
    UNKNOWN_KEY,
    VALUE_NOT_ALLOWED,
    ValidationReport,
    validate,
)

__all__ = [
    "And",
    "BETWEEN_BOUNDS_OUT_OF_ORDER",
    "BOOLEAN_VALUE_INVALID",
    "Bool",
    "CardError",
    "CardNode",
    "Condition",
    "DEFAULT_OPERATOR_ALIASES",
    "Issue",
    "MalformedBetweenValueError",
    "NON_NUMERIC_VALUE",
    "NUMERIC_OPERATORS",
    "Number",
    "NumberPair",
    "OPERATOR_TYPE_MISMATCH",
    "Operator",
    "Or",
    "SET_OPERATORS",
    "SellExpr",
    "SellParseError",
    "SellSyntaxError",
    "SellValue",
    "Text",
    "UNKNOWN_KEY",
    "UnknownOperatorError",
    "VALUE_NOT_ALLOWED",
    "ValidationReport",
    "canonicalize",
    "conditions",
    "extract_structure",
    "find_sell",
    "from_card",
    "from_json",
    "from_json_obj",
    "make_and",
    "make_or",
    "normalize_surface",
    "operator_from_surface",
    "parse",
    "print_sell",
    "resolve_operator",
    "skeleton_of_text",
    "to_card",
    "to_json",
    "to_json_obj",
    "validate",
    "value_for",
]
