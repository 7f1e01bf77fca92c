"""Parser for the SELL surface syntax.

Grammar::

    expr      := term ("OR" term)*
    term      := factor ("AND" factor)*
    factor    := condition | "(" expr ")"
    condition := "(" key "#" operator "#" value ")"

AND binds tighter than OR.  Same-combinator chains flatten into one node.
Full-width punctuation is normalized to half-width before lexing, key and
value text is trimmed, and operator names are matched case-insensitively
with collapsed inner whitespace; an alias table (on by default) additionally
maps common drifted spellings such as ``Belongs`` onto canonical operators.
"""

from __future__ import annotations

from typing import Mapping, Optional

from .ast import (
    Condition,
    Operator,
    SellExpr,
    make_and,
    make_or,
    value_for,
)


class SellParseError(ValueError):
    """Base class for anything the parser can reject."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.message = message
        self.position = position


class SellSyntaxError(SellParseError):
    """Malformed surface text; carries the expected token."""

    def __init__(self, message: str, position: int, expected: str):
        super().__init__(message, position)
        self.expected = expected


class UnknownOperatorError(SellParseError):
    def __init__(self, text: str, position: int):
        super().__init__(f"unknown operator {text!r}", position)
        self.operator_text = text


class MalformedBetweenValueError(SellParseError):
    def __init__(self, text: str, position: int):
        super().__init__(
            f"Between value must be 'lo,hi' with two decimals, got {text!r}",
            position,
        )
        self.value_text = text


# Aliases for operator spellings seen in real model output.  Keys are
# normalized (lowercase, single-spaced); the printer always emits canonical
# names, so aliases never appear in canonical text.
DEFAULT_OPERATOR_ALIASES: Mapping[str, Operator] = {
    "belongs": Operator.BELONGS_TO,
    "belong to": Operator.BELONGS_TO,
    "not belongs": Operator.NOT_BELONGS_TO,
    "not belong to": Operator.NOT_BELONGS_TO,
}

_CANONICAL_LOOKUP = {op.surface.lower(): op for op in Operator}

# Full-width forms that deployed model output mixes with half-width.
_WIDTH_MAP = str.maketrans(
    {
        "（": "(",   # （
        "）": ")",   # ）
        "＃": "#",   # ＃
        "，": ",",   # ，
        "　": " ",   # full-width space
    }
)


def normalize_surface(text: str) -> str:
    """Map full-width punctuation to half-width before lexing."""
    return text.translate(_WIDTH_MAP)


def _normalize_operator_name(text: str) -> str:
    return " ".join(text.split()).lower()


def resolve_operator(
    text: str,
    aliases: Optional[Mapping[str, Operator]] = DEFAULT_OPERATOR_ALIASES,
) -> Optional[Operator]:
    """Match an operator spelling; None when nothing matches."""
    name = _normalize_operator_name(text)
    op = _CANONICAL_LOOKUP.get(name)
    if op is None and aliases:
        normalized = {_normalize_operator_name(k): v for k, v in aliases.items()}
        op = normalized.get(name)
    return op


class _Parser:
    def __init__(self, text: str, aliases: Optional[Mapping[str, Operator]]):
        self.text = text
        self.pos = 0
        self.aliases = aliases

    # -- low-level helpers --------------------------------------------------

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def peek_word(self, word: str) -> bool:
        """True if the next token is `word` as a standalone keyword."""
        self.skip_ws()
        end = self.pos + len(word)
        if self.text[self.pos : end] != word:
            return False
        if end < len(self.text) and (self.text[end].isalnum() or self.text[end] == "_"):
            return False
        return True

    def take_word(self, word: str) -> None:
        self.pos += len(word)

    def expect(self, ch: str) -> None:
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            found = self.text[self.pos] if self.pos < len(self.text) else "end of input"
            raise SellSyntaxError(
                f"expected {ch!r}, found {found!r}", self.pos, expected=ch
            )
        self.pos += 1

    def _scan_until(self, stops: str) -> tuple[str, int]:
        """Consume text up to (not including) any stop char; returns (text, start)."""
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in stops:
            self.pos += 1
        return self.text[start : self.pos], start

    # -- grammar ------------------------------------------------------------

    def parse_expr(self) -> SellExpr:
        terms = [self.parse_term()]
        while self.peek_word("OR"):
            self.take_word("OR")
            terms.append(self.parse_term())
        return make_or(terms) if len(terms) > 1 else terms[0]

    def parse_term(self) -> SellExpr:
        factors = [self.parse_factor()]
        while self.peek_word("AND"):
            self.take_word("AND")
            factors.append(self.parse_factor())
        return make_and(factors) if len(factors) > 1 else factors[0]

    def parse_factor(self) -> SellExpr:
        self.expect("(")
        # A '(' opens a condition when a '#' appears before any paren,
        # otherwise a group.  Condition bodies never contain parens.
        probe = self.pos
        while probe < len(self.text) and self.text[probe] not in "#()":
            probe += 1
        if probe < len(self.text) and self.text[probe] == "#":
            return self.parse_condition_body()
        inner = self.parse_expr()
        self.expect(")")
        return inner

    def parse_condition_body(self) -> Condition:
        key_text, key_start = self._scan_until("#()")
        key = key_text.strip()
        if not key:
            raise SellSyntaxError("condition key is empty", key_start, expected="key")
        self.expect("#")
        op_text, op_start = self._scan_until("#()")
        self.expect("#")
        operator = resolve_operator(op_text, self.aliases)
        if operator is None:
            raise UnknownOperatorError(op_text.strip(), op_start)
        value_text, value_start = self._scan_until("#()")
        self.expect(")")
        value_text = value_text.strip()
        if not value_text:
            raise SellSyntaxError("condition value is empty", value_start, expected="value")
        if operator is Operator.BETWEEN:
            try:
                value = value_for(operator, value_text)
            except ValueError:
                raise MalformedBetweenValueError(value_text, value_start) from None
        else:
            try:
                value = value_for(operator, value_text)
            except ValueError:
                # Non-decimal value on a numeric operator: keep the text so
                # the validator can report it against a catalog.
                from .ast import Text

                value = Text(value_text)
        return Condition(key=key, operator=operator, value=value)


def parse(
    text: str,
    aliases: Optional[Mapping[str, Operator]] = DEFAULT_OPERATOR_ALIASES,
) -> SellExpr:
    """Parse SELL surface text into a canonical AST.

    `aliases` maps extra operator spellings onto canonical operators; pass
    None (or an empty mapping) for strict canonical-names-only parsing.
    """
    if not text or not text.strip():
        raise SellSyntaxError("empty input", 0, expected="expression")
    parser = _Parser(normalize_surface(text), aliases)
    expr = parser.parse_expr()
    if not parser.at_end():
        raise SellSyntaxError(
            f"unexpected trailing text {parser.text[parser.pos:][:20]!r}",
            parser.pos,
            expected="end of input",
        )
    return expr


def find_sell(
    text: str,
    aliases: Optional[Mapping[str, Operator]] = DEFAULT_OPERATOR_ALIASES,
) -> Optional[SellExpr]:
    """Best-effort extraction of one SELL expression from free text.

    Meant for model completions that wrap the expression in prose or
    labels. Tries the whole text, then its first-(..last-) span, then each
    line from the bottom up. Returns None when nothing parses.
    """
    def attempt(candidate: str) -> Optional[SellExpr]:
        candidate = candidate.strip().rstrip(".").strip()
        for label in ("Answer:", "SELL:"):
            if candidate.startswith(label):
                candidate = candidate[len(label):].strip()
        if not candidate:
            return None
        try:
            return parse(candidate, aliases)
        except SellParseError:
            return None

    whole = attempt(text)
    if whole is not None:
        return whole
    normalized = normalize_surface(text)
    start, end = normalized.find("("), normalized.rfind(")")
    if 0 <= start < end:
        spanned = attempt(normalized[start:end + 1])
        if spanned is not None:
            return spanned
    for line in reversed(normalized.splitlines()):
        found = attempt(line)
        if found is not None:
            return found
        start, end = line.find("("), line.rfind(")")
        if 0 <= start < end:
            found = attempt(line[start:end + 1])
            if found is not None:
                return found
    return None
