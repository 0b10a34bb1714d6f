"""
Basis-Function Expressions.

A small immutable expression tree over named variables, a Pratt-style parser
for the text form, scalar and column-wise evaluation, and a printer whose
output parses back to an evaluation-equivalent tree.

Grammar (precedence high to low, binaries left-associative):
    ^ integer power   >   unary minus   >   * /   >   + -
    function calls: sqrt(e), abs(e), log10(e); decimal literals; identifiers.
"""
import math
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from app.core.exceptions import (
    ExpressionDomainError,
    ExpressionSyntaxError,
    UnboundVariableError,
    UnknownIdentifierError,
)

FUNCTIONS = ("sqrt", "abs", "log10")

# printing precedence levels
_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5

ArrayLike = Union[float, np.ndarray]


class Expression:
    """Base class of all expression nodes. Nodes are frozen dataclasses."""

    precedence = _PREC_ATOM

    def evaluate(self, row: Mapping[str, float]) -> float:
        """Evaluate at one point with IEEE double arithmetic."""
        raise NotImplementedError

    def evaluate_columns(self, columns: Mapping[str, np.ndarray]) -> np.ndarray:
        """Evaluate on aligned data columns; domain errors carry the first bad index."""
        raise NotImplementedError

    def variables(self) -> frozenset:
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_text()

    def is_constant_one(self) -> bool:
        return isinstance(self, Constant) and self.value == 1.0

    def raw_variable(self) -> Optional[str]:
        """Name of the variable if the expression is a bare variable."""
        return self.name if isinstance(self, Variable) else None


def _wrap(child: Expression, min_prec: int, strict: bool = False) -> str:
    text = child.to_text()
    prec = child.precedence
    if prec < min_prec or (strict and prec == min_prec):
        return f"({text})"
    return text


def _format_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


@dataclass(frozen=True)
class Constant(Expression):
    value: float

    @property
    def precedence(self) -> int:
        return _PREC_NEG if self.value < 0 or math.copysign(1.0, self.value) < 0 else _PREC_ATOM

    def evaluate(self, row):
        return self.value

    def evaluate_columns(self, columns):
        n = _column_length(columns)
        return np.full(n, self.value, dtype=float)

    def variables(self):
        return frozenset()

    def to_text(self):
        if self.precedence == _PREC_NEG:
            return f"-{_format_number(-self.value)}"
        return _format_number(self.value)


@dataclass(frozen=True)
class Variable(Expression):
    name: str

    def evaluate(self, row):
        try:
            return float(row[self.name])
        except KeyError:
            raise UnboundVariableError(self.name) from None

    def evaluate_columns(self, columns):
        try:
            return np.asarray(columns[self.name], dtype=float)
        except KeyError:
            raise UnboundVariableError(self.name) from None

    def variables(self):
        return frozenset((self.name,))

    def to_text(self):
        return self.name


@dataclass(frozen=True)
class BinaryOp(Expression):
    op: str  # one of + - * /
    left: Expression
    right: Expression

    @property
    def precedence(self) -> int:
        return _PREC_ADD if self.op in "+-" else _PREC_MUL

    def evaluate(self, row):
        lhs = self.left.evaluate(row)
        rhs = self.right.evaluate(row)
        if self.op == "+":
            return lhs + rhs
        if self.op == "-":
            return lhs - rhs
        if self.op == "*":
            return lhs * rhs
        if rhs == 0.0:
            raise ExpressionDomainError(f"division by zero in '{self.to_text()}'")
        return lhs / rhs

    def evaluate_columns(self, columns):
        lhs = self.left.evaluate_columns(columns)
        rhs = self.right.evaluate_columns(columns)
        if self.op == "+":
            return lhs + rhs
        if self.op == "-":
            return lhs - rhs
        if self.op == "*":
            return lhs * rhs
        bad = np.flatnonzero(rhs == 0.0)
        if bad.size:
            raise ExpressionDomainError(
                f"division by zero in '{self.to_text()}'", index=int(bad[0])
            )
        return lhs / rhs

    def variables(self):
        return self.left.variables() | self.right.variables()

    def to_text(self):
        prec = self.precedence
        left = _wrap(self.left, prec)
        right = _wrap(self.right, prec, strict=True)
        if self.op in "+-":
            return f"{left} {self.op} {right}"
        return f"{left}{self.op}{right}"


@dataclass(frozen=True)
class Negate(Expression):
    operand: Expression
    precedence = _PREC_NEG

    def evaluate(self, row):
        return -self.operand.evaluate(row)

    def evaluate_columns(self, columns):
        return -self.operand.evaluate_columns(columns)

    def variables(self):
        return self.operand.variables()

    def to_text(self):
        return f"-{_wrap(self.operand, _PREC_NEG, strict=True)}"


@dataclass(frozen=True)
class Power(Expression):
    base: Expression
    exponent: int
    precedence = _PREC_POW

    def evaluate(self, row):
        value = self.base.evaluate(row)
        if value == 0.0 and self.exponent < 0:
            raise ExpressionDomainError(f"division by zero in '{self.to_text()}'")
        try:
            return value ** self.exponent
        except OverflowError:
            raise ExpressionDomainError(f"overflow in '{self.to_text()}'") from None

    def evaluate_columns(self, columns):
        values = self.base.evaluate_columns(columns)
        if self.exponent < 0:
            bad = np.flatnonzero(values == 0.0)
            if bad.size:
                raise ExpressionDomainError(
                    f"division by zero in '{self.to_text()}'", index=int(bad[0])
                )
        # python float powers keep scalar and column paths bit-identical
        out = np.empty(len(values))
        for i, v in enumerate(values.tolist()):
            try:
                out[i] = v ** self.exponent
            except OverflowError:
                raise ExpressionDomainError(f"overflow in '{self.to_text()}'", index=i) from None
        return out

    def variables(self):
        return self.base.variables()

    def to_text(self):
        base = _wrap(self.base, _PREC_POW, strict=True)
        exponent = str(self.exponent) if self.exponent >= 0 else f"({self.exponent})"
        return f"{base}^{exponent}"


@dataclass(frozen=True)
class Function(Expression):
    name: str  # sqrt | abs | log10
    argument: Expression

    def evaluate(self, row):
        value = self.argument.evaluate(row)
        if self.name == "abs":
            return abs(value)
        if self.name == "sqrt":
            if value < 0.0:
                raise ExpressionDomainError(
                    f"sqrt of negative argument {value!r} in '{self.to_text()}'"
                )
            return math.sqrt(value)
        if value <= 0.0:
            raise ExpressionDomainError(
                f"log10 of non-positive argument {value!r} in '{self.to_text()}'"
            )
        return math.log10(value)

    def evaluate_columns(self, columns):
        values = self.argument.evaluate_columns(columns)
        if self.name == "abs":
            return np.abs(values)
        if self.name == "sqrt":
            bad = np.flatnonzero(values < 0.0)
            if bad.size:
                raise ExpressionDomainError(
                    f"sqrt of negative argument in '{self.to_text()}'", index=int(bad[0])
                )
            return np.sqrt(values)
        bad = np.flatnonzero(values <= 0.0)
        if bad.size:
            raise ExpressionDomainError(
                f"log10 of non-positive argument in '{self.to_text()}'", index=int(bad[0])
            )
        return np.array([math.log10(v) for v in values.tolist()], dtype=float)

    def variables(self):
        return self.argument.variables()

    def to_text(self):
        return f"{self.name}({self.argument.to_text()})"


def _column_length(columns: Mapping[str, np.ndarray]) -> int:
    for values in columns.values():
        return len(values)
    return 1


# =============================================================================
# PARSER
# =============================================================================

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number | ident | op | end
    text: str
    offset: int


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def _tokenize(text: str) -> Iterator[_Token]:
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.end() == pos:
            offset = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExpressionSyntaxError(
                f"unexpected character {text[offset]!r}", _byte_offset(text, offset)
            )
        kind = match.lastgroup
        start = match.start(kind)
        yield _Token(kind, match.group(kind), _byte_offset(text, start))
        pos = match.end()
    yield _Token("end", "", _byte_offset(text, len(text)))


# binding powers of infix operators
_LBP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_BP = 30


class _Parser:
    """Pratt parser; each token kind has a prefix (nud) and infix (led) role."""

    def __init__(self, text: str, variables: Iterable[str]):
        self.text = text
        self.variables = set(variables)
        self.tokens = _tokenize(text)
        self.token = next(self.tokens)

    def advance(self) -> _Token:
        current = self.token
        self.token = next(self.tokens)
        return current

    def expect(self, op: str) -> None:
        if self.token.kind != "op" or self.token.text != op:
            found = self.token.text or "end of input"
            raise ExpressionSyntaxError(f"expected '{op}', found '{found}'", self.token.offset)
        self.advance()

    def parse(self) -> Expression:
        expr = self.expression(0)
        if self.token.kind != "end":
            raise ExpressionSyntaxError(f"unexpected '{self.token.text}'", self.token.offset)
        return expr

    def expression(self, rbp: int) -> Expression:
        left = self.nud(self.advance())
        while self._lbp(self.token) > rbp:
            left = self.led(self.advance(), left)
        return left

    def _lbp(self, token: _Token) -> int:
        if token.kind == "op":
            return _LBP.get(token.text, 0)
        return 0

    def nud(self, token: _Token) -> Expression:
        if token.kind == "number":
            return Constant(float(token.text))
        if token.kind == "ident":
            if token.text in FUNCTIONS:
                self.expect("(")
                argument = self.expression(0)
                self.expect(")")
                return Function(token.text, argument)
            if token.text not in self.variables:
                raise UnknownIdentifierError(token.text, token.offset)
            return Variable(token.text)
        if token.kind == "op" and token.text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        if token.kind == "op" and token.text == "-":
            return Negate(self.expression(_UNARY_BP))
        found = token.text or "end of input"
        raise ExpressionSyntaxError(f"unexpected '{found}'", token.offset)

    def led(self, token: _Token, left: Expression) -> Expression:
        if token.text == "^":
            return Power(left, self.integer_exponent())
        right = self.expression(_LBP[token.text])
        return BinaryOp(token.text, left, right)

    def integer_exponent(self) -> int:
        parenthesized = self.token.kind == "op" and self.token.text == "("
        if parenthesized:
            self.advance()
        sign = 1
        if self.token.kind == "op" and self.token.text == "-":
            self.advance()
            sign = -1
        token = self.advance()
        if token.kind != "number" or not token.text.isdigit():
            raise ExpressionSyntaxError("exponent must be an integer literal", token.offset)
        if parenthesized:
            self.expect(")")
        return sign * int(token.text)


def parse(text: str, variables: Sequence[str]) -> Expression:
    """
    Parse expression text over the given variable names.

    Args:
        text: Expression source, e.g. "sqrt(abs(h1 - h2))"
        variables: Names allowed as identifiers

    Returns:
        The expression tree

    Raises:
        ExpressionSyntaxError: Grammar violation (carries the byte offset)
        UnknownIdentifierError: Identifier not in ``variables``
    """
    return _Parser(text, variables).parse()


def evaluate(expression: Expression, row: Mapping[str, float]) -> float:
    return expression.evaluate(row)
