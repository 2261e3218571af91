"""Expression trees: the symbolic output format of the fitter.

Nodes are constants, variables ``x0..x{n-1}``, unary ops
``sin cos exp sqrt log neg`` and binary ops ``+ - * / ^``.

The serialization grammar is a bit-exact contract: infix with fully explicit
parentheses, constants in shortest-roundtrip decimal, ``(- e)`` for negation
(the space distinguishes it from a negative literal).  ``to_string`` and
``parse`` are exact inverses on this grammar.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ExpressionSyntaxError

UNARY_FUNCS = ("sin", "cos", "exp", "sqrt", "log")
UNARY_OPS = UNARY_FUNCS + ("neg",)
BINARY_OPS = ("+", "-", "*", "/", "^")


class Expr:
    """Base class; concrete nodes are Const, Var, Unary, Binary."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_string(self)


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class Var(Expr):
    index: int


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    arg: Expr

    def __post_init__(self):
        if self.op not in UNARY_OPS:
            raise ValueError(f"unknown unary op {self.op!r}")


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown binary op {self.op!r}")


# ---------------------------------------------------------------------------
# printing


def to_string(expr: Expr) -> str:
    if isinstance(expr, Const):
        if not math.isfinite(expr.value):
            raise ValueError("cannot serialize a non-finite constant")
        return repr(expr.value)
    if isinstance(expr, Var):
        return f"x{expr.index}"
    if isinstance(expr, Unary):
        if expr.op == "neg":
            return f"(- {to_string(expr.arg)})"
        return f"{expr.op}({to_string(expr.arg)})"
    if isinstance(expr, Binary):
        return f"({to_string(expr.left)} {expr.op} {to_string(expr.right)})"
    raise TypeError(f"not an expression node: {expr!r}")


# ---------------------------------------------------------------------------
# parsing

_NUMBER_RE = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_NAME_RE = re.compile(r"[a-z]+\d*")


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            m = _NUMBER_RE.match(text, i)
            tokens.append(m.group(0))
            i = m.end()
            continue
        if ch == "-":
            # A minus folds into a numeric literal only when it starts an
            # operand position and touches the digits (no space).
            prev = tokens[-1] if tokens else None
            operand_pos = prev is None or prev == "(" or prev in BINARY_OPS
            if operand_pos and i + 1 < n and (text[i + 1].isdigit() or text[i + 1] == "."):
                m = _NUMBER_RE.match(text, i + 1)
                tokens.append("-" + m.group(0))
                i = m.end()
                continue
            tokens.append("-")
            i += 1
            continue
        if ch in "+*/^()":
            tokens.append(ch)
            i += 1
            continue
        if ch.isalpha():
            m = _NAME_RE.match(text, i)
            if m is None:
                raise ExpressionSyntaxError(f"bad token at position {i}: {text[i:i+10]!r}")
            tokens.append(m.group(0))
            i = m.end()
            continue
        raise ExpressionSyntaxError(f"unexpected character {ch!r} at position {i}")
    return tokens


_NUMERIC_TOKEN_RE = re.compile(r"-?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?\Z")
_VAR_TOKEN_RE = re.compile(r"x(\d+)\Z")


class _Parser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ExpressionSyntaxError("unexpected end of expression")
        self.pos += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.take()
        if got != tok:
            raise ExpressionSyntaxError(f"expected {tok!r}, got {got!r}")

    def parse_operand(self) -> Expr:
        tok = self.take()
        if _NUMERIC_TOKEN_RE.match(tok):
            return Const(float(tok))
        m = _VAR_TOKEN_RE.match(tok)
        if m:
            return Var(int(m.group(1)))
        if tok in UNARY_FUNCS:
            self.expect("(")
            arg = self.parse_operand()
            self.expect(")")
            return Unary(tok, arg)
        if tok == "(":
            if self.peek() == "-":
                self.take()
                arg = self.parse_operand()
                self.expect(")")
                return Unary("neg", arg)
            left = self.parse_operand()
            op = self.take()
            if op not in BINARY_OPS:
                raise ExpressionSyntaxError(f"expected a binary operator, got {op!r}")
            right = self.parse_operand()
            self.expect(")")
            return Binary(op, left, right)
        raise ExpressionSyntaxError(f"unexpected token {tok!r}")


def parse(text: str) -> Expr:
    """Parse a serialized expression; inverse of :func:`to_string`."""
    parser = _Parser(_tokenize(text))
    expr = parser.parse_operand()
    if parser.peek() is not None:
        raise ExpressionSyntaxError(f"trailing input from token {parser.peek()!r}")
    return expr


# ---------------------------------------------------------------------------
# evaluation

_UNARY_EVAL = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "log": np.log,
    "neg": np.negative,
}


def evaluate(expr: Expr, X) -> np.ndarray:
    """Evaluate over a batch, honest IEEE semantics (NaN/inf may appear).

    Args:
        expr: expression tree.
        X: array (n_rows, n_vars); a 1-D array is treated as one row.
    Returns:
        array of length n_rows.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n_rows = X.shape[0]

    def rec(e: Expr) -> np.ndarray:
        if isinstance(e, Const):
            return np.full(n_rows, e.value)
        if isinstance(e, Var):
            if e.index >= X.shape[1]:
                raise ExpressionSyntaxError(
                    f"expression uses x{e.index} but data has {X.shape[1]} columns")
            return X[:, e.index]
        if isinstance(e, Unary):
            return _UNARY_EVAL[e.op](rec(e.arg))
        l, r = rec(e.left), rec(e.right)
        if e.op == "+":
            return l + r
        if e.op == "-":
            return l - r
        if e.op == "*":
            return l * r
        if e.op == "/":
            return l / r
        return np.power(l, r)

    with np.errstate(all="ignore"):
        return rec(expr)


# ---------------------------------------------------------------------------
# structure helpers

def count_nodes(expr: Expr) -> int:
    if isinstance(expr, (Const, Var)):
        return 1
    if isinstance(expr, Unary):
        return 1 + count_nodes(expr.arg)
    return 1 + count_nodes(expr.left) + count_nodes(expr.right)


def variables_used(expr: Expr) -> set[int]:
    if isinstance(expr, Const):
        return set()
    if isinstance(expr, Var):
        return {expr.index}
    if isinstance(expr, Unary):
        return variables_used(expr.arg)
    return variables_used(expr.left) | variables_used(expr.right)


def map_constants(expr: Expr, fn) -> Expr:
    """Rebuild the tree with fn applied to every constant value."""
    if isinstance(expr, Const):
        return Const(fn(expr.value))
    if isinstance(expr, Var):
        return expr
    if isinstance(expr, Unary):
        return Unary(expr.op, map_constants(expr.arg, fn))
    return Binary(expr.op, map_constants(expr.left, fn), map_constants(expr.right, fn))


def _is_const(e: Expr, value=None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def simplify(expr: Expr) -> Expr:
    """Prune zero-coefficient subtrees and collapse constant subtrees.

    Folding only happens when the folded value is finite, so division by a
    zero constant and similar degeneracies keep their structure.
    """
    if isinstance(expr, (Const, Var)):
        return expr

    if isinstance(expr, Unary):
        arg = simplify(expr.arg)
        if expr.op == "neg":
            if isinstance(arg, Const):
                return Const(-arg.value)
            if isinstance(arg, Unary) and arg.op == "neg":
                return arg.arg
            return Unary("neg", arg)
        if isinstance(arg, Const):
            value = float(_UNARY_EVAL[expr.op](arg.value))
            if math.isfinite(value):
                return Const(value)
        return Unary(expr.op, arg)

    left = simplify(expr.left)
    right = simplify(expr.right)
    op = expr.op
    if isinstance(left, Const) and isinstance(right, Const):
        folded = evaluate(Binary(op, left, right), np.zeros((1, 1)))[0]
        if math.isfinite(folded):
            return Const(float(folded))
    if op == "+":
        if _is_const(left, 0.0):
            return right
        if _is_const(right, 0.0):
            return left
    elif op == "-":
        if _is_const(right, 0.0):
            return left
        if _is_const(left, 0.0):
            return simplify(Unary("neg", right))
    elif op == "*":
        if _is_const(left, 0.0) or _is_const(right, 0.0):
            return Const(0.0)
        if _is_const(left, 1.0):
            return right
        if _is_const(right, 1.0):
            return left
    elif op == "/":
        if _is_const(left, 0.0) and not _is_const(right, 0.0):
            return Const(0.0)
        if _is_const(right, 1.0):
            return left
    elif op == "^":
        if _is_const(right, 1.0):
            return left
        if _is_const(right, 0.0):
            return Const(1.0)
    return Binary(op, left, right)
