"""Coefficient expressions: a tiny recursive-descent parser and evaluator.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right associative
    primary := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

``eps`` is always accepted and is bound like a variable at evaluation time.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Union

import numpy as np

from . import stable
from .errors import EvalError, ExprSyntaxError, UnknownIdentifier

EPS = "eps"
FUNCTIONS = ("exp", "ln", "sin", "cos", "erf", "sqrt")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of FUNCTIONS
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


Expr = Union[Num, Var, Unary, Binary]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), _byte_offset(text, start)))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(text, len(text))))
    return tokens


def _byte_offset(text, index):
    return len(text[:index].encode("utf-8"))


class _Parser:
    def __init__(self, text, variables):
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = variables

    @property
    def tok(self):
        return self.tokens[self.i]

    def take(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, value):
        kind, text, off = self.tok
        if text != value or kind != "op":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", off)
        self.i += 1

    def expr(self):
        left = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.take()[1]
            left = Binary(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.take()[1]
            left = Binary(op, left, self.unary())
        return left

    def unary(self):
        if self.tok[0] == "op" and self.tok[1] == "-":
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.tok[0] == "op" and self.tok[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def primary(self):
        kind, text, off = self.take()
        if kind == "num":
            value = float(text)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"literal {text!r} is not finite", off)
            return Num(value)
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg)
            if text == EPS or text in self.variables:
                return Var(text)
            raise UnknownIdentifier(text, off)
        if kind == "op" and text == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", off)


def parse(text: str, variables: Iterable[str]) -> Expr:
    """Parse ``text`` allowing the given variable names (``eps`` is implicit)."""
    p = _Parser(text, frozenset(variables))
    tree = p.expr()
    kind, tok, off = p.tok
    if kind != "end":
        raise ExprSyntaxError(f"unexpected trailing {tok!r}", off)
    return tree


def to_string(e: Expr) -> str:
    """Fully parenthesised text that parses back to the same tree."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{to_string(e.arg)})"
        return f"{e.op}({to_string(e.arg)})"
    return f"({to_string(e.left)} {e.op} {to_string(e.right)})"


def variables(e: Expr) -> frozenset:
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, Unary):
        return variables(e.arg)
    return variables(e.left) | variables(e.right)


def is_constant(e: Expr) -> bool:
    """True when the expression depends on nothing but ``eps``."""
    return variables(e) <= {EPS}


def _finite(v, what):
    if not math.isfinite(v):
        raise EvalError(f"{what} produced {v!r}")
    return v


def _apply_unary(op, a):
    try:
        if op == "neg":
            return -a
        if op == "exp":
            return _finite(math.exp(a), "exp")
        if op == "ln":
            if a <= 0:
                raise EvalError(f"ln of non-positive value {a!r}")
            return math.log(a)
        if op == "sqrt":
            if a < 0:
                raise EvalError(f"sqrt of negative value {a!r}")
            return math.sqrt(a)
        if op == "sin":
            return math.sin(a)
        if op == "cos":
            return math.cos(a)
        if op == "erf":
            return stable.erf(a)
    except OverflowError as exc:
        raise EvalError(f"{op} overflowed at {a!r}") from exc
    raise EvalError(f"unknown function {op!r}")


def _apply_binary(op, a, b):
    if op == "+":
        return _finite(a + b, "+")
    if op == "-":
        return _finite(a - b, "-")
    if op == "*":
        return _finite(a * b, "*")
    if op == "/":
        if b == 0:
            raise EvalError("division by zero")
        return _finite(a / b, "/")
    if a < 0 and b != math.floor(b):
        raise EvalError(f"non-integer power {b!r} of negative base {a!r}")
    if a == 0 and b < 0:
        raise EvalError("zero raised to a negative power")
    try:
        return _finite(math.pow(a, b), "^")
    except OverflowError as exc:
        raise EvalError(f"{a!r}^{b!r} overflowed") from exc


def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate ``e``; every non-finite intermediate raises :class:`EvalError`."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return float(bindings[e.name])
        except KeyError:
            raise EvalError(f"no binding for {e.name!r}") from None
    if isinstance(e, Unary):
        return _apply_unary(e.op, evaluate(e.arg, bindings))
    return _apply_binary(e.op, evaluate(e.left, bindings), evaluate(e.right, bindings))


def compile_expr(e: Expr, names: tuple, eps: float | None = None) -> Callable[..., float]:
    """Positional callable ``f(*values)`` over ``names``; ``eps`` is baked in if given.

    Same semantics as :func:`evaluate`, but the tree walk is resolved once into
    nested closures so hot loops (quadrature, Newton) stay cheap.
    """
    index = {n: i for i, n in enumerate(names)}

    def build(node):
        if isinstance(node, Num):
            v = node.value
            return lambda args: v
        if isinstance(node, Var):
            if node.name == EPS and eps is not None and EPS not in index:
                v = float(eps)
                return lambda args: v
            if node.name not in index:
                raise EvalError(f"no binding for {node.name!r}")
            i = index[node.name]
            return lambda args: args[i]
        if isinstance(node, Unary):
            f = build(node.arg)
            op = node.op
            if op == "neg":
                return lambda args: -f(args)
            return lambda args: _apply_unary(op, f(args))
        fl, fr = build(node.left), build(node.right)
        op = node.op
        return lambda args: _apply_binary(op, fl(args), fr(args))

    body = build(e)
    return lambda *args: body(args)


_NP_UNARY = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
}


def compile_expr_vec(e: Expr, names: tuple, eps: float | None = None) -> Callable[..., np.ndarray]:
    """Array version of :func:`compile_expr`; raises :class:`EvalError` on any bad element."""
    index = {n: i for i, n in enumerate(names)}
    verf = np.vectorize(stable.erf, otypes=[float])

    def check(v, what):
        if not np.all(np.isfinite(v)):
            raise EvalError(f"{what} produced a non-finite value")
        return v

    def build(node):
        if isinstance(node, Num):
            v = node.value
            return lambda args: np.full(np.shape(args[0]) if args else (), v)
        if isinstance(node, Var):
            if node.name == EPS and eps is not None and EPS not in index:
                v = float(eps)
                return lambda args: np.full(np.shape(args[0]) if args else (), v)
            if node.name not in index:
                raise EvalError(f"no binding for {node.name!r}")
            i = index[node.name]
            return lambda args: np.asarray(args[i], dtype=float)
        if isinstance(node, Unary):
            f = build(node.arg)
            op = node.op
            if op == "neg":
                return lambda args: -f(args)
            if op in _NP_UNARY:
                g = _NP_UNARY[op]
                return lambda args: check(g(f(args)), op)
            if op == "erf":
                return lambda args: verf(f(args))

            def domain(args, op=op):
                a = f(args)
                if op == "ln":
                    if np.any(a <= 0):
                        raise EvalError("ln of non-positive value")
                    return np.log(a)
                if np.any(a < 0):
                    raise EvalError("sqrt of negative value")
                return np.sqrt(a)

            return domain
        fl, fr = build(node.left), build(node.right)
        op = node.op

        def binary(args):
            a, b = fl(args), fr(args)
            if op == "+":
                return check(a + b, "+")
            if op == "-":
                return check(a - b, "-")
            if op == "*":
                return check(a * b, "*")
            if op == "/":
                if np.any(b == 0):
                    raise EvalError("division by zero")
                return check(a / b, "/")
            if np.any((a < 0) & (b != np.floor(b))):
                raise EvalError("non-integer power of negative base")
            if np.any((a == 0) & (b < 0)):
                raise EvalError("zero raised to a negative power")
            return check(np.power(a, b), "^")

        return binary

    body = build(e)

    def run(*args):
        with np.errstate(all="ignore"):
            return body(args)

    return run
