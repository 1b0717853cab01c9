"""Scalar expressions in ``x`` and ``y`` with exact symbolic derivatives.

Grammar (whitespace insignificant)::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := atom ["^" integer] | "-" factor
    atom   := number | "pi" | "x" | "y" | func "(" expr ")" | "(" expr ")"
    func   := sin | cos | tan | exp | sqrt | atan

Expressions are immutable trees.  Evaluation is exact recursive
interpretation; a compiled fast path is used for hot loops and falls back to
the interpreter whenever it trips over a domain problem, so that errors
always name the offending subexpression.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Unary", "Binary", "Power",
    "ExprError", "ExprSyntaxError", "UnknownIdentifierError", "EvaluationDomainError",
    "parse", "evaluate", "differentiate", "FUNCTIONS",
]

FUNCTIONS = ("sin", "cos", "tan", "exp", "sqrt", "atan")

# printing precedence
_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    """Malformed input; ``offset`` is a byte offset into the UTF-8 text."""

    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(set(expected)))
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class UnknownIdentifierError(ExprSyntaxError):
    def __init__(self, name, offset):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", offset)


class EvaluationDomainError(ExprError, ArithmeticError):
    """Raised when a partial function is evaluated outside its domain."""

    def __init__(self, reason, subexpr):
        self.reason = reason
        self.subexpr = subexpr
        super().__init__(f"{reason} in subexpression '{subexpr}'")


# ---------------------------------------------------------------------------
# tree


class Expr:
    """Base class of expression nodes."""

    __slots__ = ()

    def evaluate(self, x, y):
        return evaluate(self, x, y)

    def diff(self, var):
        return differentiate(self, var)

    def __call__(self, x, y):
        """Fast evaluation; identical results to :meth:`evaluate`."""
        fn = _compiled(self)
        try:
            value = fn(x, y)
        except (ValueError, ZeroDivisionError, OverflowError):
            # re-run the interpreter to report the offending node
            return evaluate(self, x, y)
        return value

    def vectorized(self, x, y):
        """Evaluate on numpy arrays; domain violations give nan/inf, not errors."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        fn = _compiled_numpy(self)
        with np.errstate(all="ignore"):
            out = fn(x, y)
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, y).shape).copy()

    @property
    def is_constant(self):
        return not _has_vars(self)

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ExprError(f"non-finite constant {self.value!r}")


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def __post_init__(self):
        if self.name not in ("x", "y"):
            raise ExprError(f"unknown variable {self.name!r}")


@dataclass(frozen=True)
class Unary(Expr):
    func: str  # 'neg' or one of FUNCTIONS
    arg: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # one of + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Power(Expr):
    base: Expr
    exponent: int


ZERO = Const(0.0)
ONE = Const(1.0)
X = Var("x")
Y = Var("y")


def _has_vars(e):
    if isinstance(e, Var):
        return True
    if isinstance(e, Const):
        return False
    if isinstance(e, Unary):
        return _has_vars(e.arg)
    if isinstance(e, Power):
        return _has_vars(e.base)
    return _has_vars(e.left) or _has_vars(e.right)


# ---------------------------------------------------------------------------
# lexer / parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)

_ATOM_START = ("number", "pi", "x", "y", "(", "-") + FUNCTIONS


@dataclass
class _Token:
    kind: str  # 'number', 'ident', 'op', 'eof'
    text: str
    offset: int  # byte offset


def _tokenize(text):
    tokens = []
    pos = 0
    byte_pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", byte_pos)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(_Token(kind, chunk, byte_pos))
        byte_pos += len(chunk.encode("utf-8"))
        pos = m.end()
    tokens.append(_Token("eof", "", byte_pos))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def is_op(self, *ops):
        return self.tok.kind == "op" and self.tok.text in ops

    def fail(self, expected):
        t = self.tok
        what = "end of input" if t.kind == "eof" else repr(t.text)
        raise ExprSyntaxError(f"unexpected {what}", t.offset, expected)

    def parse(self):
        e = self.expr()
        if self.tok.kind != "eof":
            self.fail(("+", "-", "*", "/", "^", "end of input"))
        return e

    def expr(self):
        e = self.term()
        while self.is_op("+", "-"):
            op = self.advance().text
            e = Binary(op, e, self.term())
        return e

    def term(self):
        e = self.factor()
        while self.is_op("*", "/"):
            op = self.advance().text
            e = Binary(op, e, self.factor())
        return e

    def factor(self):
        if self.is_op("-"):
            self.advance()
            return Unary("neg", self.factor())
        base = self.atom()
        if self.is_op("^"):
            self.advance()
            t = self.tok
            if t.kind != "number" or not t.text.isdigit():
                self.fail(("integer",))
            self.advance()
            return Power(base, int(t.text))
        return base

    def atom(self):
        t = self.tok
        if t.kind == "number":
            self.advance()
            return Const(float(t.text))
        if t.kind == "ident":
            self.advance()
            if t.text == "pi":
                return Const(math.pi)
            if t.text in ("x", "y"):
                return Var(t.text)
            if t.text in FUNCTIONS:
                if not self.is_op("("):
                    self.fail(("(",))
                self.advance()
                arg = self.expr()
                if not self.is_op(")"):
                    self.fail((")",))
                self.advance()
                return Unary(t.text, arg)
            raise UnknownIdentifierError(t.text, t.offset)
        if self.is_op("("):
            self.advance()
            e = self.expr()
            if not self.is_op(")"):
                self.fail((")",))
            self.advance()
            return e
        self.fail(_ATOM_START)


def parse(text):
    """Parse ``text`` into an :class:`Expr`.

    Raises
    ------
    ExprSyntaxError
        With the byte offset of the offending token and the set of tokens
        that would have been accepted there.
    UnknownIdentifierError
        For identifiers outside ``x, y, pi`` and the function names.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# printing


def _fmt_const(v):
    if v == math.pi:
        return "pi"
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _prec(e):
    if isinstance(e, Const):
        return _PREC_NEG if (e.value < 0 or (e.value == 0 and math.copysign(1, e.value) < 0)) else _PREC_ATOM
    if isinstance(e, Var):
        return _PREC_ATOM
    if isinstance(e, Unary):
        return _PREC_NEG if e.func == "neg" else _PREC_ATOM
    if isinstance(e, Power):
        return _PREC_POW
    return _PREC_ADD if e.op in "+-" else _PREC_MUL


def to_text(e):
    """Render an expression in the input grammar; ``parse(to_text(e))`` evaluates identically."""
    if isinstance(e, Const):
        v = e.value
        if math.copysign(1.0, v) < 0:
            return "-" + _fmt_const(-v)
        return _fmt_const(v)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.func == "neg":
            inner = to_text(e.arg)
            return "-" + (inner if _prec(e.arg) >= _PREC_NEG else f"({inner})")
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Power):
        inner = to_text(e.base)
        if _prec(e.base) < _PREC_ATOM:
            inner = f"({inner})"
        return f"{inner}^{e.exponent}"
    p = _prec(e)
    left = to_text(e.left)
    right = to_text(e.right)
    if _prec(e.left) < p:
        left = f"({left})"
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"


# ---------------------------------------------------------------------------
# evaluation


def _tan_checked(a, node=None):
    # odd multiples of pi/2
    k = (a - math.pi / 2) / math.pi
    if abs(k - round(k)) < 1e-12:
        raise EvaluationDomainError("tan at an odd multiple of pi/2", node if node is not None else a)
    return math.tan(a)


def evaluate(e, x, y):
    """Exact recursive evaluation at ``(x, y)``."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return float(x) if e.name == "x" else float(y)
    if isinstance(e, Unary):
        a = evaluate(e.arg, x, y)
        f = e.func
        if f == "neg":
            return -a
        if f == "sin":
            return math.sin(a)
        if f == "cos":
            return math.cos(a)
        if f == "tan":
            return _tan_checked(a, e)
        if f == "exp":
            try:
                return math.exp(a)
            except OverflowError:
                raise EvaluationDomainError("overflow", e) from None
        if f == "sqrt":
            if a < 0:
                raise EvaluationDomainError("sqrt of a negative number", e)
            return math.sqrt(a)
        if f == "atan":
            return math.atan(a)
        raise ExprError(f"unknown function {f!r}")
    if isinstance(e, Power):
        b = evaluate(e.base, x, y)
        try:
            return b ** e.exponent
        except OverflowError:
            raise EvaluationDomainError("overflow", e) from None
    a = evaluate(e.left, x, y)
    b = evaluate(e.right, x, y)
    op = e.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0:
        raise EvaluationDomainError("division by zero", e)
    return a / b


def _source(e, np_mode):
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        a = _source(e.arg, np_mode)
        if e.func == "neg":
            return f"(-{a})"
        if e.func == "tan" and not np_mode:
            return f"_tan({a})"
        name = "arctan" if (np_mode and e.func == "atan") else e.func
        return f"_m.{name}({a})"
    if isinstance(e, Power):
        return f"({_source(e.base, np_mode)})**{e.exponent}"
    return f"({_source(e.left, np_mode)} {e.op} {_source(e.right, np_mode)})"


def _build(e, np_mode):
    src = f"lambda x, y: {_source(e, np_mode)}"
    env = {"_m": np if np_mode else math, "_tan": _tan_checked}
    return eval(src, env)  # noqa: S307 - source is generated from a validated tree


# compiled callables are memoized on the (immutable) node itself; hashing a
# deep tree on every call would dominate the cost of evaluating it


def _compiled(e) -> Callable:
    fn = e.__dict__.get("_fn")
    if fn is None:
        fn = _build(e, False)
        object.__setattr__(e, "_fn", fn)
    return fn


def _compiled_numpy(e) -> Callable:
    fn = e.__dict__.get("_np_fn")
    if fn is None:
        fn = _build(e, True)
        object.__setattr__(e, "_np_fn", fn)
    return fn


# ---------------------------------------------------------------------------
# construction helpers with constant folding


def _c(e):
    return e.value if isinstance(e, Const) else None


def add(a, b):
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None:
        return Const(ca + cb)
    if ca == 0:
        return b
    if cb == 0:
        return a
    return Binary("+", a, b)


def sub(a, b):
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None:
        return Const(ca - cb)
    if cb == 0:
        return a
    if ca == 0:
        return neg(b)
    return Binary("-", a, b)


def mul(a, b):
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None:
        return Const(ca * cb)
    if ca == 0 or cb == 0:
        return ZERO
    if ca == 1:
        return b
    if cb == 1:
        return a
    return Binary("*", a, b)


def div(a, b):
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None and cb != 0:
        return Const(ca / cb)
    if ca == 0:
        return ZERO
    if cb == 1:
        return a
    return Binary("/", a, b)


def neg(a):
    ca = _c(a)
    if ca is not None:
        return Const(-ca)
    if isinstance(a, Unary) and a.func == "neg":
        return a.arg
    return Unary("neg", a)


def power(a, n):
    ca = _c(a)
    if ca is not None:
        return Const(ca ** n)
    if n == 0:
        return ONE
    if n == 1:
        return a
    return Power(a, n)


def func(name, a):
    ca = _c(a)
    if ca is not None and name != "tan" and not (name == "sqrt" and ca < 0):
        return Const(evaluate(Unary(name, a), 0.0, 0.0))
    return Unary(name, a)


# ---------------------------------------------------------------------------
# differentiation


def differentiate(e, var):
    """Exact partial derivative of ``e`` with respect to ``var`` ('x' or 'y')."""
    if var not in ("x", "y"):
        raise ExprError(f"cannot differentiate with respect to {var!r}")
    return _d(e, var)


def _d(e, v):
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if isinstance(e, Unary):
        u = e.arg
        du = _d(u, v)
        if _c(du) == 0:
            return ZERO
        f = e.func
        if f == "neg":
            return neg(du)
        if f == "sin":
            return mul(func("cos", u), du)
        if f == "cos":
            return neg(mul(func("sin", u), du))
        if f == "tan":
            return div(du, power(func("cos", u), 2))
        if f == "exp":
            return mul(e, du)
        if f == "sqrt":
            return div(du, mul(Const(2.0), e))
        if f == "atan":
            return div(du, add(ONE, power(u, 2)))
        raise ExprError(f"unknown function {f!r}")
    if isinstance(e, Power):
        n = e.exponent
        db = _d(e.base, v)
        if n == 0 or _c(db) == 0:
            return ZERO
        return mul(mul(Const(float(n)), power(e.base, n - 1)), db)
    a, b = e.left, e.right
    da, db = _d(a, v), _d(b, v)
    if e.op == "+":
        return add(da, db)
    if e.op == "-":
        return sub(da, db)
    if e.op == "*":
        return add(mul(da, b), mul(a, db))
    # quotient rule
    if _c(db) == 0:
        return div(da, b)
    return div(sub(mul(da, b), mul(a, db)), power(b, 2))
