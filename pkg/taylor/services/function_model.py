# taylor/services/function_model.py
# Scalar expressions in the single variable x: parse, differentiate, evaluate.
# Trees are immutable; compiled evaluators are cached on each node.

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import mpmath
import numpy as np

from taylor.exceptions import DomainError, ExpressionSyntaxError, UnknownIdentifierError

logger = logging.getLogger(__name__)

FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt")
BINARY_SYMBOLS = {"add": "+", "sub": "-", "mul": "*", "div": "/"}

# Printing precedence
_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5

_EVAL_ERRORS = (ValueError, ZeroDivisionError, OverflowError, FloatingPointError)


# ------------------------------- Tree nodes -------------------------------

class Expression:
    """Base of the expression tree. Subclasses are frozen dataclasses."""

    def to_text(self) -> str:
        return _text(self)[0]

    def __str__(self) -> str:
        return self.to_text()

    def source(self) -> str:
        """Python source of the expression body, in terms of `x` and the backend names."""
        return _source(self)

    @cached_property
    def math_function(self) -> Callable:
        return _compile(self, _MATH_NAMESPACE)

    @cached_property
    def numpy_function(self) -> Callable:
        return _compile(self, _NUMPY_NAMESPACE)

    @cached_property
    def mpmath_function(self) -> Callable:
        return _compile(self, _MPMATH_NAMESPACE)


@dataclass(frozen=True)
class Const(Expression):
    value: float


@dataclass(frozen=True)
class Var(Expression):
    pass


@dataclass(frozen=True)
class Unary(Expression):
    op: str  # neg, sin, cos, exp, ln, sqrt
    arg: Expression


@dataclass(frozen=True)
class Binary(Expression):
    op: str  # add, sub, mul, div
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Power(Expression):
    base: Expression
    exponent: float


X = Var()
ZERO = Const(0.0)
ONE = Const(1.0)


def is_const(e: Expression, value: float | None = None) -> bool:
    if not isinstance(e, Const):
        return False
    return value is None or e.value == value


# ------------------------------- Parsing -------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^])"
    r"|(?P<lparen>\()"
    r"|(?P<rparen>\))"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    position: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    """
    Recursive descent over the fixed grammar:
        expr    := term (('+' | '-') term)*
        term    := unary (('*' | '/') unary)*
        unary   := ('-' | '+') unary | power
        power   := primary ('^' unary)?        (exponent must fold to a constant)
        primary := number | 'x' | func '(' expr ')' | '(' expr ')'
    """

    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.index = 0

    def _peek(self) -> _Token:
        return self.tokens[self.index]

    def _advance(self) -> _Token:
        tok = self.tokens[self.index]
        if tok.kind != "end":
            self.index += 1
        return tok

    def _at_op(self, symbols: str) -> bool:
        tok = self._peek()
        return tok.kind == "op" and tok.text in symbols

    def _expect(self, kind: str, what: str):
        tok = self._advance()
        if tok.kind != kind:
            raise ExpressionSyntaxError(f"expected {what}", tok.position)
        return tok

    def parse(self) -> Expression:
        node = self._expr()
        tok = self._peek()
        if tok.kind != "end":
            raise ExpressionSyntaxError(f"unexpected {tok.text!r}", tok.position)
        return node

    def _expr(self) -> Expression:
        node = self._term()
        while self._at_op("+-"):
            op = "add" if self._advance().text == "+" else "sub"
            node = Binary(op, node, self._term())
        return node

    def _term(self) -> Expression:
        node = self._unary()
        while self._at_op("*/"):
            op = "mul" if self._advance().text == "*" else "div"
            node = Binary(op, node, self._unary())
        return node

    def _unary(self) -> Expression:
        if self._at_op("-"):
            self._advance()
            return Unary("neg", self._unary())
        if self._at_op("+"):
            self._advance()
            return self._unary()
        return self._power()

    def _power(self) -> Expression:
        base = self._primary()
        if not self._at_op("^"):
            return base
        self._advance()
        start = self._peek().position
        exponent = simplify(self._unary())
        if not isinstance(exponent, Const):
            raise ExpressionSyntaxError("exponent must be a constant", start)
        return Power(base, exponent.value)

    def _primary(self) -> Expression:
        tok = self._advance()
        if tok.kind == "number":
            return Const(float(tok.text))
        if tok.kind == "ident":
            if tok.text == "x":
                return X
            if tok.text in FUNCTIONS:
                self._expect("lparen", f"'(' after {tok.text}")
                arg = self._expr()
                self._expect("rparen", "')'")
                return Unary(tok.text, arg)
            raise UnknownIdentifierError(tok.text, tok.position)
        if tok.kind == "lparen":
            node = self._expr()
            self._expect("rparen", "')'")
            return node
        if tok.kind == "end":
            raise ExpressionSyntaxError("unexpected end of input", tok.position)
        raise ExpressionSyntaxError(f"unexpected {tok.text!r}", tok.position)


def parse(text: str) -> Expression:
    """Parse an ASCII expression in x. Positions in errors are 0-based character offsets."""
    return _Parser(text).parse()


# ------------------------------- Simplification -------------------------------

def _fold(op: str, *args: float) -> float | None:
    """Apply op to constants exactly as the math backend would; None if the result is not a finite real."""
    try:
        value = _MATH_OPS[op](*args)
    except _EVAL_ERRORS:
        return None
    if isinstance(value, complex) or not math.isfinite(value):
        return None
    return float(value)


def add(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        folded = _fold("add", a.value, b.value)
        if folded is not None:
            return Const(folded)
    if is_const(a, 0.0):
        return b
    if is_const(b, 0.0):
        return a
    return Binary("add", a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        folded = _fold("sub", a.value, b.value)
        if folded is not None:
            return Const(folded)
    if is_const(b, 0.0):
        return a
    if is_const(a, 0.0):
        return neg(b)
    return Binary("sub", a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        folded = _fold("mul", a.value, b.value)
        if folded is not None:
            return Const(folded)
    if is_const(a, 0.0) or is_const(b, 0.0):
        return ZERO
    if is_const(a, 1.0):
        return b
    if is_const(b, 1.0):
        return a
    return Binary("mul", a, b)


def div(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        folded = _fold("div", a.value, b.value)
        if folded is not None:
            return Const(folded)
    if is_const(b, 1.0):
        return a
    return Binary("div", a, b)


def neg(a: Expression) -> Expression:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def func(op: str, a: Expression) -> Expression:
    if op == "neg":
        return neg(a)
    if isinstance(a, Const):
        folded = _fold(op, a.value)
        if folded is not None:
            return Const(folded)
    return Unary(op, a)


def power(base: Expression, exponent: float) -> Expression:
    if exponent == 1.0:
        return base
    if exponent == 0.0:
        return ONE
    if isinstance(base, Const):
        folded = _fold("pow", base.value, exponent)
        if folded is not None:
            return Const(folded)
    return Power(base, exponent)


def simplify(e: Expression) -> Expression:
    """Constant folding plus identity elimination (0+e, e-0, 1*e, 0*e, e/1, e^1, e^0, --e)."""
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Unary):
        return func(e.op, simplify(e.arg))
    if isinstance(e, Binary):
        return _SMART[e.op](simplify(e.left), simplify(e.right))
    if isinstance(e, Power):
        return power(simplify(e.base), e.exponent)
    raise TypeError(f"not an expression node: {e!r}")


_SMART = {"add": add, "sub": sub, "mul": mul, "div": div}


# ------------------------------- Differentiation -------------------------------

def _raw_derivative(e: Expression) -> Expression:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Unary):
        u, du = e.arg, _raw_derivative(e.arg)
        if e.op == "neg":
            return Unary("neg", du)
        if e.op == "sin":
            return Binary("mul", Unary("cos", u), du)
        if e.op == "cos":
            return Binary("mul", Unary("neg", Unary("sin", u)), du)
        if e.op == "exp":
            return Binary("mul", Unary("exp", u), du)
        if e.op == "ln":
            return Binary("div", du, u)
        if e.op == "sqrt":
            return Binary("div", du, Binary("mul", Const(2.0), Unary("sqrt", u)))
    if isinstance(e, Binary):
        u, v = e.left, e.right
        du, dv = _raw_derivative(u), _raw_derivative(v)
        if e.op in ("add", "sub"):
            return Binary(e.op, du, dv)
        if e.op == "mul":
            return Binary("add", Binary("mul", du, v), Binary("mul", u, dv))
        if e.op == "div":
            if isinstance(v, Const):
                return Binary("div", du, v)
            numerator = Binary("sub", Binary("mul", du, v), Binary("mul", u, dv))
            return Binary("div", numerator, Power(v, 2.0))
    if isinstance(e, Power):
        n = e.exponent
        return Binary("mul", Binary("mul", Const(n), Power(e.base, n - 1.0)), _raw_derivative(e.base))
    raise TypeError(f"not an expression node: {e!r}")


def differentiate(e: Expression, simplified: bool = True) -> Expression:
    """d e/dx by the standard rules; `simplified=False` returns the unfolded tree."""
    raw = _raw_derivative(e)
    return simplify(raw) if simplified else raw


# ------------------------------- Printing -------------------------------

def _number_text(value: float) -> str:
    if value.is_integer() and abs(value) < 1e16:
        text = str(int(value))
    else:
        text = repr(value)
    return f"({text})" if value < 0 or text.startswith("-") else text


def _wrap(part: tuple[str, int], min_prec: int) -> str:
    text, prec = part
    return f"({text})" if prec < min_prec else text


def _text(e: Expression) -> tuple[str, int]:
    if isinstance(e, Const):
        return _number_text(e.value), _PREC_ATOM
    if isinstance(e, Var):
        return "x", _PREC_ATOM
    if isinstance(e, Unary):
        if e.op == "neg":
            return "-" + _wrap(_text(e.arg), _PREC_NEG), _PREC_NEG
        return f"{e.op}({_text(e.arg)[0]})", _PREC_ATOM
    if isinstance(e, Binary):
        prec = _PREC_ADD if e.op in ("add", "sub") else _PREC_MUL
        left = _wrap(_text(e.left), prec)
        # right operand of - and / binds tighter
        right = _wrap(_text(e.right), prec + (1 if e.op in ("sub", "div") else 0))
        return f"{left} {BINARY_SYMBOLS[e.op]} {right}", prec
    if isinstance(e, Power):
        return f"{_wrap(_text(e.base), _PREC_ATOM)}^{_number_text(e.exponent)}", _PREC_POW
    raise TypeError(f"not an expression node: {e!r}")


# ------------------------------- Evaluation -------------------------------

def _real_pow(base, exponent):
    """Non-integer powers are defined for positive bases only."""
    if base < 0:
        raise ValueError("negative base with non-integer exponent")
    return base ** exponent


def _mp_ln(t):
    if t <= 0:
        raise ValueError("ln of non-positive argument")
    return mpmath.log(t)


def _mp_sqrt(t):
    if t < 0:
        raise ValueError("sqrt of negative argument")
    return mpmath.sqrt(t)


_MATH_OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "pow": lambda a, n: a ** n if float(n).is_integer() else _real_pow(a, n),
    "neg": lambda a: -a,
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "ln": math.log,
    "sqrt": math.sqrt,
}

_MATH_NAMESPACE = {"sin": math.sin, "cos": math.cos, "exp": math.exp,
                   "ln": math.log, "sqrt": math.sqrt, "rpow": _real_pow}
_NUMPY_NAMESPACE = {"sin": np.sin, "cos": np.cos, "exp": np.exp,
                    "ln": np.log, "sqrt": np.sqrt, "rpow": np.power}
_MPMATH_NAMESPACE = {"sin": mpmath.sin, "cos": mpmath.cos, "exp": mpmath.exp,
                     "ln": _mp_ln, "sqrt": _mp_sqrt, "rpow": _real_pow}


def _source(e: Expression) -> str:
    if isinstance(e, Const):
        return f"({e.value!r})"
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{_source(e.arg)})"
        return f"{e.op}({_source(e.arg)})"
    if isinstance(e, Binary):
        return f"({_source(e.left)} {BINARY_SYMBOLS[e.op]} {_source(e.right)})"
    if isinstance(e, Power):
        if e.exponent.is_integer():
            return f"({_source(e.base)} ** {int(e.exponent)})"
        return f"rpow({_source(e.base)}, {e.exponent!r})"
    raise TypeError(f"not an expression node: {e!r}")


def _compile(e: Expression, namespace: dict) -> Callable:
    code = compile(f"lambda x: {_source(e)}", "<expression>", "eval")
    return eval(code, dict(namespace))


def evaluate(e: Expression, x: float) -> float:
    """Evaluate at a point with IEEE double semantics; DomainError outside the domain."""
    try:
        value = e.math_function(float(x))
    except _EVAL_ERRORS as exc:
        raise DomainError(f"{e.to_text()[:80]} undefined at x={x!r}: {exc}") from exc
    if not math.isfinite(value):
        raise DomainError(f"{e.to_text()[:80]} is not finite at x={x!r}")
    return value


def evaluate_array(e: Expression, xs) -> np.ndarray:
    """Vectorized evaluation over a grid; any point outside the domain raises DomainError."""
    xs = np.asarray(xs, dtype=float)
    try:
        with np.errstate(divide="raise", invalid="raise", over="raise", under="ignore"):
            values = e.numpy_function(xs)
    except _EVAL_ERRORS as exc:
        raise DomainError(f"{e.to_text()[:80]} undefined on the grid: {exc}") from exc
    values = np.broadcast_to(np.asarray(values, dtype=float), xs.shape).copy()
    if not np.all(np.isfinite(values)):
        bad = xs[~np.isfinite(values)][0]
        raise DomainError(f"{e.to_text()[:80]} is not finite at x={bad!r}")
    return values


def evaluate_mp(e: Expression, x):
    """Evaluate in the current mpmath working precision."""
    try:
        return e.mpmath_function(mpmath.mpf(x))
    except _EVAL_ERRORS as exc:
        raise DomainError(f"{e.to_text()[:80]} undefined at x={x!r}: {exc}") from exc


# ------------------------------- Derivative bundle -------------------------------

@dataclass(frozen=True)
class DerivativeBundle:
    """y and its symbolic derivatives y', y'', ... up to max_order."""
    function: Expression
    derivatives: tuple[Expression, ...]
    domain: tuple[float, float] | None = None

    @property
    def max_order(self) -> int:
        return len(self.derivatives)

    def expression(self, order: int) -> Expression:
        if order == 0:
            return self.function
        if not 1 <= order <= self.max_order:
            raise ValueError(f"bundle holds orders 0..{self.max_order}, asked for {order}")
        return self.derivatives[order - 1]

    def value(self, order: int, x: float) -> float:
        return evaluate(self.expression(order), x)

    def values(self, order: int, xs) -> np.ndarray:
        return evaluate_array(self.expression(order), xs)

    def mp_value(self, order: int, x):
        return evaluate_mp(self.expression(order), x)

    def probe(self, lo: float, hi: float, probe_points: int = 1001) -> None:
        """Evaluate every order on a uniform grid over [lo, hi]; DomainError if any is undefined."""
        grid = np.linspace(lo, hi, probe_points)
        for order in range(self.max_order + 1):
            self.values(order, grid)


def make_bundle(e: Expression, max_order: int = 6, domain: tuple[float, float] | None = None,
                probe_points: int = 1001) -> DerivativeBundle:
    """
    Differentiate e symbolically max_order times. With a domain, every order is probed
    on a uniform grid and DomainError is raised if any is undefined there.
    """
    if max_order < 6:
        raise ValueError("max_order must be at least 6")
    derivatives = []
    current = e
    for _ in range(max_order):
        current = differentiate(current)
        derivatives.append(current)
    bundle = DerivativeBundle(e, tuple(derivatives), domain)
    if domain is not None:
        bundle.probe(domain[0], domain[1], probe_points)
    logger.debug("bundle for %s: sizes %s", e.to_text(),
                 [len(d.to_text()) for d in derivatives])
    return bundle
