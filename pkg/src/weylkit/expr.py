"""Closed-form coordinate expressions: parsing, evaluation, exact differentiation.

Grammar (highest precedence first)::

    atom    := number | coord | func "(" expr ")" | "(" expr ")"
    power   := atom ("^" int)*           int may be signed, optionally in parens
    unary   := ("-" | "+") unary | power
    term    := unary (("*" | "/") unary)*
    expr    := term (("+" | "-") term)*

Functions: sin, cos, exp, ln, sqrt, tanh. Exponents are integer literals only;
write general powers as ``exp(b*ln(a))``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

__all__ = [
    "Chart",
    "ScalarExpr",
    "Const",
    "Var",
    "Neg",
    "BinOp",
    "Pow",
    "Func",
    "ExprError",
    "ExprSyntaxError",
    "ExprDomainError",
    "parse",
    "evaluate",
    "differentiate",
    "canonical_key",
    "const",
    "FUNCTIONS",
]


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    """Raised on malformed input; ``offset`` is the byte offset into the UTF-8 text."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class ExprDomainError(ExprError, ArithmeticError):
    """Raised when an expression is evaluated outside its domain."""


@dataclass(frozen=True)
class Chart:
    dim: int
    names: tuple[str, ...] = ()

    def __post_init__(self):
        if not isinstance(self.dim, int) or self.dim < 2:
            raise ValueError(f"chart dimension must be an integer >= 2, got {self.dim!r}")
        names = tuple(self.names) or tuple(f"x{i}" for i in range(self.dim))
        if len(names) != self.dim:
            raise ValueError(f"chart has dim {self.dim} but {len(names)} coordinate names")
        if len(set(names)) != len(names):
            raise ValueError("coordinate names must be distinct")
        for name in names:
            if not name.isidentifier() or name in FUNCTIONS:
                raise ValueError(f"invalid coordinate name {name!r}")
        object.__setattr__(self, "names", names)

    def index(self, name: str) -> int:
        return self.names.index(name)


# ---------------------------------------------------------------------------
# AST


class ScalarExpr:
    """Immutable expression node. Subclasses implement ``_eval`` and ``_diff``."""

    __slots__ = ()

    def __call__(self, point: Sequence[float]) -> float:
        return evaluate(self, point)

    def diff(self, coord: int) -> "ScalarExpr":
        return self._diff(coord)

    def free_vars(self) -> frozenset[int]:
        raise NotImplementedError

    def _eval(self, point) -> float:
        raise NotImplementedError

    def _diff(self, coord: int) -> "ScalarExpr":
        raise NotImplementedError

    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0.0


@dataclass(frozen=True, slots=True)
class Const(ScalarExpr):
    value: float

    def _eval(self, point):
        return self.value

    def _diff(self, coord):
        return ZERO

    def free_vars(self):
        return frozenset()

    def __str__(self):
        text = repr(float(self.value))
        return f"({text})" if self.value < 0 or text.startswith("-") else text


@dataclass(frozen=True, slots=True)
class Var(ScalarExpr):
    index: int
    name: str = field(default="", compare=False)

    def _eval(self, point):
        return point[self.index]

    def _diff(self, coord):
        return ONE if coord == self.index else ZERO

    def free_vars(self):
        return frozenset((self.index,))

    def __str__(self):
        return self.name or f"x{self.index}"


@dataclass(frozen=True, slots=True)
class Neg(ScalarExpr):
    arg: ScalarExpr

    def _eval(self, point):
        return -self.arg._eval(point)

    def _diff(self, coord):
        return neg(self.arg._diff(coord))

    def free_vars(self):
        return self.arg.free_vars()

    def __str__(self):
        return f"(-{self.arg})"


def _div(a: float, b: float) -> float:
    if b == 0.0:
        raise ExprDomainError("division by zero")
    return a / b


_BINARY = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
}


@dataclass(frozen=True, slots=True)
class BinOp(ScalarExpr):
    op: str
    left: ScalarExpr
    right: ScalarExpr

    def _eval(self, point):
        return _BINARY[self.op](self.left._eval(point), self.right._eval(point))

    def _diff(self, k):
        a, b = self.left, self.right
        da, db = a._diff(k), b._diff(k)
        if self.op == "+":
            return add(da, db)
        if self.op == "-":
            return sub(da, db)
        if self.op == "*":
            return add(mul(da, b), mul(a, db))
        # quotient rule: (a'b - a b') / b^2
        return div(sub(mul(da, b), mul(a, db)), power(b, 2))

    def free_vars(self):
        return self.left.free_vars() | self.right.free_vars()

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True, slots=True)
class Pow(ScalarExpr):
    base: ScalarExpr
    exponent: int

    def _eval(self, point):
        b = self.base._eval(point)
        if self.exponent < 0:
            if b == 0.0:
                raise ExprDomainError("division by zero (zero to a negative power)")
            return 1.0 / b ** (-self.exponent)
        return b**self.exponent

    def _diff(self, k):
        n = self.exponent
        return mul(mul(const(float(n)), power(self.base, n - 1)), self.base._diff(k))

    def free_vars(self):
        return self.base.free_vars()

    def __str__(self):
        exp = str(self.exponent) if self.exponent >= 0 else f"({self.exponent})"
        return f"({self.base})^{exp}"


def _ln(x: float) -> float:
    if x <= 0.0:
        raise ExprDomainError(f"ln of non-positive value {x!r}")
    return math.log(x)


def _sqrt(x: float) -> float:
    if x < 0.0:
        raise ExprDomainError(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        raise ExprDomainError(f"exp overflow at {x!r}") from None


def _trig(fn):
    def wrapped(x: float) -> float:
        if not math.isfinite(x):
            raise ExprDomainError("non-finite argument")
        return fn(x)

    return wrapped


FUNCTIONS = {
    "sin": _trig(math.sin),
    "cos": _trig(math.cos),
    "exp": _exp,
    "ln": _ln,
    "sqrt": _sqrt,
    "tanh": math.tanh,
}


@dataclass(frozen=True, slots=True)
class Func(ScalarExpr):
    name: str
    arg: ScalarExpr

    def _eval(self, point):
        return FUNCTIONS[self.name](self.arg._eval(point))

    def _diff(self, k):
        u = self.arg
        du = u._diff(k)
        if du.is_zero():
            return ZERO
        name = self.name
        if name == "sin":
            outer = func("cos", u)
        elif name == "cos":
            outer = neg(func("sin", u))
        elif name == "exp":
            outer = self
        elif name == "ln":
            return div(du, u)
        elif name == "sqrt":
            return div(du, mul(const(2.0), self))
        elif name == "tanh":
            outer = sub(ONE, power(self, 2))
        else:  # pragma: no cover - guarded by the parser
            raise ExprError(f"unknown function {name}")
        return mul(outer, du)

    def free_vars(self):
        return self.arg.free_vars()

    def __str__(self):
        return f"{self.name}({self.arg})"


ZERO = Const(0.0)
ONE = Const(1.0)


# ---------------------------------------------------------------------------
# constant-folding constructors


def const(value: float) -> Const:
    value = float(value)
    if not math.isfinite(value):
        raise ExprDomainError(f"non-finite constant {value!r}")
    return Const(value)


def _fold(node: ScalarExpr) -> ScalarExpr:
    try:
        value = node._eval(())
    except (ExprDomainError, OverflowError, ZeroDivisionError):
        return node
    if not math.isfinite(value):
        return node
    return Const(float(value))


def neg(a: ScalarExpr) -> ScalarExpr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(BinOp("+", a, b))
    return BinOp("+", a, b)


def sub(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    if b.is_zero():
        return a
    if a.is_zero():
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(BinOp("-", a, b))
    return BinOp("-", a, b)


def mul(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    if a.is_zero() or b.is_zero():
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(BinOp("*", a, b))
    return BinOp("*", a, b)


def div(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    if b == ONE:
        return a
    if a.is_zero() and not b.is_zero():
        return ZERO
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(BinOp("/", a, b))
    return BinOp("/", a, b)


def power(a: ScalarExpr, n: int) -> ScalarExpr:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Const):
        return _fold(Pow(a, n))
    return Pow(a, n)


def func(name: str, a: ScalarExpr) -> ScalarExpr:
    node = Func(name, a)
    return _fold(node) if isinstance(a, Const) else node


# ---------------------------------------------------------------------------
# public operations


def evaluate(expr: ScalarExpr, point: Sequence[float]) -> float:
    """Evaluate ``expr`` at ``point``; raises ExprDomainError outside the domain."""
    try:
        value = expr._eval(point)
    except OverflowError:
        raise ExprDomainError("overflow during evaluation") from None
    except IndexError:
        raise ExprError(f"point of length {len(point)} too short for expression") from None
    if not math.isfinite(value):
        raise ExprDomainError(f"non-finite result {value!r}")
    return float(value)


def differentiate(expr: ScalarExpr, coord: int) -> ScalarExpr:
    """Exact partial derivative with respect to coordinate index ``coord``."""
    if coord < 0:
        raise ValueError(f"coordinate index must be non-negative, got {coord}")
    return expr._diff(coord)


def _sum_terms(e: ScalarExpr, sign: bool, out: list):
    if isinstance(e, BinOp) and e.op in "+-":
        _sum_terms(e.left, sign, out)
        _sum_terms(e.right, sign if e.op == "+" else not sign, out)
    elif isinstance(e, Neg):
        _sum_terms(e.arg, not sign, out)
    else:
        out.append(_product_key(e, sign))


def _product_key(e: ScalarExpr, sign: bool = False) -> tuple:
    factors: list = []
    stack = [(e, False)]
    while stack:
        node, inverted = stack.pop()
        if isinstance(node, BinOp) and node.op in "*/":
            stack.append((node.left, inverted))
            stack.append((node.right, inverted != (node.op == "/")))
        elif isinstance(node, Neg):
            sign = not sign
            stack.append((node.arg, inverted))
        else:
            factors.append(("inv", canonical_key(node)) if inverted else canonical_key(node))
    factors.sort(key=repr)
    if len(factors) == 1 and not sign:
        return factors[0]
    return ("*", sign, tuple(factors))


def canonical_key(expr: ScalarExpr) -> tuple:
    """Hashable key that ignores the order of operands of ``+`` and ``*``.

    Equal keys imply mathematically equal expressions; unequal keys say nothing.
    """
    if isinstance(expr, Const):
        return ("c", expr.value)
    if isinstance(expr, Var):
        return ("v", expr.index)
    if isinstance(expr, Pow):
        return ("^", canonical_key(expr.base), expr.exponent)
    if isinstance(expr, Func):
        return ("f", expr.name, canonical_key(expr.arg))
    if isinstance(expr, BinOp) and expr.op in "*/":
        return _product_key(expr)
    terms: list = []
    _sum_terms(expr, False, terms)
    if len(terms) == 1:
        return terms[0]
    return ("+", tuple(sorted(terms, key=repr)))


# ---------------------------------------------------------------------------
# parser


_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        self._scan()

    def _offset(self, i: int) -> int:
        return len(self.text[:i].encode("utf-8"))

    def _scan(self):
        text, i, n = self.text, 0, len(self.text)
        while i < n:
            c = text[i]
            if c.isspace():
                i += 1
            elif c.isdigit() or c == ".":
                m = _NUMBER.match(text, i)
                j = m.end() if m else i
                k = j
                while k < n and (text[k].isalnum() or text[k] in "._"):
                    k += 1
                if not m or k != j:
                    raise ExprSyntaxError(f"malformed number {text[i:k]!r}", self._offset(i))
                self.tokens.append(("num", m.group(), self._offset(i)))
                i = j
            elif c.isalpha() or c == "_":
                j = i
                while j < n and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                self.tokens.append(("id", text[i:j], self._offset(i)))
                i = j
            elif c in "+-*/^()":
                self.tokens.append(("op", c, self._offset(i)))
                i += 1
            else:
                raise ExprSyntaxError(f"unexpected character {c!r}", self._offset(i))
        self.tokens.append(("end", "", self._offset(n)))


class _Parser:
    def __init__(self, text: str, chart: Chart):
        self.tokens = _Lexer(text).tokens
        self.pos = 0
        self.chart = chart

    @property
    def tok(self):
        return self.tokens[self.pos]

    def _accept(self, value: str) -> bool:
        kind, lexeme, _ = self.tok
        if kind == "op" and lexeme == value:
            self.pos += 1
            return True
        return False

    def _expect(self, value: str):
        if not self._accept(value):
            kind, lexeme, offset = self.tok
            found = "end of input" if kind == "end" else repr(lexeme)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", offset)

    def parse(self) -> ScalarExpr:
        node = self.expr()
        kind, lexeme, offset = self.tok
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {lexeme!r}", offset)
        return node

    def expr(self):
        node = self.term()
        while True:
            if self._accept("+"):
                node = BinOp("+", node, self.term())
            elif self._accept("-"):
                node = BinOp("-", node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            if self._accept("*"):
                node = BinOp("*", node, self.unary())
            elif self._accept("/"):
                node = BinOp("/", node, self.unary())
            else:
                return node

    def unary(self):
        if self._accept("-"):
            return Neg(self.unary())
        if self._accept("+"):
            return self.unary()
        return self.power()

    def power(self):
        node = self.atom()
        while self._accept("^"):
            node = Pow(node, self.int_exponent())
        return node

    def int_exponent(self) -> int:
        paren = self._accept("(")
        sign = -1 if self._accept("-") else 1
        if sign == 1:
            self._accept("+")
        kind, lexeme, offset = self.tok
        if kind != "num" or not lexeme.isdigit():
            raise ExprSyntaxError("exponent must be an integer literal", offset)
        self.pos += 1
        if paren:
            self._expect(")")
        return sign * int(lexeme)

    def atom(self):
        kind, lexeme, offset = self.tok
        if kind == "num":
            self.pos += 1
            return Const(float(lexeme))
        if kind == "id":
            self.pos += 1
            if lexeme in FUNCTIONS:
                if not self._accept("("):
                    raise ExprSyntaxError(f"function {lexeme!r} requires an argument", self.tok[2])
                arg = self.expr()
                self._expect(")")
                return Func(lexeme, arg)
            if lexeme in self.chart.names:
                return Var(self.chart.index(lexeme), lexeme)
            raise ExprSyntaxError(f"unknown identifier {lexeme!r}", offset)
        if self._accept("("):
            node = self.expr()
            self._expect(")")
            return node
        found = "end of input" if kind == "end" else repr(lexeme)
        raise ExprSyntaxError(f"unexpected {found}", offset)


def parse(text: str, chart: Chart) -> ScalarExpr:
    """Parse ``text`` into an expression over the coordinates of ``chart``."""
    if not isinstance(text, str):
        if isinstance(text, (int, float)) and not isinstance(text, bool):
            return const(text)
        raise TypeError(f"expression must be a string, got {type(text).__name__}")
    return _Parser(text, chart).parse()
