"""Expression trees for configurable potentials.

A small language over variables x1..xn, constants, + - * / ^, and the
functions exp, sin, cos, tanh, sqrt.  Expressions evaluate vectorized over
numpy arrays and differentiate symbolically; first and second derivatives
are cached on the FieldExpr wrapper.  Pretty-printing re-parses to an
equal tree (structural equality), which the tests rely on.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParseError, UnknownIdentifier

FUNCTIONS = ("exp", "sin", "cos", "tanh", "sqrt")


# --- AST nodes -------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based; prints as x{index+1}


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str  # '+', '-', '*', '/', '^'
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


def evaluate(node, coords):
    """Evaluate a node; coords is a sequence of n arrays (or scalars)."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return coords[node.index]
    if isinstance(node, Neg):
        return -evaluate(node.arg, coords)
    if isinstance(node, Bin):
        a = evaluate(node.left, coords)
        b = evaluate(node.right, coords)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            with np.errstate(divide="ignore", invalid="ignore"):
                return a / b
        # power: integer exponents stay exact, fractional ones need a >= 0
        with np.errstate(invalid="ignore"):
            return np.power(a, b)
    if isinstance(node, Call):
        a = evaluate(node.arg, coords)
        if node.func == "exp":
            return np.exp(a)
        if node.func == "sin":
            return np.sin(a)
        if node.func == "cos":
            return np.cos(a)
        if node.func == "tanh":
            return np.tanh(a)
        with np.errstate(invalid="ignore"):
            return np.sqrt(a)
    raise TypeError(f"not an expression node: {node!r}")


# --- symbolic differentiation ----------------------------------------------

def _is_const(node, v=None):
    return isinstance(node, Const) and (v is None or node.value == v)


def _add(a, b):
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return Bin("+", a, b)


def _sub(a, b):
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(a, 0.0):
        return Neg(b)
    return Bin("-", a, b)


def _mul(a, b):
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    return Bin("*", a, b)


def _div(a, b):
    if _is_const(a, 0.0):
        return Const(0.0)
    if _is_const(b, 1.0):
        return a
    return Bin("/", a, b)


def _pow(a, b):
    if _is_const(b, 1.0):
        return a
    if _is_const(b, 0.0):
        return Const(1.0)
    return Bin("^", a, b)


def derivative(node, index):
    """d(node)/d x_{index+1}, with light constant folding."""
    if isinstance(node, Const):
        return Const(0.0)
    if isinstance(node, Var):
        return Const(1.0 if node.index == index else 0.0)
    if isinstance(node, Neg):
        d = derivative(node.arg, index)
        return Const(0.0) if _is_const(d, 0.0) else Neg(d)
    if isinstance(node, Bin):
        da = derivative(node.left, index)
        db = derivative(node.right, index)
        if node.op == "+":
            return _add(da, db)
        if node.op == "-":
            return _sub(da, db)
        if node.op == "*":
            return _add(_mul(da, node.right), _mul(node.left, db))
        if node.op == "/":
            num = _sub(_mul(da, node.right), _mul(node.left, db))
            return _div(num, _pow(node.right, Const(2.0)))
        # a^b with constant b; variable exponents are outside the language's
        # differentiable fragment
        if _is_const(node.right):
            c = node.right.value
            return _mul(_mul(Const(c), _pow(node.left, Const(c - 1.0))), da)
        raise DomainError("derivative of non-constant exponent not supported")
    if isinstance(node, Call):
        da = derivative(node.arg, index)
        if _is_const(da, 0.0):
            return Const(0.0)
        a = node.arg
        if node.func == "exp":
            return _mul(Call("exp", a), da)
        if node.func == "sin":
            return _mul(Call("cos", a), da)
        if node.func == "cos":
            return Neg(_mul(Call("sin", a), da))
        if node.func == "tanh":
            one_minus = _sub(Const(1.0), _pow(Call("tanh", a), Const(2.0)))
            return _mul(one_minus, da)
        # sqrt
        return _div(da, _mul(Const(2.0), Call("sqrt", a)))
    raise TypeError(f"not an expression node: {node!r}")


# --- printing ---------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def to_string(node):
    return _print(node, 0)


def _print(node, parent_prec):
    if isinstance(node, Const):
        v = node.value
        if v == int(v) and abs(v) < 1e16:
            s = str(int(v))
        else:
            s = repr(v)
        if v < 0 and parent_prec > _PREC["+"]:
            return f"({s})"
        return s
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Neg):
        s = "-" + _print(node.arg, _PREC["neg"])
        return f"({s})" if parent_prec > _PREC["neg"] else s
    if isinstance(node, Bin):
        p = _PREC[node.op]
        # '-' and '/' are left-associative, '^' right-associative
        lp = p if node.op != "^" else p + 1
        rp = p + 1 if node.op in ("-", "/") else p
        if node.op == "^":
            rp = p
        s = f"{_print(node.left, lp)}{node.op}{_print(node.right, rp)}"
        return f"({s})" if parent_prec > p else s
    if isinstance(node, Call):
        return f"{node.func}({_print(node.arg, 0)})"
    raise TypeError(f"not an expression node: {node!r}")


# --- tokenizer / recursive-descent parser ------------------------------------

_TOKEN_RE = re.compile(
    r"(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos,
                             {"number", "identifier", "operator"})
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num")), pos))
        elif m.lastgroup == "ident":
            tokens.append(("ident", m.group("ident"), pos))
        else:
            tokens.append(("op", m.group("op"), pos))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text, n):
        self.text = text
        self.n = n
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", pos, {op})
        self.take()

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"trailing input {val!r}", pos, {"end of input"})
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, pos = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                node = Bin(val, node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, val, pos = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                node = Bin(val, node, self.unary())
            else:
                return node

    def unary(self):
        kind, val, pos = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, pos = self.peek()
        if kind == "op" and val == "^":
            self.take()
            return Bin("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Const(val)
        if kind == "ident":
            if val in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(val, arg)
            m = re.fullmatch(r"x(\d+)", val)
            if m:
                idx = int(m.group(1))
                if not 1 <= idx <= self.n:
                    raise UnknownIdentifier(
                        f"variable {val!r} out of range for dimension {self.n}")
                return Var(idx - 1)
            raise UnknownIdentifier(f"unknown identifier {val!r} at offset {pos}")
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError(f"expected a value, found {val!r}", pos,
                         {"number", "identifier", "("})


def parse_expression(text, n):
    """Parse text over variables x1..xn into an AST node."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0, {"expression"})
    return _Parser(text, n).parse()


# --- the cached wrapper -------------------------------------------------------

class FieldExpr:
    """An expression with lazily cached symbolic first/second derivatives.

    Hessian entries are built by differentiating in sorted index order, so
    the symbolic Hessian is symmetric at the AST level.
    """

    def __init__(self, node, n, source=None):
        self.node = node
        self.n = n
        self.source = source if source is not None else to_string(node)
        self._deriv = {}

    @classmethod
    def parse(cls, text, n):
        return cls(parse_expression(text, n), n, source=text)

    @classmethod
    def constant(cls, value, n):
        return cls(Const(float(value)), n)

    def gradient_node(self, j):
        key = (j,)
        if key not in self._deriv:
            self._deriv[key] = derivative(self.node, j)
        return self._deriv[key]

    def hessian_node(self, j, k):
        lo, hi = sorted((j, k))
        key = (lo, hi)
        if key not in self._deriv:
            self._deriv[key] = derivative(self.gradient_node(lo), hi)
        return self._deriv[key]

    def __eq__(self, other):
        return isinstance(other, FieldExpr) and self.node == other.node

    def __repr__(self):
        return f"FieldExpr({to_string(self.node)!r}, n={self.n})"

    def __call__(self, coords):
        out = evaluate(self.node, coords)
        return out

    def grad(self, coords):
        return [evaluate(self.gradient_node(j), coords) for j in range(self.n)]

    def hess(self, coords):
        return [[evaluate(self.hessian_node(j, k), coords)
                 for k in range(self.n)] for j in range(self.n)]


def check_finite(value, what="field value"):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{what} is not finite")
    return value
