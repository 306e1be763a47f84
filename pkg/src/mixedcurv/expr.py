"""Exact scalar expressions over chart coordinates.

Expressions are immutable, hash-consed trees: two structurally identical
trees are the same Python object, so derivative caches and compiled
programs share work automatically.  Derivatives are exact trees over the
same node set; evaluation is vectorised over batches of points with
numpy and checks the domain guards of ``log``, ``sqrt``, ``/`` and
fractional powers.

Grammar accepted by :func:`parse` (whitespace and newlines are free)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?              # right associative
    atom    := NUMBER | 'pi' | 'x' DIGITS | FUNC '(' expr ')' | '(' expr ')'
    FUNC    := exp | log | sin | cos | sinh | cosh | sqrt

The exponent of ``^`` must reduce to a rational constant (``x^2``,
``x^(-1/2)``, ``x^(3/2)``); anything else is a syntax error.
"""
from __future__ import annotations

import math
import re
import threading
from fractions import Fraction
from numbers import Integral, Rational, Real

import numpy as np

from .errors import DomainGuardViolated, ExprSyntaxError

__all__ = [
    "ScalarExpr",
    "const",
    "coord",
    "coords",
    "exp",
    "log",
    "sin",
    "cos",
    "sinh",
    "cosh",
    "sqrt",
    "differentiate",
    "evaluate",
    "evaluate_many",
    "compile_exprs",
    "substitute",
    "parse",
    "as_expr",
    "ZERO",
    "ONE",
]

_UNARY_FUNCS = ("exp", "log", "sin", "cos", "sinh", "cosh", "sqrt")

_intern: dict = {}
_intern_lock = threading.Lock()


class ScalarExpr:
    """A node of an expression tree.  Build nodes with the module functions
    or Python operators, never by calling the class directly."""

    __slots__ = ("kind", "value", "args", "axes", "_dcache", "__weakref__")

    def __init__(self, kind, value, args, axes):
        self.kind = kind
        self.value = value
        self.args = args
        self.axes = axes
        self._dcache = {}

    def __setattr__(self, name, val):
        if hasattr(self, "_dcache") and name != "_dcache":
            raise AttributeError("ScalarExpr is immutable")
        object.__setattr__(self, name, val)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pos__(self):
        return self

    def __pow__(self, exponent):
        return power(self, exponent)

    # convenience ----------------------------------------------------------
    @property
    def is_const(self):
        return self.kind == "const"

    def diff(self, axis):
        return differentiate(self, axis)

    def evaluate(self, point):
        return evaluate(self, point)

    def __repr__(self):
        text = to_string(self)
        if len(text) > 80:
            text = text[:77] + "..."
        return f"ScalarExpr({text})"

    def __str__(self):
        return to_string(self)

    def __bool__(self):
        raise TypeError("truth value of a ScalarExpr is undefined")


def _node(kind, value, args):
    key = (kind, value, tuple(id(a) for a in args))
    node = _intern.get(key)
    if node is not None:
        return node
    axes = frozenset().union(*(a.axes for a in args)) if args else frozenset()
    if kind == "coord":
        axes = frozenset((value,))
    with _intern_lock:
        node = _intern.get(key)
        if node is None:
            node = ScalarExpr(kind, value, tuple(args), axes)
            _intern[key] = node
    return node


def const(value) -> ScalarExpr:
    v = float(value)
    if v == 0.0:
        v = 0.0  # merge -0.0 with 0.0
    return _node("const", v, ())


def coord(axis: int) -> ScalarExpr:
    if axis < 0:
        raise ValueError("axis must be non-negative")
    return _node("coord", int(axis), ())


def coords(n: int):
    return tuple(coord(i) for i in range(n))


ZERO = const(0.0)
ONE = const(1.0)


def as_expr(x) -> ScalarExpr:
    if isinstance(x, ScalarExpr):
        return x
    if isinstance(x, (Real, np.floating, np.integer)):
        return const(float(x))
    raise TypeError(f"cannot convert {type(x).__name__} to ScalarExpr")


def _is(e, v):
    return e.kind == "const" and e.value == v


def add(a, b):
    if a.kind == "const" and b.kind == "const":
        return const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return _node("add", None, (a, b))


def neg(a):
    if a.kind == "const":
        return const(-a.value)
    if a.kind == "neg":
        return a.args[0]
    return _node("neg", None, (a,))


def sub(a, b):
    if a.kind == "const" and b.kind == "const":
        return const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    return _node("add", None, (a, neg(b)))


def mul(a, b):
    if a.kind == "const" and b.kind == "const":
        return const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    return _node("mul", None, (a, b))


def div(a, b):
    if b.kind == "const":
        if b.value == 0.0:
            return _node("div", None, (a, b))  # guard fires on evaluation
        if a.kind == "const":
            return const(a.value / b.value)
        if b.value == 1.0:
            return a
        if b.value == -1.0:
            return neg(a)
    if _is(a, 0.0):
        # a zero numerator drops the denominator's guard; the denominator is
        # always guarded elsewhere in the trees this package builds
        return ZERO
    return _node("div", None, (a, b))


def _pow_valid(base: float, r: Fraction) -> bool:
    if r.denominator == 1:
        return not (r < 0 and base == 0.0)
    return base > 0.0 or (base == 0.0 and r > 0)


def power(a, exponent):
    if isinstance(exponent, ScalarExpr):
        if exponent.kind != "const":
            raise TypeError("exponent must be a rational constant")
        exponent = exponent.value
    if isinstance(exponent, bool):
        raise TypeError("boolean exponent")
    if isinstance(exponent, (Integral, Rational)):
        r = Fraction(exponent)
    elif isinstance(exponent, (float, np.floating)):
        r = Fraction(float(exponent)).limit_denominator(10**6)
        if float(r) != float(exponent):
            r = Fraction(float(exponent))
    else:
        raise TypeError("exponent must be rational")
    if r == 0:
        return ONE
    if r == 1:
        return a
    if a.kind == "const" and _pow_valid(a.value, r):
        return const(a.value ** float(r) if r.denominator != 1 else a.value ** int(r))
    if a.kind == "pow":
        # (b^s)^r = b^(rs) only when no sign information is lost
        inner_r = a.value
        if inner_r.denominator == 1 and r.denominator == 1:
            return power(a.args[0], inner_r * r)
    return _node("pow", r, (a,))


def _func(kind, fn, guard):
    def build(a):
        a = as_expr(a)
        if a.kind == "const" and guard(a.value):
            return const(fn(a.value))
        return _node(kind, None, (a,))

    build.__name__ = kind
    return build


exp = _func("exp", math.exp, lambda v: True)
log = _func("log", math.log, lambda v: v > 0.0)
sin = _func("sin", math.sin, lambda v: True)
cos = _func("cos", math.cos, lambda v: True)
sinh = _func("sinh", math.sinh, lambda v: True)
cosh = _func("cosh", math.cosh, lambda v: True)
sqrt = _func("sqrt", math.sqrt, lambda v: v >= 0.0)

_BUILDERS = {"exp": exp, "log": log, "sin": sin, "cos": cos, "sinh": sinh, "cosh": cosh, "sqrt": sqrt}


# ---------------------------------------------------------------------------
# differentiation


def _postorder(roots):
    """Nodes reachable from ``roots``, children before parents, no repeats."""
    seen = set()
    order = []
    for root in roots:
        if id(root) in seen:
            continue
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for child in node.args:
                if id(child) not in seen:
                    stack.append((child, False))
    return order


def _diff_rule(e, axis, d):
    k = e.kind
    if k == "coord":
        return ONE if e.value == axis else ZERO
    if k == "const":
        return ZERO
    a = e.args[0]
    da = d(a)
    if k == "add":
        return add(da, d(e.args[1]))
    if k == "neg":
        return neg(da)
    if k == "mul":
        b = e.args[1]
        return add(mul(da, b), mul(a, d(b)))
    if k == "div":
        b = e.args[1]
        db = d(b)
        return sub(div(da, b), div(mul(a, db), mul(b, b)))
    if _is(da, 0.0):
        return ZERO
    if k == "pow":
        r = e.value
        return mul(mul(const(float(r)), power(a, r - 1)), da)
    if k == "exp":
        return mul(e, da)
    if k == "log":
        return div(da, a)
    if k == "sin":
        return mul(cos(a), da)
    if k == "cos":
        return neg(mul(sin(a), da))
    if k == "sinh":
        return mul(cosh(a), da)
    if k == "cosh":
        return mul(sinh(a), da)
    if k == "sqrt":
        return div(da, mul(const(2.0), e))
    raise AssertionError(k)


def differentiate(e: ScalarExpr, axis: int) -> ScalarExpr:
    """Exact partial derivative of ``e`` with respect to coordinate ``axis``."""
    if axis not in e.axes:
        return ZERO
    cached = e._dcache.get(axis)
    if cached is not None:
        return cached

    def d(node):
        if axis not in node.axes:
            return ZERO
        return node._dcache[axis]

    for node in _postorder([e]):
        if axis in node.axes and axis not in node._dcache:
            node._dcache[axis] = _diff_rule(node, axis, d)
    return e._dcache[axis]


def substitute(e: ScalarExpr, replacements) -> ScalarExpr:
    """Replace coordinate ``x_i`` by ``replacements[i]`` throughout ``e``.

    ``replacements`` is a sequence (one entry per coordinate) or a mapping
    from axis to expression; axes missing from a mapping are left alone.
    """
    if isinstance(replacements, dict):
        reps = {int(k): as_expr(v) for k, v in replacements.items()}
    else:
        reps = dict(enumerate(as_expr(r) for r in replacements))
    memo = {}
    for node in _postorder([e]):
        k = node.kind
        if k == "const":
            out = node
        elif k == "coord":
            out = reps.get(node.value, node)
        else:
            args = [memo[id(a)] for a in node.args]
            if k == "add":
                out = add(*args)
            elif k == "neg":
                out = neg(args[0])
            elif k == "mul":
                out = mul(*args)
            elif k == "div":
                out = div(*args)
            elif k == "pow":
                out = power(args[0], node.value)
            else:
                out = _BUILDERS[k](args[0])
        memo[id(node)] = out
    return memo[id(e)]


# ---------------------------------------------------------------------------
# evaluation

_CHUNK = 8192


class Program:
    """A compiled, vectorised evaluator for a fixed list of expressions."""

    def __init__(self, exprs):
        self.exprs = tuple(exprs)
        nodes = _postorder(self.exprs)
        index = {id(n): i for i, n in enumerate(nodes)}
        self._ops = [(n.kind, n.value, tuple(index[id(a)] for a in n.args)) for n in nodes]
        self._roots = [index[id(e)] for e in self.exprs]
        last = [-1] * len(nodes)
        for i, (_, _, args) in enumerate(self._ops):
            for a in args:
                last[a] = i
        keep = set(self._roots)
        self._free = [[] for _ in nodes]
        for a, i in enumerate(last):
            if i >= 0 and a not in keep:
                self._free[i].append(a)
        self.dim = 1 + max((a for n in nodes for a in n.axes), default=-1)

    def __len__(self):
        return len(self._ops)

    def __call__(self, points):
        """Evaluate at ``points`` of shape (B, n); returns (len(exprs), B)."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2:
            raise ValueError("points must have shape (B, n)")
        if pts.shape[1] < self.dim:
            raise ValueError(f"expressions need {self.dim} coordinates, got {pts.shape[1]}")
        B = pts.shape[0]
        out = np.empty((len(self.exprs), B))
        for start in range(0, max(B, 1), _CHUNK):
            chunk = pts[start:start + _CHUNK]
            if chunk.shape[0] == 0:
                break
            out[:, start:start + chunk.shape[0]] = self._run(chunk)
        return out

    def _run(self, X):
        B = X.shape[0]
        vals = [None] * len(self._ops)
        for i, (kind, value, args) in enumerate(self._ops):
            if kind == "const":
                r = value
            elif kind == "coord":
                r = X[:, value]
            else:
                a = vals[args[0]]
                if kind == "add":
                    r = a + vals[args[1]]
                elif kind == "mul":
                    r = a * vals[args[1]]
                elif kind == "neg":
                    r = -a
                elif kind == "div":
                    b = vals[args[1]]
                    _guard(b == 0.0, "division by zero", X)
                    r = a / b
                elif kind == "pow":
                    if value.denominator == 1:
                        if value < 0:
                            _guard(a == 0.0, "negative power of zero", X)
                        r = a ** int(value)
                    else:
                        if value > 0:
                            _guard(a < 0.0, "fractional power of a negative number", X)
                        else:
                            _guard(a <= 0.0, "negative fractional power of a non-positive number", X)
                        r = np.power(a, float(value))
                elif kind == "log":
                    _guard(a <= 0.0, "log of a non-positive number", X)
                    r = np.log(a)
                elif kind == "sqrt":
                    _guard(a < 0.0, "sqrt of a negative number", X)
                    r = np.sqrt(a)
                elif kind == "exp":
                    r = np.exp(a)
                elif kind == "sin":
                    r = np.sin(a)
                elif kind == "cos":
                    r = np.cos(a)
                elif kind == "sinh":
                    r = np.sinh(a)
                elif kind == "cosh":
                    r = np.cosh(a)
                else:
                    raise AssertionError(kind)
            vals[i] = r
            for j in self._free[i]:
                vals[j] = None
        res = np.empty((len(self._roots), B))
        for k, i in enumerate(self._roots):
            res[k] = vals[i]
        return res


def _guard(mask, what, X):
    if np.any(mask):
        mask = np.broadcast_to(mask, (X.shape[0],))
        raise DomainGuardViolated(what, X[int(np.flatnonzero(mask)[0])])


def compile_exprs(exprs) -> Program:
    return Program([as_expr(e) for e in exprs])


def evaluate_many(exprs, points) -> np.ndarray:
    """Evaluate several expressions at one point (n,) or a batch (B, n)."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    res = compile_exprs(exprs)(pts[None, :] if single else pts)
    return res[:, 0] if single else res


def evaluate(e: ScalarExpr, point) -> float:
    """Value of ``e`` at a single point."""
    pts = np.asarray(point, dtype=float).reshape(1, -1)
    return float(Program([as_expr(e)])(pts)[0, 0])


# ---------------------------------------------------------------------------
# printing

_PREC = {"add": 1, "neg": 2, "mul": 3, "div": 3, "pow": 4}


def to_string(e: ScalarExpr) -> str:
    memo = {}
    for node in _postorder([e]):
        memo[id(node)] = _fmt(node, memo)
    return memo[id(e)][0]


def _fmt(node, memo):
    k = node.kind
    if k == "const":
        v = node.value
        text = repr(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
        return (text, 0 if v < 0 else 5)
    if k == "coord":
        return (f"x{node.value}", 5)

    def wrap(child, prec):
        text, p = memo[id(child)]
        return f"({text})" if p < prec else text

    if k == "add":
        a, b = node.args
        if b.kind == "neg":
            return (f"{wrap(a, 1)} - {wrap(b.args[0], 2)}", 1)
        if b.kind == "const" and b.value < 0:
            return (f"{wrap(a, 1)} - {_fmt(const(-b.value), memo)[0]}", 1)
        return (f"{wrap(a, 1)} + {wrap(b, 1)}", 1)
    if k == "neg":
        return (f"-{wrap(node.args[0], 3)}", 2)
    if k == "mul":
        return (f"{wrap(node.args[0], 3)}*{wrap(node.args[1], 4)}", 3)
    if k == "div":
        return (f"{wrap(node.args[0], 3)}/{wrap(node.args[1], 4)}", 3)
    if k == "pow":
        r = node.value
        rtext = str(r.numerator) if r.denominator == 1 and r >= 0 else f"({r})"
        return (f"{wrap(node.args[0], 5)}^{rtext}", 4)
    return (f"{k}({memo[id(node.args[0])][0]})", 5)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r\n]+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
)


def _tokenize(text):
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1, text)
        kind = m.lastgroup
        if kind == "ws":
            chunk = m.group()
            nl = chunk.count("\n")
            if nl:
                line += nl
                line_start = pos + chunk.rfind("\n") + 1
        else:
            tokens.append((kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(("end", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text, dim):
        self.text = text
        self.dim = dim
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return ExprSyntaxError(msg, tok[2], tok[3], self.text)

    def expect(self, value):
        tok = self.take()
        if tok[1] != value:
            raise self.error(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok)
        return tok

    # AST nodes: ("num", Fraction|float, tok), ("var", i), ("pi",), ("call", f, a),
    # ("neg", a), ("bin", op, a, b), ("pow", a, b, tok)
    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = ("bin", op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return ("neg", self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            tok = self.take()
            return ("pow", base, self.unary(), tok)
        return base

    def atom(self):
        tok = self.take()
        kind, text = tok[0], tok[1]
        if kind == "num":
            return ("num", text, tok)
        if kind == "name":
            if text == "pi":
                return ("pi",)
            if re.fullmatch(r"x\d+", text):
                i = int(text[1:])
                if self.dim is not None and i >= self.dim:
                    raise self.error(f"coordinate {text} out of range for dimension {self.dim}", tok)
                return ("var", i)
            if text in _UNARY_FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return ("call", text, arg)
            raise self.error(f"unknown name {text!r}", tok)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise self.error(f"unexpected {text or 'end of input'!r}", tok)

    def rational(self, node):
        tag = node[0]
        if tag == "num":
            return Fraction(node[1])
        if tag == "neg":
            return -self.rational(node[1])
        if tag == "bin":
            a, b = self.rational(node[2]), self.rational(node[3])
            op = node[1]
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if b == 0:
                raise ValueError("division by zero in exponent")
            return a / b
        if tag == "pow":
            b = self.rational(node[2])
            if b.denominator != 1:
                raise ValueError("nested fractional exponent")
            return self.rational(node[1]) ** int(b)
        raise ValueError("exponent is not a rational constant")

    def build(self, node):
        tag = node[0]
        if tag == "num":
            return const(float(node[1]))
        if tag == "pi":
            return const(math.pi)
        if tag == "var":
            return coord(node[1])
        if tag == "call":
            return _BUILDERS[node[1]](self.build(node[2]))
        if tag == "neg":
            return neg(self.build(node[1]))
        if tag == "bin":
            a, b = self.build(node[2]), self.build(node[3])
            return {"+": add, "-": sub, "*": mul, "/": div}[node[1]](a, b)
        if tag == "pow":
            try:
                r = self.rational(node[2])
            except (ValueError, ZeroDivisionError) as exc:
                raise self.error(f"exponent must be a rational constant ({exc})", node[3]) from None
            return power(self.build(node[1]), r)
        raise AssertionError(tag)


def parse(text: str, dim: int | None = None) -> ScalarExpr:
    """Parse an infix expression string; ``dim`` bounds the coordinate index."""
    if not isinstance(text, str):
        return as_expr(text)
    p = _Parser(text, dim)
    return p.build(p.parse())
