"""Symbolic scalar expressions over named coordinates and parameters.

Expressions are immutable trees. They can be parsed from infix text,
differentiated exactly, lightly simplified and evaluated on numpy arrays.
"""

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

FUNCTIONS = ("exp", "ln", "sqrt", "sin", "cos")
CONSTANTS = {"pi": math.pi}


class ExprError(ValueError):
    pass


class ParseError(ExprError):
    """Syntax error. `offset` is the byte offset into the UTF-8 source."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class UnknownIdentifier(ExprError):
    def __init__(self, name, offset):
        super().__init__(f"unknown identifier {name!r} at byte {offset}")
        self.name = name
        self.offset = offset


class DomainError(ExprError):
    """Evaluation left the real domain. `subterm` is the offending node."""

    def __init__(self, message, subterm):
        super().__init__(f"{message}: {subterm}")
        self.subterm = subterm


class UnboundSymbol(ExprError):
    pass


@dataclass(frozen=True)
class Symbol:
    name: str
    kind: str = "coordinate"

    def __post_init__(self):
        if self.kind not in ("coordinate", "parameter"):
            raise ValueError(f"bad symbol kind {self.kind!r}")
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", self.name):
            raise ValueError(f"bad identifier {self.name!r}")


class Chart:
    """Ordered coordinate symbols."""

    def __init__(self, names):
        names = tuple(n.name if isinstance(n, Symbol) else str(n) for n in names)
        if not names:
            raise ValueError("chart needs at least one coordinate")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate coordinate names in {names}")
        for n in names:
            Symbol(n)
        self.names = names
        self.symbols = tuple(Symbol(n) for n in names)

    @property
    def dim(self):
        return len(self.names)

    def index(self, name):
        return self.names.index(name)

    def env(self, point):
        """Map coordinate names to values. `point` has shape (n,) or (M, n)."""
        pt = np.asarray(point, dtype=float)
        if pt.shape[-1] != self.dim:
            raise ValueError(f"point has {pt.shape[-1]} components, chart has {self.dim}")
        if pt.ndim == 1:
            return {n: float(pt[i]) for i, n in enumerate(self.names)}
        return {n: pt[..., i] for i, n in enumerate(self.names)}

    def __eq__(self, other):
        return isinstance(other, Chart) and self.names == other.names

    def __hash__(self):
        return hash(self.names)

    def __repr__(self):
        return f"Chart({list(self.names)})"


# -- nodes -------------------------------------------------------------------

def _as_expr(v):
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, np.floating, np.integer)):
        return Const(float(v))
    raise TypeError(f"cannot convert {type(v).__name__} to Expr")


class Expr:
    __slots__ = ()
    prec = 9

    def __add__(self, o):
        return add(self, _as_expr(o))

    def __radd__(self, o):
        return add(_as_expr(o), self)

    def __sub__(self, o):
        return sub(self, _as_expr(o))

    def __rsub__(self, o):
        return sub(_as_expr(o), self)

    def __mul__(self, o):
        return mul(self, _as_expr(o))

    def __rmul__(self, o):
        return mul(_as_expr(o), self)

    def __truediv__(self, o):
        return div(self, _as_expr(o))

    def __rtruediv__(self, o):
        return div(_as_expr(o), self)

    def __pow__(self, o):
        return power(self, _as_expr(o))

    def __rpow__(self, o):
        return power(_as_expr(o), self)

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return to_text(self)

    def free_symbols(self):
        out = set()
        _collect(self, out)
        return out


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: float
    prec = 9

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, repr=False)
class Sym(Expr):
    name: str
    prec = 9

    def __repr__(self):
        return f"Sym({self.name!r})"


@dataclass(frozen=True, repr=False)
class Add(Expr):
    a: Expr
    b: Expr
    prec = 1

    def __repr__(self):
        return f"Add({self.a!r}, {self.b!r})"


@dataclass(frozen=True, repr=False)
class Sub(Expr):
    a: Expr
    b: Expr
    prec = 1

    def __repr__(self):
        return f"Sub({self.a!r}, {self.b!r})"


@dataclass(frozen=True, repr=False)
class Mul(Expr):
    a: Expr
    b: Expr
    prec = 2

    def __repr__(self):
        return f"Mul({self.a!r}, {self.b!r})"


@dataclass(frozen=True, repr=False)
class Div(Expr):
    a: Expr
    b: Expr
    prec = 2

    def __repr__(self):
        return f"Div({self.a!r}, {self.b!r})"


@dataclass(frozen=True, repr=False)
class Neg(Expr):
    a: Expr
    prec = 3

    def __repr__(self):
        return f"Neg({self.a!r})"


@dataclass(frozen=True, repr=False)
class Pow(Expr):
    base: Expr
    exp: Expr
    prec = 4

    def __repr__(self):
        return f"Pow({self.base!r}, {self.exp!r})"


@dataclass(frozen=True, repr=False)
class Func(Expr):
    name: str
    arg: Expr
    prec = 9

    def __repr__(self):
        return f"Func({self.name!r}, {self.arg!r})"


ZERO = Const(0.0)
ONE = Const(1.0)


def _collect(e, out):
    if isinstance(e, Sym):
        out.add(e.name)
    elif isinstance(e, (Add, Sub, Mul, Div)):
        _collect(e.a, out)
        _collect(e.b, out)
    elif isinstance(e, Neg):
        _collect(e.a, out)
    elif isinstance(e, Pow):
        _collect(e.base, out)
        _collect(e.exp, out)
    elif isinstance(e, Func):
        _collect(e.arg, out)


def _is(e, v):
    return isinstance(e, Const) and e.value == v


def _is_int(v):
    return float(v).is_integer()


# -- smart constructors (conservative simplification) -------------------------

def const(v):
    return Const(float(v))


def sym(name):
    return Sym(name)


def add(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.a)
    if isinstance(b, Const) and b.value < 0:
        return Sub(a, Const(-b.value))
    return Add(a, b)


def sub(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    if a == b:
        return ZERO
    if isinstance(b, Neg):
        return add(a, b.a)
    return Sub(a, b)


def neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.a
    if isinstance(a, Sub):
        return Sub(a.b, a.a)
    return Neg(a)


def _split_pow(e):
    if isinstance(e, Pow) and isinstance(e.exp, Const):
        return e.base, e.exp.value
    return e, 1.0


def mul(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
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
    if isinstance(a, Neg) and isinstance(b, Neg):
        return mul(a.a, b.a)
    if isinstance(a, Neg):
        return neg(mul(a.a, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.a))
    if isinstance(b, Const) and not isinstance(a, Const):
        a, b = b, a
    if isinstance(a, Const) and isinstance(b, Mul) and isinstance(b.a, Const):
        return mul(Const(a.value * b.a.value), b.b)
    ba, ea = _split_pow(a)
    bb, eb = _split_pow(b)
    if ba == bb and not isinstance(ba, Const):
        return power(ba, Const(ea + eb))
    return Mul(a, b)


def div(a, b):
    if _is(b, 0.0):
        raise ZeroDivisionError(f"division by constant zero in {a}/{b}")
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value / b.value)
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    if _is(b, -1.0):
        return neg(a)
    if a == b:
        return ONE
    if isinstance(a, Neg):
        return neg(div(a.a, b))
    if isinstance(b, Neg):
        return neg(div(a, b.a))
    ba, ea = _split_pow(a)
    bb, eb = _split_pow(b)
    if ba == bb and not isinstance(ba, Const):
        return power(ba, Const(ea - eb))
    return Div(a, b)


def power(base, ex):
    if isinstance(ex, Const):
        if ex.value == 0.0:
            return ONE
        if ex.value == 1.0:
            return base
    if _is(base, 1.0):
        return ONE
    if isinstance(base, Const) and isinstance(ex, Const):
        if base.value > 0 or _is_int(ex.value):
            try:
                return Const(base.value ** ex.value)
            except ZeroDivisionError:
                pass
    if isinstance(base, Pow) and isinstance(base.exp, Const) and isinstance(ex, Const):
        if _is_int(ex.value):
            return power(base.base, Const(base.exp.value * ex.value))
    return Pow(base, ex)


def func(name, arg):
    if name not in FUNCTIONS:
        raise ExprError(f"unknown function {name!r}")
    if isinstance(arg, Const):
        v = arg.value
        if name == "exp":
            return Const(math.exp(v))
        if name == "ln" and v > 0:
            return Const(math.log(v))
        if name == "sqrt" and v >= 0:
            return Const(math.sqrt(v))
        if name == "sin":
            return Const(math.sin(v))
        if name == "cos":
            return Const(math.cos(v))
    if name == "ln" and isinstance(arg, Func) and arg.name == "exp":
        return arg.arg
    return Func(name, arg)


def exp(a):
    return func("exp", _as_expr(a))


def ln(a):
    return func("ln", _as_expr(a))


def sqrt(a):
    return func("sqrt", _as_expr(a))


def sin(a):
    return func("sin", _as_expr(a))


def cos(a):
    return func("cos", _as_expr(a))


def simplify(e):
    """Rebuild bottom-up through the simplifying constructors."""
    if isinstance(e, (Const, Sym)):
        return e
    if isinstance(e, Add):
        return add(simplify(e.a), simplify(e.b))
    if isinstance(e, Sub):
        return sub(simplify(e.a), simplify(e.b))
    if isinstance(e, Mul):
        return mul(simplify(e.a), simplify(e.b))
    if isinstance(e, Div):
        return div(simplify(e.a), simplify(e.b))
    if isinstance(e, Neg):
        return neg(simplify(e.a))
    if isinstance(e, Pow):
        return power(simplify(e.base), simplify(e.exp))
    if isinstance(e, Func):
        return func(e.name, simplify(e.arg))
    raise TypeError(e)


def subs(e, mapping):
    """Substitute names by expressions or numbers."""
    m = {k: _as_expr(v) for k, v in mapping.items()}
    return _subs(e, m)


def _subs(e, m):
    if isinstance(e, Sym):
        return m.get(e.name, e)
    if isinstance(e, Const):
        return e
    if isinstance(e, Add):
        return add(_subs(e.a, m), _subs(e.b, m))
    if isinstance(e, Sub):
        return sub(_subs(e.a, m), _subs(e.b, m))
    if isinstance(e, Mul):
        return mul(_subs(e.a, m), _subs(e.b, m))
    if isinstance(e, Div):
        return div(_subs(e.a, m), _subs(e.b, m))
    if isinstance(e, Neg):
        return neg(_subs(e.a, m))
    if isinstance(e, Pow):
        return power(_subs(e.base, m), _subs(e.exp, m))
    if isinstance(e, Func):
        return func(e.name, _subs(e.arg, m))
    raise TypeError(e)


# -- differentiation ----------------------------------------------------------

def differentiate(e, s):
    """Exact derivative of `e` with respect to the symbol `s`."""
    name = s.name if isinstance(s, (Symbol, Sym)) else str(s)
    return _diff(e, name, {})


def _diff(e, s, memo):
    key = id(e)
    hit = memo.get(key)
    if hit is not None and hit[0] is e:
        return hit[1]
    d = _diff_raw(e, s, memo)
    memo[key] = (e, d)
    return d


def _diff_raw(e, s, memo):
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Sym):
        return ONE if e.name == s else ZERO
    if isinstance(e, Add):
        return add(_diff(e.a, s, memo), _diff(e.b, s, memo))
    if isinstance(e, Sub):
        return sub(_diff(e.a, s, memo), _diff(e.b, s, memo))
    if isinstance(e, Neg):
        return neg(_diff(e.a, s, memo))
    if isinstance(e, Mul):
        return add(mul(_diff(e.a, s, memo), e.b), mul(e.a, _diff(e.b, s, memo)))
    if isinstance(e, Div):
        da, db = _diff(e.a, s, memo), _diff(e.b, s, memo)
        if _is(db, 0.0):
            return div(da, e.b)
        return div(sub(mul(da, e.b), mul(e.a, db)), power(e.b, Const(2.0)))
    if isinstance(e, Pow):
        db = _diff(e.base, s, memo)
        if isinstance(e.exp, Const):
            n = e.exp.value
            return mul(mul(Const(n), power(e.base, Const(n - 1.0))), db)
        de = _diff(e.exp, s, memo)
        inner = add(mul(de, func("ln", e.base)), div(mul(e.exp, db), e.base))
        return mul(e, inner)
    if isinstance(e, Func):
        da = _diff(e.arg, s, memo)
        if e.name == "exp":
            return mul(e, da)
        if e.name == "ln":
            return div(da, e.arg)
        if e.name == "sqrt":
            return div(da, mul(Const(2.0), e))
        if e.name == "sin":
            return mul(func("cos", e.arg), da)
        if e.name == "cos":
            return neg(mul(func("sin", e.arg), da))
    raise TypeError(e)


def gradient(e, chart):
    return tuple(differentiate(e, n) for n in chart.names)


# -- evaluation ---------------------------------------------------------------

def evaluate(e, point, paramvals=None, chart=None):
    """Evaluate `e`.

    `point` is either a mapping from names to values or an array of shape
    (n,) or (M, n) interpreted through `chart`. Array points give array
    results. Raises DomainError when a subterm leaves the real domain.
    """
    if isinstance(point, Mapping):
        env = dict(point)
    else:
        if chart is None:
            raise ValueError("array points need a chart")
        env = chart.env(point)
    if paramvals:
        env.update(paramvals)
    with np.errstate(all="ignore"):
        out = _eval(e, env)
    if isinstance(out, np.ndarray):
        if not np.all(np.isfinite(out)):
            raise DomainError("non-finite value", e)
        return out
    out = float(out)
    if not math.isfinite(out):
        raise DomainError("non-finite value", e)
    return out


def evaluate_many(exprs, points, paramvals=None, chart=None):
    """Evaluate a sequence of expressions; result has shape points.shape[:-1] + (k,)."""
    pts = np.asarray(points, dtype=float)
    cols = []
    for e in exprs:
        v = evaluate(e, pts, paramvals, chart)
        cols.append(np.broadcast_to(v, pts.shape[:-1]).astype(float))
    return np.stack(cols, axis=-1)


def _bad(mask):
    return bool(np.any(mask))


def _eval(e, env):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Sym):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundSymbol(f"symbol {e.name!r} is not bound") from None
    if isinstance(e, Add):
        return _eval(e.a, env) + _eval(e.b, env)
    if isinstance(e, Sub):
        return _eval(e.a, env) - _eval(e.b, env)
    if isinstance(e, Mul):
        return _eval(e.a, env) * _eval(e.b, env)
    if isinstance(e, Neg):
        return -_eval(e.a, env)
    if isinstance(e, Div):
        a, b = _eval(e.a, env), _eval(e.b, env)
        if _bad(np.asarray(b) == 0):
            raise DomainError("division by zero", e)
        return a / b
    if isinstance(e, Pow):
        b = _eval(e.base, env)
        if isinstance(e.exp, Const):
            n = e.exp.value
            barr = np.asarray(b)
            if not _is_int(n) and _bad(barr < 0):
                raise DomainError("negative base with non-integer exponent", e)
            if n < 0 and _bad(barr == 0):
                raise DomainError("zero to a negative power", e)
            if _is_int(n) and abs(n) <= 64:
                return np.power(b, int(n)) if n >= 0 else 1.0 / np.power(b, int(-n))
            return np.power(b, n)
        x = _eval(e.exp, env)
        if _bad(np.asarray(b) <= 0):
            raise DomainError("non-positive base with variable exponent", e)
        return np.power(b, x)
    if isinstance(e, Func):
        a = _eval(e.arg, env)
        if e.name == "exp":
            return np.exp(a)
        if e.name == "ln":
            if _bad(np.asarray(a) <= 0):
                raise DomainError("ln of non-positive value", e)
            return np.log(a)
        if e.name == "sqrt":
            if _bad(np.asarray(a) < 0):
                raise DomainError("sqrt of negative value", e)
            return np.sqrt(a)
        if e.name == "sin":
            return np.sin(a)
        if e.name == "cos":
            return np.cos(a)
    raise TypeError(e)


# -- printing -----------------------------------------------------------------

def _num(v):
    if _is_int(v) and abs(v) < 1e15:
        s = str(int(v))
    else:
        s = repr(float(v))
    return f"({s})" if v < 0 or s.startswith("-") else s


def to_text(e):
    """Infix text that parses back to an equivalent expression."""
    if isinstance(e, Const):
        return _num(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_text(e.arg)})"
    if isinstance(e, Neg):
        return "-" + _wrap(e.a, 4)
    if isinstance(e, Pow):
        return _wrap(e.base, 5) + "^" + _wrap(e.exp, 5)
    if isinstance(e, (Add, Sub)):
        op = " + " if isinstance(e, Add) else " - "
        return _wrap(e.a, 1) + op + _wrap(e.b, 2)
    if isinstance(e, (Mul, Div)):
        op = "*" if isinstance(e, Mul) else "/"
        return _wrap(e.a, 2) + op + _wrap(e.b, 3)
    raise TypeError(e)


def _wrap(e, need):
    s = to_text(e)
    return f"({s})" if e.prec < need else s


# -- parsing ------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text):
    pos = 0
    toks = []
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", _byte(text, pos))
        kind = m.lastgroup
        start = m.start(kind)
        val = m.group(kind)
        if val == "**":
            val = "^"
        toks.append((kind, val, _byte(text, start)))
        pos = m.end()
    toks.append(("end", None, _byte(text, len(text))))
    return toks


def _byte(text, pos):
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text, allowed):
        self.toks = _tokenize(text)
        self.i = 0
        self.allowed = allowed

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, val):
        t = self.take()
        if t[1] != val:
            got = "end of input" if t[0] == "end" else repr(t[1])
            raise ParseError(f"expected {val!r}, got {got}", t[2])

    def parse(self):
        e = self.expr(0)
        t = self.peek()
        if t[0] != "end":
            raise ParseError(f"unexpected token {t[1]!r}", t[2])
        return e

    # binding powers: + - 10, * / 20, unary - 30, ^ 40 (right assoc)
    def expr(self, rbp):
        left = self.nud(self.take())
        while True:
            kind, val, off = self.peek()
            if kind == "end" or val in (")", ","):
                break
            if kind in ("num", "id") or val == "(":
                raise ParseError(f"missing operator before {val!r}", off)
            lbp = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}[val]
            if lbp <= rbp:
                break
            self.take()
            if val == "^":
                right = self.expr(lbp - 1)
            else:
                right = self.expr(lbp)
            left = {"+": add, "-": sub, "*": mul, "/": div, "^": power}[val](left, right)
        return left

    def nud(self, tok):
        kind, val, off = tok
        if kind == "num":
            return Const(float(val))
        if kind == "id":
            if self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise UnknownIdentifier(val, off)
                self.take()
                arg = self.expr(0)
                self.expect(")")
                return func(val, arg)
            if val in self.allowed:
                return Sym(val)
            if val in CONSTANTS:
                return Const(CONSTANTS[val])
            if val in FUNCTIONS:
                raise ParseError(f"function {val!r} needs an argument", off)
            raise UnknownIdentifier(val, off)
        if val == "(":
            e = self.expr(0)
            self.expect(")")
            return e
        if val == "-":
            return neg(self.expr(30))
        if val == "+":
            return self.expr(30)
        if kind == "end":
            raise ParseError("unexpected end of input", off)
        raise ParseError(f"unexpected token {val!r}", off)


def parse(text, chart=None, params=()):
    """Parse infix text. Identifiers must be chart coordinates or parameters."""
    allowed = set()
    if chart is not None:
        allowed.update(chart.names if isinstance(chart, Chart) else chart)
    for p in params:
        allowed.add(p.name if isinstance(p, Symbol) else str(p))
    try:
        return _Parser(text, allowed).parse()
    except ZeroDivisionError as exc:
        raise ParseError(str(exc), 0) from None


def lambdify(e, names: Sequence[str]):
    """Return f(*arrays) evaluating `e` with positional arguments `names`."""

    def f(*args):
        return evaluate(e, dict(zip(names, args)))

    return f
