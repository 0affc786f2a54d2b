"""Canonical expression trees with exact differentiation.

Scalar expressions over chart coordinates x1..xN built from rational/real
literals, +, -, *, /, integer powers, sin, cos, exp.  Every constructor
normalizes, so structurally different spellings of the same polynomial
combination collapse to one tree:

* sums are flattened, like terms are collected with exact Fraction
  coefficients, and terms are sorted by a deterministic key;
* products are flattened, numeric factors fold into a leading coefficient,
  repeated factors merge into integer powers, factors are sorted;
* integer powers distribute over products and fold on numbers.

Consequences relied on elsewhere: mixed partial derivatives of the same tree
are *identical* trees, `a - a` collapses to the zero tree, and negation is an
exact involution.  Products are never expanded over sums, which keeps tree
sizes bounded (no canonical polynomial form is attempted).

Rational constants stay exact Fractions inside the tree; floats only appear
when an inexact constant is introduced by the caller.  Numeric evaluation is
double precision via the compiled/pure kernel programs (see `kernel`).
"""

from __future__ import annotations

from fractions import Fraction

from .kernel import OP_ADD, OP_CONST, OP_COS, OP_DIV, OP_EXP, OP_MUL, \
    OP_NEG, OP_POWI, OP_SIN, OP_STORE, OP_SUB, OP_VAR, Program

__all__ = [
    "Expr", "Rat", "Num", "Var", "Add", "Mul", "Pow", "Sin", "Cos", "Exp",
    "rat", "num", "var", "add", "sub", "mul", "div", "neg", "pow_int",
    "sin", "cos", "exp", "derivative", "substitute", "compile_expr",
    "compile_fused", "free_vars", "ZERO", "ONE",
]


class Expr:
    """Immutable expression node.  Compare/hash by canonical structure."""

    __slots__ = ("_key", "_hash")

    def key(self):
        k = getattr(self, "_key", None)
        if k is None:
            k = self._make_key()
            object.__setattr__(self, "_key", k)
        return k

    def __hash__(self):
        h = getattr(self, "_hash", None)
        if h is None:
            h = hash(self.key())
            object.__setattr__(self, "_hash", h)
        return h

    def __eq__(self, other):
        return self is other or (isinstance(other, Expr)
                                 and self.key() == other.key())

    def __repr__(self):
        return f"Expr({to_str(self)})"

    # arithmetic sugar, used heavily by the calculus layer and tests
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, n):
        return pow_int(self, n)

    def __neg__(self):
        return neg(self)


def _coerce(v):
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, Fraction)):
        return rat(v)
    if isinstance(v, float):
        return num(v)
    raise TypeError(f"cannot use {type(v).__name__} in an expression")


class Rat(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        object.__setattr__(self, "value", value)

    def _make_key(self):
        return (0, self.value.numerator, self.value.denominator)


class Num(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        object.__setattr__(self, "value", value)

    def _make_key(self):
        return (1, self.value)


class Var(Expr):
    __slots__ = ("index",)

    def __init__(self, index):
        object.__setattr__(self, "index", index)

    def _make_key(self):
        return (2, self.index)


class Add(Expr):
    """n-ary sum; at most one numeric term (first), terms key-sorted."""

    __slots__ = ("terms",)

    def __init__(self, terms):
        object.__setattr__(self, "terms", terms)

    def _make_key(self):
        return (3, tuple(t.key() for t in self.terms))


class Mul(Expr):
    """coeff * f1 * ... * fk with numeric coeff and key-sorted factors."""

    __slots__ = ("coeff", "factors")

    def __init__(self, coeff, factors):
        object.__setattr__(self, "coeff", coeff)
        object.__setattr__(self, "factors", factors)

    def _make_key(self):
        c = self.coeff
        ck = (c.numerator, c.denominator) if isinstance(c, Fraction) \
            else (float(c), 0)
        return (4, ck, tuple(f.key() for f in self.factors))


class Pow(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exponent", exponent)

    def _make_key(self):
        return (5, self.base.key(), self.exponent)


class _Fun(Expr):
    __slots__ = ("arg",)
    _tag = None

    def __init__(self, arg):
        object.__setattr__(self, "arg", arg)

    def _make_key(self):
        return (self._tag, self.arg.key())


class Sin(_Fun):
    __slots__ = ()
    _tag = 6


class Cos(_Fun):
    __slots__ = ()
    _tag = 7


class Exp(_Fun):
    __slots__ = ()
    _tag = 8


def _is_number(e):
    return isinstance(e, (Rat, Num))


def _numval(e):
    return e.value


# ---------------------------------------------------------------------------
# smart constructors


def rat(v) -> Expr:
    return Rat(v if isinstance(v, Fraction) else Fraction(v))


def num(v) -> Expr:
    """Numeric literal; exact values become rationals."""
    if isinstance(v, (int, Fraction)):
        return rat(v)
    f = Fraction(v)
    if float(f) == v:
        return Rat(f)
    return Num(float(v))


ZERO = rat(0)
ONE = rat(1)


def var(index) -> Expr:
    if index < 0:
        raise ValueError("variable index must be >= 0")
    return Var(index)


def _fold2(a, b, op):
    # Fraction arithmetic if both exact, float otherwise
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return op(a, b)
    return op(float(a), float(b))


def add(*args) -> Expr:
    const = Fraction(0)
    # canonical core -> accumulated coefficient; insertion order irrelevant
    buckets: dict[Expr, object] = {}
    stack = list(args)
    while stack:
        e = stack.pop()
        if isinstance(e, Add):
            stack.extend(e.terms)
            continue
        if _is_number(e):
            const = _fold2(const, _numval(e), lambda x, y: x + y)
            continue
        if isinstance(e, Mul):
            coeff, core = e.coeff, _remake_mul(Fraction(1), e.factors)
        else:
            coeff, core = Fraction(1), e
        prev = buckets.get(core)
        buckets[core] = coeff if prev is None \
            else _fold2(prev, coeff, lambda x, y: x + y)

    terms = []
    for core, coeff in buckets.items():
        if coeff == 0:
            continue
        terms.append(_scale(core, coeff))
    terms.sort(key=Expr.key)
    if const != 0 or not terms:
        # exact zero Fractions drop; float zero is kept exact too
        if const != 0:
            cnode = Rat(const) if isinstance(const, Fraction) else Num(const)
            terms.insert(0, cnode)
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    return Add(tuple(terms))


def _scale(core, coeff):
    if coeff == 1:
        return core
    if isinstance(core, Mul):  # core built with coeff 1
        return _remake_mul(coeff, core.factors)
    return _remake_mul(coeff, (core,))


def _remake_mul(coeff, factors):
    if not factors:
        return Rat(coeff) if isinstance(coeff, Fraction) else Num(coeff)
    if coeff == 1 and len(factors) == 1:
        return factors[0]
    return Mul(coeff, factors)


def mul(*args) -> Expr:
    coeff = Fraction(1)
    powers: dict[Expr, int] = {}
    stack = list(args)
    while stack:
        e = stack.pop()
        if not isinstance(e, Expr):
            e = _coerce(e)
        if isinstance(e, Mul):
            coeff = _fold2(coeff, e.coeff, lambda x, y: x * y)
            stack.extend(e.factors)
            continue
        if _is_number(e):
            coeff = _fold2(coeff, _numval(e), lambda x, y: x * y)
            continue
        if isinstance(e, Pow):
            base, n = e.base, e.exponent
        else:
            base, n = e, 1
        powers[base] = powers.get(base, 0) + n
    if coeff == 0:
        return ZERO
    factors = []
    for base, n in powers.items():
        if n == 0:
            continue
        factors.append(base if n == 1 else Pow(base, n))
    factors.sort(key=Expr.key)
    # scalar multiples of a bare sum distribute, so that `t - t` cancels
    # term-by-term for sum-valued t; products of sums stay unexpanded
    if len(factors) == 1 and isinstance(factors[0], Add) and coeff != 1:
        cnode = Rat(coeff) if isinstance(coeff, Fraction) else Num(coeff)
        return add(*[mul(cnode, t) for t in factors[0].terms])
    return _remake_mul(coeff, tuple(factors))


def neg(e) -> Expr:
    return mul(Rat(Fraction(-1)), e)


def sub(a, b) -> Expr:
    return add(a, neg(b))


def div(a, b) -> Expr:
    return mul(a, pow_int(b, -1))


def pow_int(e, n) -> Expr:
    if not isinstance(n, int):
        if isinstance(n, Fraction) and n.denominator == 1:
            n = n.numerator
        else:
            raise ValueError("only integer exponents are supported")
    if n == 0:
        return ONE
    if n == 1:
        return e if isinstance(e, Expr) else _coerce(e)
    if _is_number(e):
        v = _numval(e)
        if v == 0 and n < 0:
            raise ZeroDivisionError("zero raised to a negative power")
        if isinstance(v, Fraction):
            return Rat(v ** n)
        return num(float(v) ** n)
    if isinstance(e, Pow):
        return pow_int(e.base, e.exponent * n)
    if isinstance(e, Mul):  # (c*f1*...*fk)^n, valid for integer n
        return mul(pow_int(_coerce(e.coeff), n),
                   *[pow_int(f, n) for f in e.factors])
    return Pow(e, n)


def sin(e) -> Expr:
    if e == ZERO:
        return ZERO
    return Sin(e)


def cos(e) -> Expr:
    if e == ZERO:
        return ONE
    return Cos(e)


def exp(e) -> Expr:
    if e == ZERO:
        return ONE
    return Exp(e)


# ---------------------------------------------------------------------------
# structural operations


def derivative(e: Expr, index: int) -> Expr:
    """Exact partial derivative with respect to variable `index`."""
    if _is_number(e):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == index else ZERO
    if isinstance(e, Add):
        return add(*[derivative(t, index) for t in e.terms])
    if isinstance(e, Mul):
        pieces = []
        fs = e.factors
        for i, f in enumerate(fs):
            df = derivative(f, index)
            if df == ZERO:
                continue
            pieces.append(mul(_coerce(e.coeff), df,
                              *fs[:i], *fs[i + 1:]))
        return add(*pieces)
    if isinstance(e, Pow):
        db = derivative(e.base, index)
        if db == ZERO:
            return ZERO
        return mul(rat(e.exponent), pow_int(e.base, e.exponent - 1), db)
    if isinstance(e, Sin):
        return mul(cos(e.arg), derivative(e.arg, index))
    if isinstance(e, Cos):
        return mul(rat(-1), sin(e.arg), derivative(e.arg, index))
    if isinstance(e, Exp):
        return mul(Exp(e.arg), derivative(e.arg, index))
    raise TypeError(f"cannot differentiate {type(e).__name__}")


def substitute(e: Expr, table: dict[int, Expr]) -> Expr:
    """Replace variables by expressions (simultaneous substitution)."""
    if _is_number(e):
        return e
    if isinstance(e, Var):
        return table.get(e.index, e)
    if isinstance(e, Add):
        return add(*[substitute(t, table) for t in e.terms])
    if isinstance(e, Mul):
        return mul(_coerce(e.coeff),
                   *[substitute(f, table) for f in e.factors])
    if isinstance(e, Pow):
        return pow_int(substitute(e.base, table), e.exponent)
    if isinstance(e, Sin):
        return sin(substitute(e.arg, table))
    if isinstance(e, Cos):
        return cos(substitute(e.arg, table))
    if isinstance(e, Exp):
        return exp(substitute(e.arg, table))
    raise TypeError(f"cannot substitute into {type(e).__name__}")


def free_vars(e: Expr, acc=None) -> set[int]:
    if acc is None:
        acc = set()
    if isinstance(e, Var):
        acc.add(e.index)
    elif isinstance(e, Add):
        for t in e.terms:
            free_vars(t, acc)
    elif isinstance(e, Mul):
        for f in e.factors:
            free_vars(f, acc)
    elif isinstance(e, Pow):
        free_vars(e.base, acc)
    elif isinstance(e, _Fun):
        free_vars(e.arg, acc)
    return acc


# ---------------------------------------------------------------------------
# rendering (grammar-compatible: ^ > unary - > * / > + -)


def to_str(e: Expr) -> str:
    return _render(e, 0)


def _render(e, parent_prec):
    # precedence levels: add=1, mul=2, unary-=3, pow=4, atom=5
    if isinstance(e, Rat):
        v = e.value
        s = str(v.numerator) if v.denominator == 1 \
            else f"{v.numerator}/{v.denominator}"
        if v < 0:
            return s if parent_prec <= 1 else f"({s})"
        return s
    if isinstance(e, Num):
        s = repr(e.value)
        return s if e.value >= 0 or parent_prec <= 1 else f"({s})"
    if isinstance(e, Var):
        return f"x{e.index + 1}"
    if isinstance(e, Add):
        s = " + ".join(_render(t, 2) for t in e.terms)
        s = s.replace("+ -", "- ")
        return s if parent_prec <= 1 else f"({s})"
    if isinstance(e, Mul):
        parts = []
        if e.coeff != 1:
            parts.append(_render(num(e.coeff) if not isinstance(e.coeff, Fraction)
                                 else Rat(e.coeff), 3))
        parts.extend(_render(f, 3) for f in e.factors)
        s = "*".join(parts)
        return s if parent_prec <= 2 else f"({s})"
    if isinstance(e, Pow):
        b = _render(e.base, 5)
        n = e.exponent
        s = f"{b}^{n}" if n >= 0 else f"{b}^({n})"
        return s
    if isinstance(e, Sin):
        return f"sin({_render(e.arg, 0)})"
    if isinstance(e, Cos):
        return f"cos({_render(e.arg, 0)})"
    if isinstance(e, Exp):
        return f"exp({_render(e.arg, 0)})"
    raise TypeError(type(e).__name__)


# ---------------------------------------------------------------------------
# compilation to kernel programs


class _Emitter:
    def __init__(self, dim):
        self.dim = dim
        self.code: list[int] = []
        self.consts: list[float] = []
        self._const_index: dict[float, int] = {}

    def emit_const(self, v):
        f = float(v)
        idx = self._const_index.get(f)
        if idx is None:
            idx = len(self.consts)
            self.consts.append(f)
            self._const_index[f] = idx
        self.code.extend((OP_CONST, idx))
        return 1

    def emit(self, node) -> int:
        # returns the max stack depth this subtree needs (net growth 1)
        code = self.code
        if isinstance(node, (Rat, Num)):
            return self.emit_const(node.value)
        if isinstance(node, Var):
            if node.index >= self.dim:
                raise ValueError(
                    f"expression uses x{node.index + 1} but chart has "
                    f"dimension {self.dim}")
            code.extend((OP_VAR, node.index))
            return 1
        if isinstance(node, Add):
            depth = 0
            for i, t in enumerate(node.terms):
                depth = max(depth, (1 if i else 0) + self.emit(t))
                if i:
                    code.extend((OP_ADD, 0))
            return depth
        if isinstance(node, Mul):
            depth = 0
            n = 0
            if node.coeff == -1:
                pass  # apply a trailing negate instead of multiplying
            elif node.coeff != 1:
                self.emit_const(node.coeff)
                n = 1
                depth = 1
            for f in node.factors:
                depth = max(depth, n + self.emit(f))
                if n:
                    code.extend((OP_MUL, 0))
                n = 1
            if node.coeff == -1:
                code.extend((OP_NEG, 0))
            return depth
        if isinstance(node, Pow):
            d = self.emit(node.base)
            code.extend((OP_POWI, node.exponent))
            return d
        if isinstance(node, Sin):
            d = self.emit(node.arg)
            code.extend((OP_SIN, 0))
            return d
        if isinstance(node, Cos):
            d = self.emit(node.arg)
            code.extend((OP_COS, 0))
            return d
        if isinstance(node, Exp):
            d = self.emit(node.arg)
            code.extend((OP_EXP, 0))
            return d
        raise TypeError(type(node).__name__)


def compile_expr(e: Expr, dim: int) -> Program:
    em = _Emitter(dim)
    depth = em.emit(e)
    return Program.build(em.code, em.consts, max(depth, 1), dim)


def compile_fused(exprs, dim: int) -> Program:
    """One program computing several expressions with OP_STORE outputs.

    One kernel call then evaluates a whole vector field, map, or jacobian
    matrix; this is the integrator hot path."""
    exprs = tuple(exprs)
    em = _Emitter(dim)
    depth = 1
    for k, e in enumerate(exprs):
        depth = max(depth, em.emit(e))
        em.code.extend((OP_STORE, k))
    return Program.build(em.code, em.consts, depth, dim,
                         n_out=max(1, len(exprs)))


# silence linters: OP_SUB/OP_DIV are part of the kernel contract even though
# canonical trees never emit them directly
_ = (OP_SUB, OP_DIV)
