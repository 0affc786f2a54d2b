"""Scalar fields, vector fields, forms and smooth maps on box charts.

Everything lives on a ``ChartDomain``: a named box in R^dim used for
deterministic sampling.  Scalar fields are canonical expression trees
(`_expr`), so partial derivatives are exact and closure under
differentiation holds by construction; only evaluation rounds.

Index conventions used throughout (0-based internally, ``x1``.. in text):

* two-forms and bivectors store the strict upper triangle; ``entry(i, j)``
  returns the signed component, ``entry(i, i)`` is zero;
* a bivector P acts on covectors, ``P(dx_i, dx_j) = entry(i, j)``, and its
  induced bundle map obeys ``<beta, sharp(alpha)> = P(beta, alpha)``, i.e.
  ``sharp(alpha)^i = sum_j entry(i, j) alpha_j``;
* a two-form B acts on vectors, ``B(X, Y) = sum entry(i, j) X^i Y^j``, and
  ``interior(X, B)_j = sum_i X^i entry(i, j)``.

All objects are immutable after construction and evaluation is pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np

from . import _expr as ex
from ._parser import default_names, parse_expression
from .errors import ChartMismatch, DegreeMismatch, EvaluationPole, \
    PointOutsideChart
from .kernel import eval_fused, eval_many, eval_one

MAX_DIM = 8


def _eval_fused_program(program, point):
    try:
        return eval_fused(program, point)
    except ZeroDivisionError as zde:
        raise EvaluationPole(
            f"pole while evaluating at {tuple(point)}") from zde


@dataclass(frozen=True)
class ChartDomain:
    """A box-shaped coordinate chart used for sampling."""

    name: str
    dim: int
    box: tuple  # ((lo, hi), ...) per coordinate

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("chart dimension must be >= 1")
        if self.dim > MAX_DIM:
            raise ValueError(f"chart dimension capped at {MAX_DIM}")
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        if len(box) != self.dim:
            raise ValueError("box must have one interval per coordinate")
        for lo, hi in box:
            if not lo < hi:
                raise ValueError(f"degenerate interval [{lo}, {hi}]")
        object.__setattr__(self, "box", box)

    def sample(self, n=64, seed=0) -> np.ndarray:
        """Deterministic uniform sample of n points, shape (n, dim)."""
        rng = np.random.default_rng(seed)
        pts = rng.random((n, self.dim))
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        return lo + pts * (hi - lo)

    def contains(self, point, slack=0.0) -> bool:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            return False
        for v, (lo, hi) in zip(point, self.box):
            if v < lo - slack or v > hi + slack:
                return False
        return True

    def scale(self) -> float:
        return max(abs(v) for b in self.box for v in b)


def interval_chart(name="I", hi=1.0) -> ChartDomain:
    """The unit time interval as a 1-d chart (paths use variable ``t``)."""
    return ChartDomain(name, 1, ((0.0, float(hi)),))


@dataclass(frozen=True)
class ScalarField:
    """An expression over the coordinates of one chart."""

    chart: ChartDomain
    expr: ex.Expr

    # -- construction --------------------------------------------------

    @staticmethod
    def parse(chart, text, names=None) -> "ScalarField":
        table = default_names(chart.dim) if names is None else names
        e = parse_expression(text, table)
        bad = [i for i in ex.free_vars(e) if i >= chart.dim]
        if bad:
            raise ChartMismatch(
                f"expression {text!r} uses coordinate x{bad[0] + 1} outside "
                f"chart {chart.name!r} of dimension {chart.dim}")
        return ScalarField(chart, e)

    @staticmethod
    def constant(chart, value) -> "ScalarField":
        return ScalarField(chart, ex.num(value))

    @staticmethod
    def coordinate(chart, index) -> "ScalarField":
        if not 0 <= index < chart.dim:
            raise ValueError("coordinate index out of range")
        return ScalarField(chart, ex.var(index))

    # -- algebra ---------------------------------------------------------

    def _lift(self, other):
        if isinstance(other, ScalarField):
            if other.chart is not self.chart and other.chart != self.chart:
                raise ChartMismatch("scalar fields live on different charts")
            return other.expr
        if isinstance(other, (int, float, Fraction)):
            return ex.num(other)
        return NotImplemented

    def __add__(self, other):
        e = self._lift(other)
        return NotImplemented if e is NotImplemented \
            else ScalarField(self.chart, ex.add(self.expr, e))

    __radd__ = __add__

    def __sub__(self, other):
        e = self._lift(other)
        return NotImplemented if e is NotImplemented \
            else ScalarField(self.chart, ex.sub(self.expr, e))

    def __rsub__(self, other):
        e = self._lift(other)
        return NotImplemented if e is NotImplemented \
            else ScalarField(self.chart, ex.sub(e, self.expr))

    def __mul__(self, other):
        e = self._lift(other)
        return NotImplemented if e is NotImplemented \
            else ScalarField(self.chart, ex.mul(self.expr, e))

    __rmul__ = __mul__

    def __truediv__(self, other):
        e = self._lift(other)
        return NotImplemented if e is NotImplemented \
            else ScalarField(self.chart, ex.div(self.expr, e))

    def __rtruediv__(self, other):
        e = self._lift(other)
        return NotImplemented if e is NotImplemented \
            else ScalarField(self.chart, ex.div(e, self.expr))

    def __pow__(self, n):
        return ScalarField(self.chart, ex.pow_int(self.expr, n))

    def __neg__(self):
        return ScalarField(self.chart, ex.neg(self.expr))

    @property
    def is_zero(self) -> bool:
        return self.expr == ex.ZERO

    # -- calculus ---------------------------------------------------------

    def partial(self, index) -> "ScalarField":
        return _partial(self, index)

    def compose(self, smooth_map) -> "ScalarField":
        """Pull back along a map into this field's chart."""
        if smooth_map.target != self.chart:
            raise ChartMismatch("map target does not match field chart")
        table = {i: c.expr for i, c in enumerate(smooth_map.components)}
        return ScalarField(smooth_map.source,
                           ex.substitute(self.expr, table))

    # -- evaluation -------------------------------------------------------

    @cached_property
    def _program(self):
        return ex.compile_expr(self.expr, self.chart.dim)

    def eval(self, point, check_domain=False) -> float:
        if check_domain and not self.chart.contains(point):
            raise PointOutsideChart(
                f"{tuple(point)} outside chart {self.chart.name!r}")
        try:
            return eval_one(self._program, point)
        except ZeroDivisionError as zde:
            raise EvaluationPole(
                f"pole while evaluating at {tuple(point)}") from zde

    def eval_many(self, points) -> np.ndarray:
        try:
            return eval_many(self._program, points)
        except ZeroDivisionError as zde:
            raise EvaluationPole("pole while evaluating a sample batch") \
                from zde

    def __repr__(self):
        return f"ScalarField({self.chart.name}, {ex.to_str(self.expr)})"


@lru_cache(maxsize=None)
def _partial(field: ScalarField, index: int) -> ScalarField:
    if not 0 <= index < field.chart.dim:
        raise ValueError("derivative index out of range")
    return ScalarField(field.chart, ex.derivative(field.expr, index))


def eval_and_derive(field: ScalarField, point, order) -> float:
    """Exact mixed partial (multi-index `order`) evaluated at `point`.

    The point must lie in the chart box; differentiation is symbolic and
    only the final evaluation rounds.
    """
    point = tuple(float(v) for v in point)
    if len(order) != field.chart.dim:
        raise ValueError("multi-index length must equal chart dimension")
    if not field.chart.contains(point):
        raise PointOutsideChart(
            f"{point} outside chart {field.chart.name!r}")
    g = field
    for axis, k in enumerate(order):
        if k < 0:
            raise ValueError("multi-index entries must be >= 0")
        for _ in range(k):
            g = g.partial(axis)
    return g.eval(point)


def _require_same_chart(*objs):
    chart = objs[0].chart
    for o in objs[1:]:
        if o.chart != chart:
            raise ChartMismatch("objects live on different charts")
    return chart


def _zip_fields(chart, exprs):
    return tuple(ScalarField(chart, e) for e in exprs)


@dataclass(frozen=True)
class VectorField:
    chart: ChartDomain
    components: tuple  # dim ScalarFields

    def __post_init__(self):
        if len(self.components) != self.chart.dim:
            raise ValueError("component count must equal chart dimension")

    @staticmethod
    def parse(chart, texts) -> "VectorField":
        return VectorField(chart,
                           tuple(ScalarField.parse(chart, t) for t in texts))

    @staticmethod
    def zero(chart) -> "VectorField":
        z = ScalarField.constant(chart, 0)
        return VectorField(chart, (z,) * chart.dim)

    @staticmethod
    def coordinate_basis(chart, index) -> "VectorField":
        comps = [ScalarField.constant(chart, 0) for _ in range(chart.dim)]
        comps[index] = ScalarField.constant(chart, 1)
        return VectorField(chart, tuple(comps))

    def apply_to(self, f: ScalarField) -> ScalarField:
        """Directional derivative X(f)."""
        _require_same_chart(self, f)
        out = ScalarField.constant(self.chart, 0)
        for i, c in enumerate(self.components):
            out = out + c * f.partial(i)
        return out

    @cached_property
    def _value_program(self):
        return ex.compile_fused([c.expr for c in self.components],
                                self.chart.dim)

    @cached_property
    def _jacobian_program(self):
        d = self.chart.dim
        return ex.compile_fused(
            [self.components[i].partial(j).expr
             for i in range(d) for j in range(d)], d)

    def value(self, point) -> np.ndarray:
        return _eval_fused_program(self._value_program, point)

    def jacobian(self, point) -> np.ndarray:
        d = self.chart.dim
        return _eval_fused_program(self._jacobian_program,
                                   point).reshape(d, d)

    def values_many(self, points) -> np.ndarray:
        """Component values at each row of `points`; shape (n, dim)."""
        return np.column_stack([c.eval_many(points)
                                for c in self.components])

    def __add__(self, other):
        _require_same_chart(self, other)
        return VectorField(self.chart, tuple(
            a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        _require_same_chart(self, other)
        return VectorField(self.chart, tuple(
            a - b for a, b in zip(self.components, other.components)))

    def __neg__(self):
        return VectorField(self.chart, tuple(-c for c in self.components))

    def scaled(self, f) -> "VectorField":
        return VectorField(self.chart,
                           tuple(f * c for c in self.components))


@dataclass(frozen=True)
class OneForm:
    chart: ChartDomain
    components: tuple

    def __post_init__(self):
        if len(self.components) != self.chart.dim:
            raise ValueError("component count must equal chart dimension")

    @staticmethod
    def parse(chart, texts) -> "OneForm":
        return OneForm(chart,
                       tuple(ScalarField.parse(chart, t) for t in texts))

    @staticmethod
    def zero(chart) -> "OneForm":
        z = ScalarField.constant(chart, 0)
        return OneForm(chart, (z,) * chart.dim)

    @staticmethod
    def coordinate_basis(chart, index) -> "OneForm":
        comps = [ScalarField.constant(chart, 0) for _ in range(chart.dim)]
        comps[index] = ScalarField.constant(chart, 1)
        return OneForm(chart, tuple(comps))

    @cached_property
    def _value_program(self):
        return ex.compile_fused([c.expr for c in self.components],
                                self.chart.dim)

    def value(self, point) -> np.ndarray:
        return _eval_fused_program(self._value_program, point)

    def values_many(self, points) -> np.ndarray:
        return np.column_stack([c.eval_many(points)
                                for c in self.components])

    def __add__(self, other):
        _require_same_chart(self, other)
        return OneForm(self.chart, tuple(
            a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        _require_same_chart(self, other)
        return OneForm(self.chart, tuple(
            a - b for a, b in zip(self.components, other.components)))

    def __neg__(self):
        return OneForm(self.chart, tuple(-c for c in self.components))

    def scaled(self, f) -> "OneForm":
        return OneForm(self.chart, tuple(f * c for c in self.components))


class _Antisymmetric:
    """Shared behaviour of TwoForm and Bivector (strict upper triangle)."""

    def _init_entries(self, chart, entries):
        zero = ScalarField.constant(chart, 0)
        table = {}
        for (i, j), f in entries.items():
            if i == j:
                raise ValueError("diagonal entries must be omitted")
            if not (0 <= i < chart.dim and 0 <= j < chart.dim):
                raise ValueError("entry index out of range")
            if isinstance(f, (int, float, Fraction)):
                f = ScalarField.constant(chart, f)
            if f.chart != chart:
                raise ChartMismatch("entry on a different chart")
            if j < i:
                i, j, f = j, i, -f
            if (i, j) in table:
                raise ValueError(f"duplicate entry ({i}, {j})")
            if not f.is_zero:
                table[(i, j)] = f
        object.__setattr__(self, "upper", table)
        object.__setattr__(self, "_zero", zero)

    def entry(self, i, j) -> ScalarField:
        if i == j:
            return self._zero
        if i < j:
            return self.upper.get((i, j), self._zero)
        f = self.upper.get((j, i))
        return self._zero if f is None else -f

    def matrix_at(self, point) -> np.ndarray:
        d = self.chart.dim
        M = np.zeros((d, d))
        for (i, j), f in self.upper.items():
            v = f.eval(point)
            M[i, j] = v
            M[j, i] = -v
        return M

    def _combine(self, other, sign):
        _require_same_chart(self, other)
        keys = set(self.upper) | set(other.upper)
        entries = {k: self.entry(*k) + sign * other.entry(*k) for k in keys}
        return type(self)(self.chart, entries)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return type(self)(self.chart,
                          {k: -f for k, f in self.upper.items()})


@dataclass(frozen=True, eq=False)
class TwoForm(_Antisymmetric):
    chart: ChartDomain
    entries: dict

    def __post_init__(self):
        self._init_entries(self.chart, self.entries)

    @staticmethod
    def parse(chart, entry_texts: dict) -> "TwoForm":
        return TwoForm(chart, {
            k: ScalarField.parse(chart, t) for k, t in entry_texts.items()})


@dataclass(frozen=True, eq=False)
class Bivector(_Antisymmetric):
    chart: ChartDomain
    entries: dict

    def __post_init__(self):
        self._init_entries(self.chart, self.entries)

    @staticmethod
    def parse(chart, entry_texts: dict) -> "Bivector":
        return Bivector(chart, {
            k: ScalarField.parse(chart, t) for k, t in entry_texts.items()})

    def sharp(self, alpha: OneForm) -> VectorField:
        """Induced bundle map: <beta, sharp(alpha)> = P(beta, alpha)."""
        _require_same_chart(self, alpha)
        d = self.chart.dim
        comps = []
        for i in range(d):
            acc = ScalarField.constant(self.chart, 0)
            for j in range(d):
                e = self.entry(i, j)
                if not e.is_zero:
                    acc = acc + e * alpha.components[j]
            comps.append(acc)
        return VectorField(self.chart, tuple(comps))

    def pair(self, alpha: OneForm, beta: OneForm) -> ScalarField:
        """P(alpha, beta) = sum_{i<j} entry(i,j) (a_i b_j - a_j b_i)."""
        _require_same_chart(self, alpha, beta)
        acc = ScalarField.constant(self.chart, 0)
        for (i, j), f in self.upper.items():
            acc = acc + f * (alpha.components[i] * beta.components[j]
                             - alpha.components[j] * beta.components[i])
        return acc


# ---------------------------------------------------------------------------
# Cartan operations


def lie_bracket_vf(X: VectorField, Y: VectorField) -> VectorField:
    """[X, Y]^i = sum_j (X^j d_j Y^i - Y^j d_j X^i)."""
    chart = _require_same_chart(X, Y)
    comps = []
    for i in range(chart.dim):
        acc = ScalarField.constant(chart, 0)
        for j in range(chart.dim):
            acc = acc + X.components[j] * Y.components[i].partial(j) \
                - Y.components[j] * X.components[i].partial(j)
        comps.append(acc)
    return VectorField(chart, tuple(comps))


def exterior_d(obj):
    """d on functions and 1-forms; d(d f) is the zero 2-form identically."""
    if isinstance(obj, ScalarField):
        return OneForm(obj.chart, tuple(
            obj.partial(i) for i in range(obj.chart.dim)))
    if isinstance(obj, OneForm):
        entries = {}
        d = obj.chart.dim
        for i in range(d):
            for j in range(i + 1, d):
                entries[(i, j)] = obj.components[j].partial(i) \
                    - obj.components[i].partial(j)
        return TwoForm(obj.chart, entries)
    raise DegreeMismatch(
        f"exterior derivative undefined for {type(obj).__name__}")


def interior(X: VectorField, form):
    """Contraction in the first slot: (i_X w)(...) = w(X, ...)."""
    if isinstance(form, OneForm):
        chart = _require_same_chart(X, form)
        acc = ScalarField.constant(chart, 0)
        for xi, ai in zip(X.components, form.components):
            acc = acc + xi * ai
        return acc
    if isinstance(form, TwoForm):
        chart = _require_same_chart(X, form)
        comps = []
        for j in range(chart.dim):
            acc = ScalarField.constant(chart, 0)
            for i in range(chart.dim):
                e = form.entry(i, j)
                if not e.is_zero:
                    acc = acc + X.components[i] * e
            comps.append(acc)
        return OneForm(chart, tuple(comps))
    raise DegreeMismatch(
        f"interior product undefined for {type(form).__name__}")


def lie_derivative(X: VectorField, obj):
    """L_X f = X(f);  L_X alpha = d(i_X alpha) + i_X d(alpha)."""
    if isinstance(obj, ScalarField):
        return X.apply_to(obj)
    if isinstance(obj, OneForm):
        return exterior_d(interior(X, obj)) + interior(X, exterior_d(obj))
    raise DegreeMismatch(
        f"lie derivative undefined for {type(obj).__name__}")


def cartan(kind, *args):
    """Dispatcher: kind in {'exterior_d', 'interior', 'lie_derivative'}."""
    if kind == "exterior_d":
        (obj,) = args
        return exterior_d(obj)
    if kind == "interior":
        X, form = args
        return interior(X, form)
    if kind == "lie_derivative":
        X, obj = args
        return lie_derivative(X, obj)
    raise ValueError(f"unknown Cartan operation {kind!r}")


def d_two_form_entries(B: TwoForm) -> dict:
    """Components of the 3-form dB: (i<j<k) -> d_iB_jk - d_jB_ik + d_kB_ij.

    Used for closedness checks; no standalone 3-form type exists.
    """
    d = B.chart.dim
    out = {}
    for i in range(d):
        for j in range(i + 1, d):
            for k in range(j + 1, d):
                out[(i, j, k)] = B.entry(j, k).partial(i) \
                    - B.entry(i, k).partial(j) + B.entry(i, j).partial(k)
    return out


# ---------------------------------------------------------------------------
# smooth maps


@dataclass(frozen=True)
class SmoothMap:
    source: ChartDomain
    target: ChartDomain
    components: tuple  # target.dim ScalarFields on the source chart

    def __post_init__(self):
        if len(self.components) != self.target.dim:
            raise ValueError("component count must equal target dimension")
        for c in self.components:
            if c.chart != self.source:
                raise ChartMismatch("map component on wrong chart")

    @staticmethod
    def parse(source, target, texts, names=None) -> "SmoothMap":
        return SmoothMap(source, target, tuple(
            ScalarField.parse(source, t, names) for t in texts))

    @staticmethod
    def identity(chart) -> "SmoothMap":
        return SmoothMap(chart, chart, tuple(
            ScalarField.coordinate(chart, i) for i in range(chart.dim)))

    @cached_property
    def _value_program(self):
        return ex.compile_fused([c.expr for c in self.components],
                                self.source.dim)

    def eval(self, point) -> np.ndarray:
        return _eval_fused_program(self._value_program, point)

    def eval_many(self, points) -> np.ndarray:
        return np.column_stack([c.eval_many(points)
                                for c in self.components])

    @cached_property
    def jacobian_fields(self) -> tuple:
        """(target.dim x source.dim) matrix of ScalarFields d_j F_i."""
        return tuple(
            tuple(c.partial(j) for j in range(self.source.dim))
            for c in self.components)

    @cached_property
    def _jacobian_program(self):
        return ex.compile_fused(
            [f.expr for row in self.jacobian_fields for f in row],
            self.source.dim)

    def jacobian_at(self, point) -> np.ndarray:
        return _eval_fused_program(self._jacobian_program, point).reshape(
            self.target.dim, self.source.dim)

    def compose(self, inner: "SmoothMap") -> "SmoothMap":
        """self after inner (inner maps into self.source)."""
        if inner.target != self.source:
            raise ChartMismatch("maps do not compose")
        return SmoothMap(inner.source, self.target, tuple(
            c.compose(inner) for c in self.components))


def pullback(F: SmoothMap, obj):
    """Pull back a function, 1-form or 2-form along F."""
    if isinstance(obj, ScalarField):
        if obj.chart != F.target:
            raise ChartMismatch("field is not on the map target")
        return obj.compose(F)
    if isinstance(obj, OneForm):
        if obj.chart != F.target:
            raise ChartMismatch("form is not on the map target")
        Jf = F.jacobian_fields
        comps = []
        for j in range(F.source.dim):
            acc = ScalarField.constant(F.source, 0)
            for i in range(F.target.dim):
                acc = acc + obj.components[i].compose(F) * Jf[i][j]
            comps.append(acc)
        return OneForm(F.source, tuple(comps))
    if isinstance(obj, TwoForm):
        if obj.chart != F.target:
            raise ChartMismatch("form is not on the map target")
        Jf = F.jacobian_fields
        entries = {}
        for j in range(F.source.dim):
            for k in range(j + 1, F.source.dim):
                acc = ScalarField.constant(F.source, 0)
                for (i, l), f in obj.upper.items():
                    acc = acc + f.compose(F) * (Jf[i][j] * Jf[l][k]
                                                - Jf[i][k] * Jf[l][j])
                entries[(j, k)] = acc
        return TwoForm(F.source, entries)
    raise DegreeMismatch(f"cannot pull back {type(obj).__name__}")


def pushforward_at(F: SmoothMap, point, v) -> np.ndarray:
    """Differential of F at a point applied to a tangent vector."""
    return F.jacobian_at(point) @ np.asarray(v, dtype=float)


def pullback_pushforward(F: SmoothMap, obj, point=None, vector=None):
    """Combined dispatcher: forms and functions pull back, tangent vectors
    push forward pointwise (supply point and vector)."""
    if vector is not None:
        if point is None:
            raise ValueError("pointwise pushforward needs a base point")
        return pushforward_at(F, point, vector)
    return pullback(F, obj)
