"""Infinitesimal actions, modules, and Morita-witness verification.

An action packages a momentum map mu: N -> M and one tangent field on N per
frame section of the algebroid.  General sections act with pulled-back
coefficients, so C-infinity-linearity is structural; what is checked at
sampled points is

* anchor compatibility    d(mu)(X_i) = s * rho(e_i) o mu,
* the (anti-)homomorphism [X_i, X_j] = s * sum_k (mu^* c^k_{ij}) X_k,

with s = +1 for right actions and s = -1 for left actions.  The sign enters
both conditions: the unique lift u with d(mu)(u) = rho(alpha) is a right
action, and the minus-sign lift used for left actions flips the anchor
image together with the bracket; a left action satisfying the unsigned
compatibility would not be the flip of any right action on the same map.

Action fields only need ``value(x)`` and ``jacobian(x)``; besides symbolic
vector fields this admits fields defined by pointwise linear solves (unique
lifts, induced Dirac actions) whose jacobians come from implicit
differentiation, still exact up to rounding.

Completeness cannot be decided numerically: the probe integrates each frame
field from sampled starts over a declared horizon and reports a tri-state.
Leaving the chart box is *not* blow-up; a trajectory only counts incomplete
when its norm runs away (or turns nonfinite), and an escape whose field
growth looks superlinear without a detected blow-up stays inconclusive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebroid import DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_TOL, \
    LieAlgebroidModel
from .calculus import ChartDomain, ScalarField, SmoothMap, VectorField
from .errors import AlgebroidMismatch, BasePointMismatch, \
    IntersectionNontrivial, ProjectionIllDefined, TransversalityFailed, \
    UniquenessFailure
from .numrank import membership_residual, null_space, numeric_rank, \
    solve_min_norm, spans_equal
from .report import FAIL, INCONCLUSIVE, PASS, CheckReport, ResidualTracker, \
    Stopwatch

LEFT = "left"
RIGHT = "right"

# completeness probe defaults; modest so pure-Python runs stay fast
PROBE_POINTS = 8
PROBE_STEPS = 200


# ---------------------------------------------------------------------------
# pointwise tangent fields


class LinearCombinationField:
    """sum_k g_k(x) * F_k with scalar-field coefficients on the total chart."""

    def __init__(self, chart, coefficients, fields):
        self.chart = chart
        self.coefficients = tuple(coefficients)
        self.fields = tuple(fields)
        if len(self.coefficients) != len(self.fields):
            raise ValueError("one coefficient per field required")

    def value(self, x):
        out = np.zeros(self.chart.dim)
        for g, F in zip(self.coefficients, self.fields):
            out += g.eval(x) * F.value(x)
        return out

    def jacobian(self, x):
        d = self.chart.dim
        J = np.zeros((d, d))
        for g, F in zip(self.coefficients, self.fields):
            gx = g.eval(x)
            grad = np.array([g.partial(j).eval(x) for j in range(d)])
            J += np.outer(F.value(x), grad) + gx * F.jacobian(x)
        return J


class SolvedField:
    """Tangent field defined pointwise by a consistent least-squares solve.

    A(x) u = b(x) with scalar-field entries; the exposed vector is
    u[take].  The jacobian differentiates the solve implicitly:
    du_k = A^+ (d_k b - (d_k A) u), valid because certified inputs make the
    system consistent.  A solution direction inside `take` that the system
    does not determine is a rank anomaly and raises UniquenessFailure.
    """

    def __init__(self, chart, matrix, rhs, take=None):
        self.chart = chart
        self.matrix = tuple(tuple(row) for row in matrix)
        self.rhs = tuple(rhs)
        n_unknowns = len(self.matrix[0])
        self.take = tuple(range(chart.dim)) if take is None else tuple(take)
        if any(len(row) != n_unknowns for row in self.matrix):
            raise ValueError("ragged solve matrix")
        self._n = n_unknowns

    def _eval_system(self, x):
        A = np.array([[f.eval(x) for f in row] for row in self.matrix])
        b = np.array([f.eval(x) for f in self.rhs])
        return A, b

    def _check_unique(self, A, x):
        ker = null_space(A)
        if ker.shape[1]:
            if np.linalg.norm(ker[list(self.take), :]) > 1e-9:
                raise UniquenessFailure(
                    f"solve underdetermined in the exposed directions "
                    f"at {tuple(np.asarray(x, float))}")

    def value(self, x):
        A, b = self._eval_system(x)
        self._check_unique(A, x)
        u, _ = solve_min_norm(A, b)
        return u[list(self.take)]

    def jacobian(self, x):
        A, b = self._eval_system(x)
        self._check_unique(A, x)
        u, _ = solve_min_norm(A, b)
        d = self.chart.dim
        J = np.zeros((len(self.take), d))
        for k in range(d):
            dA = np.array([[f.partial(k).eval(x) for f in row]
                           for row in self.matrix])
            db = np.array([f.partial(k).eval(x) for f in self.rhs])
            du, _ = solve_min_norm(A, db - dA @ u)
            J[:, k] = du[list(self.take)]
        return J


def negate_field(F):
    if isinstance(F, VectorField):
        return -F
    chart = F.chart
    minus_one = ScalarField.constant(chart, -1)
    return LinearCombinationField(chart, (minus_one,), (F,))


def pointwise_bracket(F, G, x) -> np.ndarray:
    """[F, G](x) = JG(x) F(x) - JF(x) G(x)."""
    return G.jacobian(x) @ F.value(x) - F.jacobian(x) @ G.value(x)


# ---------------------------------------------------------------------------
# the models


@dataclass
class ActionModel:
    algebroid: LieAlgebroidModel
    total: ChartDomain
    momentum: SmoothMap          # mu: N -> M
    fields: tuple                # rank tangent fields on N
    side: str = RIGHT
    horizon: float = 10.0

    def __post_init__(self):
        if self.momentum.source != self.total:
            raise AlgebroidMismatch("momentum map must start on the total chart")
        if self.momentum.target != self.algebroid.base:
            raise AlgebroidMismatch("momentum map must land on the base")
        if len(self.fields) != self.algebroid.rank:
            raise AlgebroidMismatch("one field per frame section required")
        if self.side not in (LEFT, RIGHT):
            raise ValueError("side must be 'left' or 'right'")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    @property
    def sign(self) -> int:
        return 1 if self.side == RIGHT else -1

    def section_field(self, coefficients):
        """Field of a general section: coefficients pull back along mu."""
        pulled = [f.compose(self.momentum) for f in coefficients]
        return LinearCombinationField(self.total, pulled, self.fields)


def flip_side(a: ActionModel) -> ActionModel:
    """Negate the fields and toggle the side; inverse of itself."""
    return ActionModel(
        algebroid=a.algebroid,
        total=a.total,
        momentum=a.momentum,
        fields=tuple(negate_field(F) for F in a.fields),
        side=LEFT if a.side == RIGHT else RIGHT,
        horizon=a.horizon,
    )


def poisson_map_action(P_total, cotangent_model: LieAlgebroidModel,
                       J: SmoothMap, side=LEFT, sign=-1,
                       horizon=10.0) -> ActionModel:
    """Action of a cotangent algebroid through a (anti-)Poisson submersion.

    Fields are sign * sharp_P(J^* du_a) on the total space; the default
    minus sign is the left-action lift for a Poisson J (and the right one
    for an anti-Poisson J).  check_action decides whether the declared side
    fits.
    """
    from .calculus import OneForm, pullback
    M = cotangent_model.base
    fields = []
    for a in range(cotangent_model.rank):
        du = OneForm.coordinate_basis(M, a)
        lifted = P_total.sharp(pullback(J, du))
        fields.append(lifted if sign > 0 else -lifted)
    return ActionModel(cotangent_model, J.source, J, tuple(fields),
                       side=side, horizon=horizon)


@dataclass
class QuotientChartModel:
    """User-supplied quotient: projection pi and a section sigma of it."""

    total: ChartDomain
    leaf: ChartDomain
    projection: SmoothMap        # pi: total -> leaf
    section: SmoothMap           # sigma: leaf -> total

    def __post_init__(self):
        if self.projection.source != self.total \
                or self.projection.target != self.leaf:
            raise AlgebroidMismatch("projection must map total -> leaf")
        if self.section.source != self.leaf \
                or self.section.target != self.total:
            raise AlgebroidMismatch("section must map leaf -> total")

    def verify(self, tol=DEFAULT_TOL, samples=DEFAULT_SAMPLES,
               seed=DEFAULT_SEED) -> float:
        """Max residual of pi o sigma = id and full-rank d(pi) at samples."""
        pts = self.leaf.sample(samples, seed)
        worst = 0.0
        for l in pts:
            x = self.section.eval(l)
            worst = max(worst, float(np.max(np.abs(
                self.projection.eval(x) - l))))
        for x in self.total.sample(samples, seed):
            if numeric_rank(self.projection.jacobian_at(x)) < self.leaf.dim:
                raise TransversalityFailed(
                    f"projection not a submersion at {tuple(x)}")
        if worst > tol:
            raise ProjectionIllDefined(
                f"pi o sigma differs from the identity by {worst:.3g}")
        return worst


@dataclass
class MoritaWitness:
    """Common total space with two submersions and two compatible actions."""

    X: ChartDomain
    J1: SmoothMap
    J2: SmoothMap
    left: ActionModel            # left action over A1 with momentum J1
    right: ActionModel           # right action over A2 with momentum J2
    horizon: float = 10.0

    def __post_init__(self):
        if self.left.total != self.X or self.right.total != self.X:
            raise AlgebroidMismatch("both actions must live on X")
        if self.left.side != LEFT or self.right.side != RIGHT:
            raise ValueError("witness wants a left and a right action")
        if self.left.momentum != self.J1 or self.right.momentum != self.J2:
            raise AlgebroidMismatch("action momenta must be J1 and J2")


# ---------------------------------------------------------------------------
# action and module checks


def check_action(a: ActionModel, tol=DEFAULT_TOL, samples=DEFAULT_SAMPLES,
                 seed=DEFAULT_SEED) -> CheckReport:
    """Anchor compatibility and the side-signed homomorphism at samples."""
    A = a.algebroid
    s = a.sign
    with Stopwatch() as sw:
        pts = a.total.sample(samples, seed)
        tracker = ResidualTracker()
        compat_res = 0.0
        hom_res = 0.0
        r = A.rank
        for x in pts:
            mu_x = a.momentum.eval(x)
            Jmu = a.momentum.jacobian_at(x)
            vals = [F.value(x) for F in a.fields]
            for i in range(r):
                rho_i = A.anchor[i].value(mu_x)
                res = float(np.max(np.abs(Jmu @ vals[i] - s * rho_i),
                                   initial=0.0))
                compat_res = max(compat_res, res)
                tracker.update(res, x)
            if r < 2:
                continue
            jacs = [F.jacobian(x) for F in a.fields]
            for i in range(r):
                for j in range(i + 1, r):
                    br = jacs[j] @ vals[i] - jacs[i] @ vals[j]
                    rhs = np.zeros(a.total.dim)
                    for k in range(r):
                        ck = A.c(i, j, k)
                        if not ck.is_zero:
                            rhs += ck.eval(mu_x) * vals[k]
                    res = float(np.max(np.abs(br - s * rhs), initial=0.0))
                    hom_res = max(hom_res, res)
                    tracker.update(res, x)
    return tracker.report(
        "action", tol, elapsed=sw.elapsed,
        details={"compatibility": compat_res, "homomorphism": hom_res,
                 "side": a.side})


# -- completeness probe ------------------------------------------------------


def _flow_rk4(field, u0, T, steps):
    """Autonomous RK4 flow; returns the endpoint (no guards)."""
    u = np.asarray(u0, dtype=float).copy()
    h = T / steps
    for _ in range(steps):
        k1 = field.value(u)
        k2 = field.value(u + 0.5 * h * k1)
        k3 = field.value(u + 0.5 * h * k2)
        k4 = field.value(u + h * k3)
        u = u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def probe_completeness(field, chart, horizon, probe_points=PROBE_POINTS,
                       seed=DEFAULT_SEED, steps=PROBE_STEPS) -> dict:
    """Tri-state flow-existence probe for one field over [0, horizon].

    'fail' means a detected blow-up (nonfinite state or runaway norm)
    before the horizon; 'inconclusive' means the trajectory escaped far
    outside the chart while the field was growing superlinearly along it,
    so neither existence nor blow-up was established.  Plain chart exit
    with at-most-linear field growth passes: it extends to the horizon.
    """
    scale = max(1.0, chart.scale())
    r_far = 1e3 * scale
    r_blow = 1e9 * scale
    starts = chart.sample(probe_points, seed)
    h = horizon / steps
    status = PASS
    detail = {"blown": [], "escaped_superlinear": []}
    for idx, u0 in enumerate(starts):
        u = u0.copy()
        growth_ratio = 0.0
        blown = False
        for _ in range(steps):
            try:
                k1 = field.value(u)
                k2 = field.value(u + 0.5 * h * k1)
                k3 = field.value(u + 0.5 * h * k2)
                k4 = field.value(u + h * k3)
            except (OverflowError, FloatingPointError):
                blown = True
                break
            u = u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(u)) or np.linalg.norm(u) > r_blow:
                blown = True
                break
            nu = np.linalg.norm(u)
            if nu > scale:
                growth_ratio = max(growth_ratio,
                                   np.linalg.norm(k1) / (1.0 + nu))
        if blown:
            status = FAIL
            detail["blown"].append(idx)
            continue
        nu = np.linalg.norm(u)
        if nu > r_far:
            # escaped far out: a uniformly-linear bound along the way means
            # the flow exists to any horizon, otherwise undecided
            end_ratio = np.linalg.norm(field.value(u)) / (1.0 + nu)
            if end_ratio > 4.0 * max(growth_ratio, 1e-12):
                if status == PASS:
                    status = INCONCLUSIVE
                detail["escaped_superlinear"].append(idx)
    detail["status"] = status
    return detail


def check_module(a: ActionModel, tol=DEFAULT_TOL, samples=DEFAULT_SAMPLES,
                 seed=DEFAULT_SEED, probe_points=PROBE_POINTS,
                 probe_steps=PROBE_STEPS) -> CheckReport:
    """check_action plus a submersion test for mu and completeness probes."""
    with Stopwatch() as sw:
        base = check_action(a, tol, samples, seed)
        pts = a.total.sample(samples, seed)
        submersion_ok = all(
            numeric_rank(a.momentum.jacobian_at(x)) == a.algebroid.base.dim
            for x in pts)
        completeness = PASS
        probe_details = []
        for F in a.fields:
            d = probe_completeness(F, a.total, a.horizon, probe_points,
                                   seed, probe_steps)
            probe_details.append(d["status"])
            if d["status"] == FAIL:
                completeness = FAIL
            elif d["status"] == INCONCLUSIVE and completeness == PASS:
                completeness = INCONCLUSIVE
    if not base.ok or not submersion_ok or completeness == FAIL:
        status = FAIL
    elif completeness == INCONCLUSIVE:
        status = INCONCLUSIVE
    else:
        status = PASS
    return CheckReport(
        check_id="module", kind="module", status=status,
        residual=base.residual if submersion_ok else max(base.residual, 1.0),
        tolerance=tol, worst_point=base.worst_point, ms=sw.elapsed * 1e3,
        details={"action": base.details, "submersion": submersion_ok,
                 "completeness": completeness,
                 "completeness_per_field": probe_details})


# ---------------------------------------------------------------------------
# unique lifts and leaf actions


def unique_lift_action(A: LieAlgebroidModel, J: SmoothMap, tol=DEFAULT_TOL,
                       samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED,
                       horizon=10.0) -> ActionModel:
    """Right action by the unique lift u with dJ(u) = rho(e_i) o J.

    Requires the pullback fibers to meet the tangent factor trivially,
    i.e. ker dJ = 0 at samples; with J also a surjective submersion this
    pins u uniquely.
    """
    if J.target != A.base:
        raise AlgebroidMismatch("J must land on the algebroid base")
    X = J.source
    for x in X.sample(samples, seed):
        Jx = J.jacobian_at(x)
        if numeric_rank(Jx) < A.base.dim:
            raise TransversalityFailed(
                f"dJ not surjective at {tuple(x)}")
        if null_space(Jx).shape[1]:
            raise IntersectionNontrivial(
                f"pullback fiber meets the tangent factor at {tuple(x)}")
    matrix = J.jacobian_fields
    fields = []
    for i in range(A.rank):
        rhs = tuple(comp.compose(J) for comp in A.anchor[i].components)
        fields.append(SolvedField(X, matrix, rhs, take=range(X.dim)))
    return ActionModel(A, X, J, tuple(fields), side=RIGHT, horizon=horizon)


def leaf_action_check(a: ActionModel, q: QuotientChartModel,
                      tol=DEFAULT_TOL, samples=DEFAULT_SAMPLES,
                      seed=DEFAULT_SEED) -> CheckReport:
    """Project an action to a quotient chart and re-verify it there.

    Raises ProjectionIllDefined when some projected field depends on the
    fiber (compared through the section), otherwise checks the projected
    action on the leaf chart with momentum J o sigma.
    """
    if q.total != a.total:
        raise AlgebroidMismatch("quotient total chart mismatch")
    q.verify(tol, samples, seed)
    with Stopwatch() as sw:
        pts = a.total.sample(samples, seed)
        # the projection must collapse exactly the momentum fibers
        fiber_res = 0.0
        for x in pts:
            back = q.section.eval(q.projection.eval(x))
            fiber_res = max(fiber_res, float(np.max(np.abs(
                a.momentum.eval(x) - a.momentum.eval(back)))))
        if fiber_res > tol:
            raise ProjectionIllDefined(
                f"momentum is not constant on projection fibers "
                f"(residual {fiber_res:.3g})")
        # (i) d(pi)(X_i) may not depend on the point within a fiber
        constancy = 0.0
        worst = None
        for x in pts:
            back = q.section.eval(q.projection.eval(x))
            for F in a.fields:
                v1 = q.projection.jacobian_at(x) @ F.value(x)
                v2 = q.projection.jacobian_at(back) @ F.value(back)
                r = float(np.max(np.abs(v1 - v2)))
                if r >= constancy:
                    constancy, worst = r, x
        if constancy >= tol:
            raise ProjectionIllDefined(
                f"projected field varies along a fiber by {constancy:.3g} "
                f"near {tuple(worst)}")
        # (ii) the projected action on the leaf chart
        projected = []
        for F in a.fields:
            if not isinstance(F, VectorField):
                raise AlgebroidMismatch(
                    "leaf projection needs expression vector fields")
            comps = []
            for t in range(q.leaf.dim):
                acc = ScalarField.constant(a.total, 0)
                for j in range(a.total.dim):
                    acc = acc + q.projection.jacobian_fields[t][j] \
                        * F.components[j]
                comps.append(acc.compose(q.section))
            projected.append(VectorField(q.leaf, tuple(comps)))
        new_momentum = a.momentum.compose(q.section)
        leaf_action = ActionModel(a.algebroid, q.leaf, new_momentum,
                                  tuple(projected), side=a.side,
                                  horizon=a.horizon)
        inner = check_action(leaf_action, tol, samples, seed)
    status = inner.status
    return CheckReport(
        check_id="leaf_action", kind="leaf_action", status=status,
        residual=max(constancy, inner.residual), tolerance=tol,
        worst_point=inner.worst_point, ms=sw.elapsed * 1e3,
        details={"fiber_constancy": constancy,
                 "projected_action": inner.details})


# ---------------------------------------------------------------------------
# quasi-equivalence and strong Morita witnesses


def _projector(cols) -> np.ndarray:
    if cols.shape[1] == 0:
        return np.zeros((cols.shape[0], cols.shape[0]))
    q, _ = np.linalg.qr(cols)
    r = numeric_rank(cols)
    q = q[:, :r]
    return q @ q.T


def _span_vs_kernel_residual(span_cols, ker_cols) -> float:
    """Spectral distance between the two orthogonal projectors."""
    P = _projector(span_cols)
    Q = _projector(ker_cols)
    return float(np.linalg.norm(P - Q, 2))


def check_quasi_equivalence(w: MoritaWitness, tol=DEFAULT_TOL,
                            samples=DEFAULT_SAMPLES,
                            seed=DEFAULT_SEED) -> CheckReport:
    """Kernel/span equalities of the two actions over the shared space.

    Requires both actions to pass check_action, both J_k to be submersions
    at samples, and, pointwise,

        span{xi_1(e_i)} = ker dJ2     and     span{xi_2(f_j)} = ker dJ1.

    The graph representation of the witness makes the intersection and
    fullness conditions structural; they are reported as derived flags.
    """
    with Stopwatch() as sw:
        left_rep = check_action(w.left, tol, samples, seed)
        right_rep = check_action(w.right, tol, samples, seed)
        tracker = ResidualTracker()
        rank_failures = 0
        submersion_ok = True
        pts = w.X.sample(samples, seed)
        for x in pts:
            J1x = w.J1.jacobian_at(x)
            J2x = w.J2.jacobian_at(x)
            if numeric_rank(J1x) < w.J1.target.dim \
                    or numeric_rank(J2x) < w.J2.target.dim:
                submersion_ok = False
                tracker.update(1.0, x)
                continue
            span1 = np.column_stack([F.value(x) for F in w.left.fields]) \
                if w.left.fields else np.zeros((w.X.dim, 0))
            span2 = np.column_stack([F.value(x) for F in w.right.fields]) \
                if w.right.fields else np.zeros((w.X.dim, 0))
            ker2 = null_space(J2x)
            ker1 = null_space(J1x)
            ok1 = spans_equal(span1, ker2)
            ok2 = spans_equal(span2, ker1)
            if not (ok1 and ok2):
                rank_failures += 1
            tracker.update(max(_span_vs_kernel_residual(span1, ker2),
                               _span_vs_kernel_residual(span2, ker1)), x)
    passed = left_rep.ok and right_rep.ok and submersion_ok \
        and rank_failures == 0
    return tracker.report(
        "quasi_equivalence", tol,
        elapsed=sw.elapsed,
        status=PASS if passed else FAIL,
        details={
            "left_action": left_rep.status,
            "right_action": right_rep.status,
            "submersions": submersion_ok,
            "rank_failures": rank_failures,
            # structural properties of the graph representation
            "zero_section_intersection": True,
            "fiber_fullness": True,
        })


def check_strong_morita(w: MoritaWitness, tol=DEFAULT_TOL,
                        samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED,
                        probe_points=PROBE_POINTS,
                        probe_steps=PROBE_STEPS) -> CheckReport:
    """Quasi-equivalence plus completeness and commuting actions.

    (A') both actions' frame fields pass the completeness probe on the
    declared horizon (tri-state); (B') every commutator
    [xi_1(e_i), xi_2(f_j)] vanishes at samples.
    """
    with Stopwatch() as sw:
        quasi = check_quasi_equivalence(w, tol, samples, seed)
        tracker = ResidualTracker()
        commutator_res = 0.0
        pts = w.X.sample(samples, seed)
        for x in pts:
            for F in w.left.fields:
                for G in w.right.fields:
                    r = float(np.max(np.abs(pointwise_bracket(F, G, x)),
                                     initial=0.0))
                    commutator_res = max(commutator_res, r)
                    tracker.update(r, x)
        completeness = PASS
        probes = []
        for F in list(w.left.fields) + list(w.right.fields):
            d = probe_completeness(F, w.X, w.horizon, probe_points, seed,
                                   probe_steps)
            probes.append(d["status"])
            if d["status"] == FAIL:
                completeness = FAIL
            elif d["status"] == INCONCLUSIVE and completeness == PASS:
                completeness = INCONCLUSIVE
    if not quasi.ok or completeness == FAIL or commutator_res >= tol:
        status = FAIL
    elif completeness == INCONCLUSIVE:
        status = INCONCLUSIVE
    else:
        status = PASS
    return tracker.report(
        "strong_morita", tol, elapsed=sw.elapsed, status=status,
        details={"quasi_equivalence": quasi.status,
                 "commutators": commutator_res,
                 "completeness": completeness,
                 "completeness_per_field": probes})


# ---------------------------------------------------------------------------
# tensor distribution of a bimodule composition


@dataclass
class TensorQuotientContext:
    """Leaf-space data for composing bimodules over a parametrized fiber
    product P, with the outer actions lifted to P."""

    quotient: QuotientChartModel
    outer_left_map: SmoothMap     # J1-hat: P -> M1
    outer_left_fields: tuple      # xi1-hat on P
    outer_right_map: SmoothMap    # K3-hat: P -> M3
    outer_right_fields: tuple     # eta3-hat on P


def tensor_distribution(right_mod: ActionModel, left_mod: ActionModel,
                        x, y, tol=DEFAULT_TOL, samples=DEFAULT_SAMPLES,
                        seed=DEFAULT_SEED, quotient_ctx=None):
    """Generators (xi(e_i)_x, -eta(e_i)_y) of the composition distribution.

    Returns (basis, report): `basis` spans the distribution at the given
    fiber-product point; the report carries its dimension, a pointwise
    involutivity residual for the generating fields, and, when a
    quotient context is supplied, the leaf-space kernel equalities
    ker d(J1-hat) = span(eta3-hat) and ker d(K3-hat) = span(xi1-hat).
    """
    A = right_mod.algebroid
    if left_mod.algebroid is not A:
        raise AlgebroidMismatch("modules must share the algebroid")
    if right_mod.side != RIGHT or left_mod.side != LEFT:
        raise ValueError("need a right module and a left module")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    jx = right_mod.momentum.eval(x)
    ky = left_mod.momentum.eval(y)
    if np.max(np.abs(jx - ky)) > max(tol, 1e-9):
        raise BasePointMismatch(
            f"J(x) = {tuple(jx)} differs from K(y) = {tuple(ky)}")

    with Stopwatch() as sw:
        gen = np.vstack([
            np.column_stack([F.value(x) for F in right_mod.fields])
            if right_mod.fields else np.zeros((right_mod.total.dim, 0)),
            np.column_stack([-G.value(y) for G in left_mod.fields])
            if left_mod.fields else np.zeros((left_mod.total.dim, 0)),
        ])
        dim = numeric_rank(gen)
        tracker = ResidualTracker()
        r = A.rank
        for i in range(r):
            for j in range(i + 1, r):
                # bracket of stacked generators is blockwise:
                # ([xi_i, xi_j]_x, [eta_i, eta_j]_y)
                top = pointwise_bracket(right_mod.fields[i],
                                        right_mod.fields[j], x)
                bottom = pointwise_bracket(left_mod.fields[i],
                                           left_mod.fields[j], y)
                vec = np.concatenate([top, bottom])
                tracker.update(membership_residual(gen, vec),
                               np.concatenate([x, y]))
        details = {"dimension": int(dim)}

        if quotient_ctx is not None:
            q = quotient_ctx.quotient
            q.verify(tol, samples, seed)
            ker_fail = 0
            lm = quotient_ctx.outer_left_map.compose(q.section)
            rm = quotient_ctx.outer_right_map.compose(q.section)
            for l in q.leaf.sample(samples, seed):
                p = q.section.eval(l)
                dpi = q.projection.jacobian_at(p)
                spans_left = np.column_stack(
                    [dpi @ F.value(p)
                     for F in quotient_ctx.outer_left_fields]) \
                    if quotient_ctx.outer_left_fields \
                    else np.zeros((q.leaf.dim, 0))
                spans_right = np.column_stack(
                    [dpi @ F.value(p)
                     for F in quotient_ctx.outer_right_fields]) \
                    if quotient_ctx.outer_right_fields \
                    else np.zeros((q.leaf.dim, 0))
                if not spans_equal(spans_right, null_space(lm.jacobian_at(l))):
                    ker_fail += 1
                if not spans_equal(spans_left, null_space(rm.jacobian_at(l))):
                    ker_fail += 1
            details["kernel_equality_failures"] = ker_fail
            if ker_fail:
                tracker.update(float(ker_fail))

    report = tracker.report("tensor_distribution", tol, elapsed=sw.elapsed,
                            details=details)
    return gen, report
