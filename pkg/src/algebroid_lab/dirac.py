"""Generalized-tangent calculus: pairing, Courant bracket, Dirac frames.

Sections of TM + T*M are (vector field, one-form) pairs.  The symmetric
pairing is <(X, a), (Y, b)> = b(X) + a(Y), with no 1/2 normalization.

The bracket implemented here is the skew-symmetric Courant bracket

    [[(U, a), (V, b)]] = ([U, V],  L_U b - i_V da - (1/2) d<(U,a),(V,b)>),

whose correction term vanishes whenever the arguments pair to zero; in
particular on frames of isotropic subbundles, where it agrees with the
non-skew variant term by term.  Antisymmetry is exact at the tree level.

A Dirac frame is certified by three sampled conditions: isotropy of all
frame pairs, pointwise rank equal to dim(M), and involutivity (each frame
bracket lies in the pointwise frame span, by least squares).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._expr import Rat, rat
from .action import RIGHT, ActionModel, SolvedField
from .algebroid import DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_TOL, \
    LieAlgebroidModel
from .calculus import Bivector, ChartDomain, OneForm, ScalarField, \
    SmoothMap, TwoForm, VectorField, d_two_form_entries, exterior_d, \
    interior, lie_bracket_vf, lie_derivative, pullback
from .errors import AlgebroidMismatch, ChartMismatch, NotCertifiedStrong
from .numrank import intersection_dim, membership_residual, null_space, \
    numeric_rank, spans_equal
from .report import FAIL, PASS, CheckReport, ResidualTracker, Stopwatch


@dataclass(frozen=True)
class GeneralizedSection:
    chart: ChartDomain
    vector: VectorField
    form: OneForm

    def __post_init__(self):
        if self.vector.chart != self.chart or self.form.chart != self.chart:
            raise ChartMismatch("vector and form parts on different charts")

    def value(self, point) -> np.ndarray:
        """Stacked (vector, form) components, length 2 dim."""
        return np.concatenate([self.vector.value(point),
                               self.form.value(point)])

    def __add__(self, other):
        return GeneralizedSection(self.chart, self.vector + other.vector,
                                  self.form + other.form)

    def __sub__(self, other):
        return GeneralizedSection(self.chart, self.vector - other.vector,
                                  self.form - other.form)

    def __neg__(self):
        return GeneralizedSection(self.chart, -self.vector, -self.form)


@dataclass
class DiracStructureModel:
    chart: ChartDomain
    frame: tuple                 # dim(M) GeneralizedSections
    label: str = ""
    certified: bool = False
    certification_residual: float | None = None

    def __post_init__(self):
        if len(self.frame) != self.chart.dim:
            raise AlgebroidMismatch(
                "a Dirac frame needs exactly dim(M) sections")
        for s in self.frame:
            if s.chart != self.chart:
                raise ChartMismatch("frame section on wrong chart")

    def matrix_at(self, point) -> np.ndarray:
        """(2 dim x dim) matrix whose columns are the frame values."""
        return np.column_stack([s.value(point) for s in self.frame])


def frames_equal(D1: DiracStructureModel, D2: DiracStructureModel) -> bool:
    """Field-by-field structural equality of the two frames."""
    if D1.chart != D2.chart:
        return False
    for s1, s2 in zip(D1.frame, D2.frame):
        for a, b in zip(s1.vector.components + s1.form.components,
                        s2.vector.components + s2.form.components):
            if a.expr != b.expr:
                return False
    return True


def graph_of_bivector(P: Bivector, label="") -> DiracStructureModel:
    """Frame (sharp(dx_i), dx_i)."""
    chart = P.chart
    frame = []
    for i in range(chart.dim):
        dxi = OneForm.coordinate_basis(chart, i)
        frame.append(GeneralizedSection(chart, P.sharp(dxi), dxi))
    return DiracStructureModel(chart, tuple(frame),
                               label=label or "graph_of_bivector")


def graph_of_two_form(B: TwoForm, label="") -> DiracStructureModel:
    """Frame (d_i, i_{d_i} B)."""
    chart = B.chart
    frame = []
    for i in range(chart.dim):
        ei = VectorField.coordinate_basis(chart, i)
        frame.append(GeneralizedSection(chart, ei, interior(ei, B)))
    return DiracStructureModel(chart, tuple(frame),
                               label=label or "graph_of_two_form")


# ---------------------------------------------------------------------------
# pairing and bracket


def pairing(s1: GeneralizedSection, s2: GeneralizedSection) -> ScalarField:
    """b(X) + a(Y); symmetric."""
    if s1.chart != s2.chart:
        raise ChartMismatch("sections on different charts")
    return interior(s1.vector, s2.form) + interior(s2.vector, s1.form)


def courant_bracket(s1: GeneralizedSection,
                    s2: GeneralizedSection) -> GeneralizedSection:
    """Skew-symmetric Courant bracket (see module docstring)."""
    if s1.chart != s2.chart:
        raise ChartMismatch("sections on different charts")
    U, a = s1.vector, s1.form
    V, b = s2.vector, s2.form
    vec = lie_bracket_vf(U, V)
    form = lie_derivative(U, b) - interior(V, exterior_d(a))
    half = ScalarField(s1.chart, rat(Fraction(1, 2)))
    form = form - exterior_d(pairing(s1, s2)).scaled(half)
    return GeneralizedSection(s1.chart, vec, form)


# ---------------------------------------------------------------------------
# certification


def check_dirac(D: DiracStructureModel, tol=DEFAULT_TOL,
                samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED) -> CheckReport:
    """Isotropy, pointwise rank, and involutivity of the frame."""
    n = D.chart.dim
    with Stopwatch() as sw:
        pts = D.chart.sample(samples, seed)
        tracker = ResidualTracker()
        isotropy_res = 0.0
        rank_failures = 0
        involutivity_res = 0.0
        per_sample_involutivity = np.zeros(len(pts))

        for i in range(n):
            for j in range(i, n):
                p = pairing(D.frame[i], D.frame[j])
                if p.is_zero:
                    continue
                vals = np.abs(p.eval_many(pts))
                k = int(np.argmax(vals))
                isotropy_res = max(isotropy_res, float(vals[k]))
                tracker.update(vals[k], pts[k])

        mats = [D.matrix_at(x) for x in pts]
        for x, M in zip(pts, mats):
            if numeric_rank(M) != n:
                rank_failures += 1
                tracker.update(1.0, x)

        brackets = {}
        for i in range(n):
            for j in range(i + 1, n):
                brackets[(i, j)] = courant_bracket(D.frame[i], D.frame[j])
        for idx, (x, M) in enumerate(zip(pts, mats)):
            worst_here = 0.0
            for br in brackets.values():
                r = membership_residual(M, br.value(x))
                worst_here = max(worst_here, r)
            per_sample_involutivity[idx] = worst_here
            involutivity_res = max(involutivity_res, worst_here)
            tracker.update(worst_here, x)

    report = tracker.report(
        "dirac", tol, elapsed=sw.elapsed,
        status=PASS if (tracker.max < tol and rank_failures == 0) else FAIL,
        details={
            "isotropy": isotropy_res,
            "rank_failures": rank_failures,
            "involutivity": involutivity_res,
            "involutivity_per_sample": per_sample_involutivity.tolist(),
        })
    D.certified = report.ok
    D.certification_residual = report.residual
    return report


# ---------------------------------------------------------------------------
# gauge transformations


@dataclass
class GaugeResult:
    model: DiracStructureModel
    b_closed: bool
    closedness_residual: float


def gauge_transform(D: DiracStructureModel, B: TwoForm, tol=DEFAULT_TOL,
                    samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED) -> GaugeResult:
    """Frame map (Y, b) -> (Y, b + i_Y B).

    B is accepted even when it fails the sampled closedness test; the
    result records the dB residual so the broken case stays observable.
    """
    if B.chart != D.chart:
        raise ChartMismatch("two-form on a different chart")
    pts = D.chart.sample(samples, seed)
    d_res = 0.0
    for f in d_two_form_entries(B).values():
        if f.is_zero:
            continue
        d_res = max(d_res, float(np.max(np.abs(f.eval_many(pts)))))
    frame = tuple(
        GeneralizedSection(D.chart, s.vector,
                           s.form + interior(s.vector, B))
        for s in D.frame)
    model = DiracStructureModel(D.chart, frame,
                                label=f"gauge({D.label})" if D.label else "")
    return GaugeResult(model=model, b_closed=d_res < tol,
                       closedness_residual=d_res)


# ---------------------------------------------------------------------------
# Dirac maps


@dataclass
class DiracMapData:
    source: DiracStructureModel      # D_N on the map's source chart
    target: DiracStructureModel      # D_M on the map's target chart
    map: SmoothMap                   # F: N -> M
    forward_certified: bool = False
    strong_certified: bool = False

    def __post_init__(self):
        if self.map.source != self.source.chart:
            raise ChartMismatch("map source must carry the source structure")
        if self.map.target != self.target.chart:
            raise ChartMismatch("map target must carry the target structure")


def _pushforward_span(dm: DiracMapData, x) -> np.ndarray:
    """Columns spanning {(dF U, beta) : (U, dF^* beta) in D_N} at x."""
    dN = dm.source.chart.dim
    dM = dm.target.chart.dim
    M = dm.source.matrix_at(x)
    Dv, Df = M[:dN, :], M[dN:, :]
    JF = dm.map.jacobian_at(x)
    # unknowns (U, beta, c): U = Dv c  and  JF^T beta = Df c
    rows = np.zeros((2 * dN, dN + dM + dN))
    rows[:dN, :dN] = np.eye(dN)
    rows[:dN, dN + dM:] = -Dv
    rows[dN:, dN:dN + dM] = JF.T
    rows[dN:, dN + dM:] = -Df
    sols = null_space(rows)
    out = []
    for k in range(sols.shape[1]):
        U = sols[:dN, k]
        beta = sols[dN:dN + dM, k]
        out.append(np.concatenate([JF @ U, beta]))
    if not out:
        return np.zeros((2 * dM, 0))
    return np.column_stack(out)


def _tangent_kernel(D: DiracStructureModel, x) -> np.ndarray:
    """Columns spanning ker(D)_x = {U : (U, 0) in D_x}."""
    dN = D.chart.dim
    M = D.matrix_at(x)
    Dv, Df = M[:dN, :], M[dN:, :]
    combos = null_space(Df)
    if combos.shape[1] == 0:
        return np.zeros((dN, 0))
    return Dv @ combos


def check_dirac_map(dm: DiracMapData, mode="forward", tol=DEFAULT_TOL,
                    samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED) -> CheckReport:
    """Forward condition as a sampled subspace equality; strong adds
    ker(dF) meet ker(D_N) = 0 pointwise."""
    if mode not in ("forward", "strong"):
        raise ValueError("mode must be 'forward' or 'strong'")
    with Stopwatch() as sw:
        pts = dm.source.chart.sample(samples, seed)
        tracker = ResidualTracker()
        forward_failures = 0
        kernel_failures = 0
        for x in pts:
            pushed = _pushforward_span(dm, x)
            target = dm.target.matrix_at(dm.map.eval(x))
            if not spans_equal(pushed, target):
                forward_failures += 1
                tracker.update(1.0, x)
            if mode == "strong":
                kerF = null_space(dm.map.jacobian_at(x))
                kerD = _tangent_kernel(dm.source, x)
                if intersection_dim(kerF, kerD) > 0:
                    kernel_failures += 1
                    tracker.update(1.0, x)
    ok = forward_failures == 0 and kernel_failures == 0
    report = tracker.report(
        "dirac_map", tol, elapsed=sw.elapsed,
        status=PASS if ok else FAIL,
        details={"mode": mode, "forward_failures": forward_failures,
                 "kernel_failures": kernel_failures})
    if ok:
        dm.forward_certified = True
        if mode == "strong":
            dm.strong_certified = True
    return report


# ---------------------------------------------------------------------------
# Dirac structures as Lie algebroids


def _solve_symbolic(columns, rhs, chart):
    """Solve sum_k c_k * columns[k] = rhs for scalar-field unknowns.

    columns: list of n lists of row fields (length m >= n); rhs: m fields.
    Gaussian elimination with structurally-nonzero pivots, preferring
    constant entries; valid wherever the chosen pivots do not vanish.
    """
    n = len(columns)
    m = len(rhs)
    rows = [[columns[k][r] for k in range(n)] + [rhs[r]] for r in range(m)]
    order = []
    used = set()
    for col in range(n):
        pivot_row = None
        best = None
        for r in range(m):
            if r in used:
                continue
            e = rows[r][col]
            if e.is_zero:
                continue
            score = 0 if isinstance(e.expr, Rat) else 1
            if best is None or score < best:
                best = score
                pivot_row = r
            if score == 0:
                break
        if pivot_row is None:
            raise AlgebroidMismatch(
                "frame matrix is structurally singular; cannot derive "
                "structure functions symbolically")
        used.add(pivot_row)
        order.append((col, pivot_row))
        piv = rows[pivot_row][col]
        for r in range(m):
            if r == pivot_row:
                continue
            e = rows[r][col]
            if e.is_zero:
                continue
            factor = e / piv
            for c in range(col, n + 1):
                rows[r][c] = rows[r][c] - factor * rows[pivot_row][c]
    # back substitution over the recorded pivots
    sol = [None] * n
    for col, r in reversed(order):
        acc = rows[r][n]
        for c2 in range(col + 1, n):
            if sol[c2] is not None and not rows[r][c2].is_zero:
                acc = acc - rows[r][c2] * sol[c2]
        sol[col] = acc / rows[r][col]
    zero = ScalarField.constant(chart, 0)
    return [s if s is not None else zero for s in sol]


def dirac_algebroid(D: DiracStructureModel, tol=DEFAULT_TOL,
                    samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED,
                    label="") -> LieAlgebroidModel:
    """Lie algebroid carried by a certified Dirac frame.

    Anchor columns are the frame's vector parts; structure functions come
    from expanding each frame Courant bracket in the frame (symbolic
    elimination, exact wherever the chosen pivots do not vanish).
    """
    if not D.certified:
        report = check_dirac(D, tol, samples, seed)
        if not report.ok:
            raise AlgebroidMismatch(
                f"structure fails the Dirac conditions "
                f"(residual {report.residual:.3g})")
    n = D.chart.dim
    columns = [list(s.vector.components) + list(s.form.components)
               for s in D.frame]
    structure = {}
    for i in range(n):
        for j in range(i + 1, n):
            br = courant_bracket(D.frame[i], D.frame[j])
            rhs = list(br.vector.components) + list(br.form.components)
            coeffs = _solve_symbolic(columns, rhs, D.chart)
            if any(not f.is_zero for f in coeffs):
                structure[(i, j)] = tuple(coeffs)
    anchor = tuple(s.vector for s in D.frame)
    A = LieAlgebroidModel(D.chart, n, anchor, structure,
                          label=label or (f"algebroid({D.label})"
                                          if D.label else "dirac_algebroid"))
    return A


# ---------------------------------------------------------------------------
# induced actions of strong Dirac maps


def induced_dirac_action(dm: DiracMapData, tol=DEFAULT_TOL,
                         samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED,
                         horizon=10.0,
                         target_algebroid=None) -> ActionModel:
    """Unique lift of each target frame section through a strong Dirac map.

    For a frame section (V_a, beta_a) of D_M the lift Z_a on N solves

        Z = Dv c,   Df c = F^* beta_a,   dF Z = V_a o F,

    pointwise by least squares; the strong condition makes Z unique.  The
    result is a right action over the target's algebroid with momentum F.
    """
    if not dm.strong_certified:
        raise NotCertifiedStrong(
            "run check_dirac_map(..., mode='strong') first")
    N = dm.source.chart
    Mch = dm.target.chart
    dN, dM = N.dim, Mch.dim
    zero = ScalarField.constant(N, 0)
    one = ScalarField.constant(N, 1)
    A = target_algebroid if target_algebroid is not None \
        else dirac_algebroid(dm.target, tol, samples, seed)

    frameN = dm.source.frame
    Dv = [[s.vector.components[r] for s in frameN] for r in range(dN)]
    Df = [[s.form.components[r] for s in frameN] for r in range(dN)]
    JF = dm.map.jacobian_fields

    fields = []
    for a in range(dM):
        Va, beta_a = dm.target.frame[a].vector, dm.target.frame[a].form
        pulled_beta = pullback(dm.map, beta_a)
        rows = []
        rhs = []
        # Z - Dv c = 0
        for r in range(dN):
            row = [one if c == r else zero for c in range(dN)]
            row += [-Dv[r][k] for k in range(dN)]
            rows.append(tuple(row))
            rhs.append(zero)
        # Df c = F^* beta_a
        for r in range(dN):
            row = [zero] * dN + [Df[r][k] for k in range(dN)]
            rows.append(tuple(row))
            rhs.append(pulled_beta.components[r])
        # dF Z = V_a o F
        for r in range(dM):
            row = [JF[r][c] for c in range(dN)] + [zero] * dN
            rows.append(tuple(row))
            rhs.append(Va.components[r].compose(dm.map))
        fields.append(SolvedField(N, rows, rhs, take=range(dN)))

    return ActionModel(A, N, dm.map, tuple(fields), side=RIGHT,
                       horizon=horizon)
