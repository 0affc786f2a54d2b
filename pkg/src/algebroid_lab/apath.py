"""Algebroid paths and the transport ODE.

An algebroid path is a coefficient curve a(t) in the frame together with a
base curve c(t); it is admissible when the anchor image of a(t) matches
the base velocity at sampled times.  Transport integrates

    du/dt = sum_i a_i(t) X_i(u),   u(0) = x0,

through an action with fixed-step RK4 (step-halving error estimate,
deterministic).  The momentum image mu(u(t)) of a certified run retraces
the base curve; that residual is recorded on every trajectory.

Homotopy-functional machinery is intentionally absent: reparametrization
invariance (checked against the t^2 time change) is the tested shadow of
it.  Concatenation is integrator-level: segments run one after another,
so coefficient jumps at junctions are allowed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _expr as ex
from .action import ActionModel, MoritaWitness, flip_side
from .algebroid import DEFAULT_SAMPLES, DEFAULT_TOL, LieAlgebroidModel
from .calculus import ChartDomain, ScalarField, SmoothMap, VectorField, \
    interval_chart
from .errors import AlgebroidMismatch, EvaluationPole, \
    InitialFiberMismatch, NoConnectingPath, StepCollapse
from .kernel import eval_fused
from .report import CheckReport, ResidualTracker, Stopwatch

BLOWUP_NORM = 1e9


@dataclass(frozen=True)
class IntegratorConfig:
    step: float = 1e-3
    method: str = "rk4"          # fixed; halved-step Richardson estimate
    max_error: float = 1e-6

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.method != "rk4":
            raise ValueError("only the fixed-step rk4 method exists")

    @property
    def steps(self) -> int:
        return max(1, round(1.0 / self.step))


@dataclass(frozen=True)
class APath:
    """Coefficient curves over the unit interval plus a base curve."""

    algebroid: LieAlgebroidModel
    coefficients: tuple          # rank ScalarFields on a 1-d time chart
    base: SmoothMap              # [0,1] -> base chart

    def __post_init__(self):
        if len(self.coefficients) != self.algebroid.rank:
            raise AlgebroidMismatch("one coefficient curve per frame section")
        tchart = self.base.source
        if tchart.dim != 1:
            raise AlgebroidMismatch("base curve must have a 1-d source")
        for f in self.coefficients:
            if f.chart != tchart:
                raise AlgebroidMismatch("coefficients on a different time chart")
        if self.base.target != self.algebroid.base:
            raise AlgebroidMismatch("base curve must land on the base chart")

    @property
    def time_chart(self) -> ChartDomain:
        return self.base.source

    def coefficients_at(self, t) -> np.ndarray:
        return np.array([f.eval((t,)) for f in self.coefficients])

    def reparametrized_square(self) -> "APath":
        """The time change tau(t) = t^2: coefficients a(t^2) * 2t, base
        c(t^2).  Shares the endpoint with the original path."""
        tchart = self.time_chart
        t = ScalarField.coordinate(tchart, 0)
        sq = SmoothMap(tchart, tchart, (t * t,))
        two_t = 2 * t
        coeffs = tuple(f.compose(sq) * two_t for f in self.coefficients)
        return APath(self.algebroid, coeffs, self.base.compose(sq))


def validate_apath(a: APath, tol=DEFAULT_TOL, time_samples=DEFAULT_SAMPLES
                   ) -> CheckReport:
    """Residual of anchor(a(t)) = dc/dt over an even time grid."""
    with Stopwatch() as sw:
        A = a.algebroid
        ts = np.linspace(0.0, 1.0, time_samples)
        speed = [c.partial(0) for c in a.base.components]
        tracker = ResidualTracker()
        for t in ts:
            ct = a.base.eval((t,))
            coeffs = a.coefficients_at(t)
            vel = np.array([f.eval((t,)) for f in speed])
            anchored = A.anchor_matrix_at(ct) @ coeffs
            tracker.update(float(np.max(np.abs(anchored - vel),
                                        initial=0.0)), (t,))
    return tracker.report("apath_valid", tol, elapsed=sw.elapsed)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray           # (len(times), dim)
    base_tracking_residual: float
    error_estimate: float
    config: IntegratorConfig

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]

    def dump(self, target, stride=1):
        """Write rows ``t, u_1..u_dim`` every `stride` steps."""
        close = False
        if isinstance(target, (str, bytes)):
            target = open(target, "w")
            close = True
        try:
            for k in range(0, len(self.times), stride):
                row = ", ".join([f"{self.times[k]:.12g}"]
                                + [f"{v:.12g}" for v in self.states[k]])
                target.write(row + "\n")
            if (len(self.times) - 1) % stride:
                row = ", ".join([f"{self.times[-1]:.12g}"]
                                + [f"{v:.12g}" for v in self.states[-1]])
                target.write(row + "\n")
        finally:
            if close:
                target.close()


def _rhs(a: APath, act: ActionModel):
    """Time-dependent right-hand side sum_i a_i(t) X_i(u).

    Expression actions fuse into a single program over (t, u1..udim), so
    each RK4 stage is one kernel call; actions with pointwise-solved
    fields fall back to per-field evaluation.
    """
    fields = act.fields
    coeffs = a.coefficients
    dim = act.total.dim

    if all(isinstance(F, VectorField) for F in fields):
        shift = {i: ex.var(i + 1) for i in range(dim)}
        comps = []
        for k in range(dim):
            acc = ex.ZERO
            for ci, Fi in zip(coeffs, fields):
                acc = ex.add(acc, ex.mul(
                    ci.expr, ex.substitute(Fi.components[k].expr, shift)))
            comps.append(acc)
        program = ex.compile_fused(comps, dim + 1)
        buf = np.empty(dim + 1)

        def f(t, u):
            buf[0] = t
            buf[1:] = u
            try:
                return eval_fused(program, buf)
            except ZeroDivisionError as zde:
                raise EvaluationPole(
                    f"pole on the trajectory near t = {t:.4g}") from zde

        return f

    def f(t, u):
        out = np.zeros(dim)
        for ci, Fi in zip(coeffs, fields):
            w = ci.eval((t,))
            if w != 0.0:
                out += w * Fi.value(u)
        return out

    return f


def _integrate(f, x0, steps, guard) -> tuple[np.ndarray, np.ndarray]:
    dim = len(x0)
    times = np.linspace(0.0, 1.0, steps + 1)
    states = np.empty((steps + 1, dim))
    states[0] = x0
    h = 1.0 / steps
    u = np.asarray(x0, dtype=float).copy()
    for k in range(steps):
        t = times[k]
        k1 = f(t, u)
        k2 = f(t + 0.5 * h, u + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, u + 0.5 * h * k2)
        k4 = f(t + h, u + h * k3)
        u = u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(u)) or np.linalg.norm(u) > guard:
            raise StepCollapse(
                f"trajectory blew up near t = {times[k + 1]:.4g}")
        states[k + 1] = u
    return times, states


def integrate_apath(a: APath, act: ActionModel, x0,
                    cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Fixed-step RK4 transport of x0 along the path through the action.

    Precondition (not re-verified here): the path passed validate_apath.
    The initial point must sit on the right momentum fiber.  The returned
    trajectory carries a halved-step error estimate and the base-tracking
    residual max_t |mu(u(t)) - c(t)|.
    """
    if act.algebroid is not a.algebroid:
        raise AlgebroidMismatch("action is over a different algebroid")
    x0 = np.asarray(x0, dtype=float)
    fiber_gap = np.max(np.abs(act.momentum.eval(x0) - a.base.eval((0.0,))))
    if fiber_gap > max(cfg.max_error, 1e-9):
        raise InitialFiberMismatch(
            f"mu(x0) misses the base start by {fiber_gap:.3g}")
    f = _rhs(a, act)
    guard = BLOWUP_NORM * max(1.0, act.total.scale())
    times, states = _integrate(f, x0, cfg.steps, guard)
    _, states_half = _integrate(f, x0, 2 * cfg.steps, guard)
    err = float(np.linalg.norm(states[-1] - states_half[-1]) / 15.0)
    # mu o u must retrace the base curve
    track = 0.0
    mu = act.momentum
    for t, u in zip(times, states):
        track = max(track, float(np.max(np.abs(mu.eval(u)
                                               - a.base.eval((t,))))))
    return Trajectory(times, states, track, err, cfg)


def transport_along(paths, act: ActionModel, x0,
                    cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Concatenated transport: run each path segment in order (C0 junction,
    integrator restart at each junction)."""
    u = np.asarray(x0, dtype=float)
    for p in paths:
        u = integrate_apath(p, act, u, cfg).endpoint
    return u


def _flow(field, x0, t, cfg: IntegratorConfig, guard) -> np.ndarray:
    """Flow of an autonomous field for time t (RK4, |t| rescaled in).

    Runs at a floor step of 1/128: the commutation grid re-integrates many
    short flows, and fourth-order accuracy at that step already sits far
    below the tolerances used for commutation residuals.
    """
    if t == 0.0:
        return np.asarray(x0, dtype=float)
    steps = max(1, round(abs(t) / max(cfg.step, 1.0 / 128)))
    h = t / steps
    u = np.asarray(x0, dtype=float).copy()
    for _ in range(steps):
        k1 = field.value(u)
        k2 = field.value(u + 0.5 * h * k1)
        k3 = field.value(u + 0.5 * h * k2)
        k4 = field.value(u + h * k3)
        u = u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(u)) or np.linalg.norm(u) > guard:
            raise StepCollapse("flow blew up")
    return u


def check_transport_invariances(a: APath, act: ActionModel, x0,
                                cfg: IntegratorConfig = IntegratorConfig(),
                                witness: MoritaWitness | None = None,
                                grid=5) -> CheckReport:
    """Fiber constancy, t^2 reparametrization, and flow commutation.

    Fiber constancy tracks the witness leg complementary to the action's
    momentum map along the trajectory; flow commutation composes the
    witness frame flows over a (t, s) grid.  Both need `witness`; the
    reparametrization check always runs.
    """
    with Stopwatch() as sw:
        details = {}
        tracker = ResidualTracker()
        traj = integrate_apath(a, act, x0, cfg)

        other = None
        if witness is not None:
            if act.total != witness.X:
                raise AlgebroidMismatch("action does not live on the witness")
            mu = act.momentum
            if mu == witness.J1:
                other = witness.J2
            elif mu == witness.J2:
                other = witness.J1
            else:
                raise AlgebroidMismatch(
                    "action momentum is neither witness leg")
            ref = other.eval(x0)
            drift = max(float(np.max(np.abs(other.eval(u) - ref)))
                        for u in traj.states)
            details["fiber_constancy"] = drift
            tracker.update(drift)

        repar = a.reparametrized_square()
        traj2 = integrate_apath(repar, act, x0, cfg)
        rep_res = float(np.max(np.abs(traj.endpoint - traj2.endpoint)))
        details["reparametrization"] = rep_res
        tracker.update(rep_res)

        if witness is not None:
            guard = BLOWUP_NORM * max(1.0, witness.X.scale())
            grid_ts = np.linspace(0.0, 1.0, grid)
            comm = 0.0
            for F in witness.left.fields:
                for G in witness.right.fields:
                    for t in grid_ts:
                        for s in grid_ts:
                            p1 = _flow(F, _flow(G, x0, s, cfg, guard),
                                       t, cfg, guard)
                            p2 = _flow(G, _flow(F, x0, t, cfg, guard),
                                       s, cfg, guard)
                            comm = max(comm, float(np.max(np.abs(p1 - p2))))
            details["flow_commutation"] = comm
            tracker.update(comm)

        details["base_tracking"] = traj.base_tracking_residual
        details["error_estimate"] = traj.error_estimate
    return tracker.report("transport_invariances", cfg.max_error,
                          elapsed=sw.elapsed, details=details)


def psi_transport(witness: MoritaWitness, module: ActionModel, path: APath,
                  x_pair, n0, cfg: IntegratorConfig = IntegratorConfig(),
                  morphism: SmoothMap | None = None,
                  morphism_module: ActionModel | None = None,
                  tol=None):
    """Transport a module point along the path realizing a witness pair.

    `x_pair` = (x_prime, x) must be connected by the declared path: its
    base curve runs from J1(x_prime) to J1(x), and transporting x_prime
    through the witness's right-side structure on J1 (the flipped left
    action) must land on x.  The module point n0 starts over J1(x_prime)
    and is transported by the same coefficients through the module.

    When a module morphism f is supplied (with its target module), the
    compatibility square f(transport(n)) = transport(f(n)) is verified and
    reported.

    Returns (endpoint, report).
    """
    if tol is None:
        tol = max(cfg.max_error, 1e-9)
    A1 = witness.left.algebroid
    if module.algebroid is not A1 or path.algebroid is not A1:
        raise AlgebroidMismatch("module and path must be over the same "
                                "algebroid as the witness's left leg")
    x_prime, x_end = (np.asarray(p, dtype=float) for p in x_pair)
    with Stopwatch() as sw:
        v = validate_apath(path, tol=max(tol, DEFAULT_TOL))
        if not v.ok:
            raise NoConnectingPath(
                f"declared path is not admissible "
                f"(residual {v.residual:.3g})")
        j1_start = witness.J1.eval(x_prime)
        j1_end = witness.J1.eval(x_end)
        c0 = path.base.eval((0.0,))
        c1 = path.base.eval((1.0,))
        if np.max(np.abs(c0 - j1_start)) > tol \
                or np.max(np.abs(c1 - j1_end)) > tol:
            raise NoConnectingPath(
                "path base curve does not join J1(x') to J1(x)")
        mu_gap = np.max(np.abs(module.momentum.eval(n0) - j1_start))
        if mu_gap > tol:
            raise InitialFiberMismatch(
                f"mu(n0) misses J1(x') by {mu_gap:.3g}")

        # realize the pair: the path must carry x' to x on the witness
        carrier = flip_side(witness.left)
        realized = integrate_apath(path, carrier, x_prime, cfg)
        pair_gap = float(np.max(np.abs(realized.endpoint - x_end)))
        if pair_gap > max(10 * cfg.max_error, tol):
            raise NoConnectingPath(
                f"path carries x' to {tuple(realized.endpoint)}, not to "
                f"the declared x (gap {pair_gap:.3g})")

        traj = integrate_apath(path, module, n0, cfg)
        endpoint = traj.endpoint
        details = {
            "pair_realization_gap": pair_gap,
            "base_tracking": traj.base_tracking_residual,
            "error_estimate": traj.error_estimate,
        }
        tracker = ResidualTracker()
        tracker.update(traj.base_tracking_residual)

        if morphism is not None:
            if morphism_module is None:
                raise ValueError("morphism needs its target module")
            fn0 = morphism.eval(n0)
            other = integrate_apath(path, morphism_module, fn0, cfg)
            square = float(np.max(np.abs(morphism.eval(endpoint)
                                         - other.endpoint)))
            details["morphism_square"] = square
            tracker.update(square)

    report = tracker.report("psi_transport", max(10 * cfg.max_error, tol),
                            elapsed=sw.elapsed, details=details)
    return endpoint, report


def unit_time_chart() -> ChartDomain:
    return interval_chart()
