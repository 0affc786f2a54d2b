"""Path admissibility, transport ODE, invariances, module transport.

Closed-form flows are the oracles: a constant field translates, the
linear field x d/dx exponentiates.
"""

import io
import math

import numpy as np
import pytest

from algebroid_lab import APath, ActionModel, Bivector, ChartDomain, \
    IntegratorConfig, ScalarField, SmoothMap, VectorField, \
    check_transport_invariances, cotangent_algebroid, integrate_apath, \
    interval_chart, psi_transport, transport_along, validate_apath
from algebroid_lab.algebroid import LieAlgebroidModel
from algebroid_lab.errors import InitialFiberMismatch, NoConnectingPath, \
    StepCollapse

T_NAMES = {"t": 0}
I = interval_chart()


def time_field(text):
    return ScalarField.parse(I, text, T_NAMES)


def make_path(A, coeff_texts, base_texts):
    return APath(A, tuple(time_field(s) for s in coeff_texts),
                 SmoothMap.parse(I, A.base, base_texts, T_NAMES))


@pytest.fixture(scope="module")
def straight_path(dual_pair):
    return make_path(dual_pair["A1"], ["1", "0"], ["0", "-t"])


# -- validation ---------------------------------------------------------------

def test_validate_dual_pair_path(straight_path):
    rep = validate_apath(straight_path)
    assert rep.ok and rep.residual == 0.0


def test_validate_zero_path(dual_pair):
    p = make_path(dual_pair["A1"], ["0", "0"], ["0.25", "0.5"])
    assert validate_apath(p).ok


def test_validate_constant_base_mismatch(dual_pair):
    p = make_path(dual_pair["A1"], ["1", "0"], ["0", "0.5"])
    rep = validate_apath(p)
    assert not rep.ok
    assert rep.residual == pytest.approx(1.0)  # |rho(dx1)| = |-d2|


def test_integrator_config_guard():
    with pytest.raises(ValueError):
        IntegratorConfig(step=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")


# -- transport ------------------------------------------------------------------

def test_transport_endpoint(dual_pair, straight_path):
    traj = integrate_apath(straight_path, dual_pair["transport_module"],
                           np.zeros(4), IntegratorConfig(step=1e-3))
    np.testing.assert_allclose(traj.endpoint, [0, -1, 0, 0], atol=1e-6)
    assert traj.base_tracking_residual < 1e-6
    assert traj.error_estimate < 1e-10


def test_transport_zero_path(dual_pair):
    p = make_path(dual_pair["A1"], ["0", "0"], ["0.1", "0.2"])
    x0 = np.array([0.1, 0.2, 0.7, -0.3])
    traj = integrate_apath(p, dual_pair["transport_module"], x0,
                           IntegratorConfig(step=1e-2))
    np.testing.assert_allclose(traj.endpoint, x0, atol=1e-12)


def test_transport_initial_fiber_guard(dual_pair, straight_path):
    with pytest.raises(InitialFiberMismatch):
        integrate_apath(straight_path, dual_pair["transport_module"],
                        np.array([0.5, 0.0, 0.0, 0.0]),
                        IntegratorConfig(step=1e-2))


def exponential_setup():
    M = ChartDomain("M", 2, ((-4, 4), (-4, 4)))
    P = Bivector.parse(M, {(0, 1): "x1"})
    A = cotangent_algebroid(P)
    act = ActionModel(A, M, SmoothMap.identity(M), tuple(A.anchor),
                      side="right")
    path = make_path(A, ["0", "1"], ["exp(t)", "0"])
    return act, path


def test_exponential_flow_endpoint():
    act, path = exponential_setup()
    assert validate_apath(path).ok
    traj = integrate_apath(path, act, np.array([1.0, 0.0]),
                           IntegratorConfig(step=1e-3))
    assert abs(traj.endpoint[0] - math.e) < 1e-8
    assert abs(traj.endpoint[1]) < 1e-12


def test_rk4_convergence_order():
    act, path = exponential_setup()
    errs = []
    for h in (0.02, 0.01, 0.005):
        traj = integrate_apath(path, act, np.array([1.0, 0.0]),
                               IntegratorConfig(step=h))
        errs.append(abs(traj.endpoint[0] - math.e))
    r1 = errs[0] / errs[1]
    r2 = errs[1] / errs[2]
    assert 8 <= r1 <= 32
    assert 8 <= r2 <= 32


def test_base_tracking_bound():
    act, path = exponential_setup()
    cfg = IntegratorConfig(step=1e-3, max_error=1e-6)
    traj = integrate_apath(path, act, np.array([1.0, 0.0]), cfg)
    assert traj.base_tracking_residual <= 10 * cfg.max_error


def test_step_collapse():
    # u' = 10 u^2 from 0.5 blows up at t = 0.2, inside the unit interval
    R1 = ChartDomain("R1", 1, ((-1, 1),))
    A = LieAlgebroidModel(R1, 1, (VectorField.zero(R1),), {})
    act = ActionModel(A, R1, SmoothMap.identity(R1),
                      (VectorField.parse(R1, ["10*x1^2"]),), side="right")
    p = make_path(A, ["1"], ["0.5"])
    assert validate_apath(p).ok   # zero anchor, constant base
    with pytest.raises(StepCollapse):
        integrate_apath(p, act, np.array([0.5]),
                        IntegratorConfig(step=1e-3))


def test_trajectory_dump(dual_pair, straight_path):
    traj = integrate_apath(straight_path, dual_pair["transport_module"],
                           np.zeros(4), IntegratorConfig(step=0.25))
    buf = io.StringIO()
    traj.dump(buf, stride=2)
    lines = buf.getvalue().strip().splitlines()
    first = [float(v) for v in lines[0].split(",")]
    last = [float(v) for v in lines[-1].split(",")]
    assert first == [0, 0, 0, 0, 0]
    assert last[0] == 1.0
    assert abs(last[2] + 1.0) < 1e-9


# -- invariances -------------------------------------------------------------------

def test_reparametrization_endpoint(dual_pair, straight_path):
    repar = straight_path.reparametrized_square()
    assert validate_apath(repar).ok
    traj = integrate_apath(repar, dual_pair["transport_module"],
                           np.zeros(4), IntegratorConfig(step=1e-3))
    np.testing.assert_allclose(traj.endpoint, [0, -1, 0, 0], atol=1e-6)


def test_transport_invariances_dual_pair(dual_pair, straight_path):
    rep = check_transport_invariances(
        straight_path, dual_pair["transport_module"], np.zeros(4),
        IntegratorConfig(step=1e-3), witness=dual_pair["witness"])
    assert rep.ok
    assert rep.details["fiber_constancy"] < 1e-6
    assert rep.details["reparametrization"] < 1e-6
    assert rep.details["flow_commutation"] < 1e-8


@pytest.mark.parametrize("seed", [1, 2, 3, 4])
def test_fiber_constancy_random_constant_witnesses(seed):
    # randomized constant-coefficient pair: scaled symplectic blocks with
    # the matching scaled bases; the kernel-span equalities force the
    # complementary leg to stay constant along any transport
    from algebroid_lab import Bivector, MoritaWitness, check_action, \
        check_quasi_equivalence, flip_side, poisson_map_action
    rng = np.random.default_rng(seed)
    a = float(rng.integers(1, 5))
    b = float(rng.integers(1, 5))
    X = ChartDomain("Xr", 4, ((-2, 2),) * 4)
    M1 = ChartDomain("M1r", 2, ((-2, 2),) * 2)
    M2 = ChartDomain("M2r", 2, ((-2, 2),) * 2)
    PiS = Bivector(X, {(0, 1): ScalarField.constant(X, a),
                       (2, 3): ScalarField.constant(X, -b)})
    A1 = cotangent_algebroid(Bivector(M1, {(0, 1): ScalarField.constant(M1, a)}))
    A2 = cotangent_algebroid(Bivector(M2, {(0, 1): ScalarField.constant(M2, b)}))
    J1 = SmoothMap.parse(X, M1, ["x1", "x2"])
    J2 = SmoothMap.parse(X, M2, ["x3", "x4"])
    xi1 = poisson_map_action(PiS, A1, J1, side="left")
    xi2 = poisson_map_action(PiS, A2, J2, side="right")
    assert check_action(xi1).ok and check_action(xi2).ok
    w = MoritaWitness(X, J1, J2, xi1, xi2)
    assert check_quasi_equivalence(w).ok
    mod = flip_side(xi1)
    path = make_path(A1, ["1", "0"], ["0", f"-{a}*t"])
    assert validate_apath(path).ok
    traj = integrate_apath(path, mod, np.zeros(4),
                           IntegratorConfig(step=1e-2))
    drift = max(float(np.max(np.abs(J2.eval(u) - J2.eval(np.zeros(4)))))
                for u in traj.states)
    assert drift < 1e-12


def test_concatenation_order_invariant_commuting(dual_pair):
    # two constant-coefficient paths whose transports commute
    A1 = dual_pair["A1"]
    mod = dual_pair["transport_module"]
    p1 = make_path(A1, ["1", "0"], ["0", "-t"])
    p2 = make_path(A1, ["0", "1"], ["t", "-1"])
    # p2 continues from p1's base endpoint; swapped order uses translates
    q2 = make_path(A1, ["0", "1"], ["t", "0"])
    q1 = make_path(A1, ["1", "0"], ["1", "-t"])
    cfg = IntegratorConfig(step=1e-2)
    end_a = transport_along([p1, p2], mod, np.zeros(4), cfg)
    end_b = transport_along([q2, q1], mod, np.zeros(4), cfg)
    np.testing.assert_allclose(end_a, end_b, atol=1e-9)
    np.testing.assert_allclose(end_a, [1, -1, 0, 0], atol=1e-9)


# -- module transport -----------------------------------------------------------------

def canonical_module(dual_pair):
    # N = R^2 with the identity momentum and fields sharp(du_a)
    d = dual_pair
    M1 = d["M1"]
    A1 = d["A1"]
    return ActionModel(A1, M1, SmoothMap.identity(M1), tuple(A1.anchor),
                       side="right")


def test_psi_transport_straight_path(dual_pair, straight_path):
    d = dual_pair
    module = canonical_module(d)
    x_prime = np.zeros(4)
    x_end = np.array([0.0, -1.0, 0.0, 0.0])
    endpoint, rep = psi_transport(
        d["witness"], module, straight_path, (x_prime, x_end),
        np.zeros(2), IntegratorConfig(step=1e-3))
    np.testing.assert_allclose(endpoint, [0, -1], atol=1e-6)
    assert rep.ok
    assert rep.details["pair_realization_gap"] < 1e-6


def test_psi_transport_zero_path(dual_pair):
    d = dual_pair
    module = canonical_module(d)
    p = make_path(d["A1"], ["0", "0"], ["0.25", "-0.5"])
    x0 = np.array([0.25, -0.5, 0.3, 0.4])
    n0 = np.array([0.25, -0.5])
    endpoint, rep = psi_transport(d["witness"], module, p, (x0, x0), n0,
                                  IntegratorConfig(step=1e-2))
    np.testing.assert_allclose(endpoint, n0, atol=1e-12)
    assert rep.ok


def test_psi_transport_wrong_pair(dual_pair, straight_path):
    d = dual_pair
    module = canonical_module(d)
    with pytest.raises(NoConnectingPath):
        psi_transport(d["witness"], module, straight_path,
                      (np.zeros(4), np.array([0.0, 0.5, 0.0, 0.0])),
                      np.zeros(2), IntegratorConfig(step=1e-2))


def test_psi_transport_morphism_square(dual_pair, straight_path):
    # f = translation by (1, 0) from the canonical module to its shifted
    # twin: both transports are translations, so the square is exact
    d = dual_pair
    M1 = d["M1"]
    A1 = d["A1"]
    module = canonical_module(d)
    shifted_momentum = SmoothMap.parse(M1, M1, ["x1 - 1", "x2"])
    twin = ActionModel(A1, M1, shifted_momentum, tuple(A1.anchor),
                       side="right")
    f = SmoothMap.parse(M1, M1, ["x1 + 1", "x2"])
    endpoint, rep = psi_transport(
        d["witness"], module, straight_path,
        (np.zeros(4), np.array([0.0, -1.0, 0.0, 0.0])), np.zeros(2),
        IntegratorConfig(step=1e-3), morphism=f, morphism_module=twin)
    assert rep.details["morphism_square"] < 1e-9
    assert rep.ok
