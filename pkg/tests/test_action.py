"""Actions, modules, unique lifts, leaf actions, Morita witnesses,
tensor distributions."""

import numpy as np
import pytest

from algebroid_lab import ActionModel, Bivector, ChartDomain, \
    LinearCombinationField, MoritaWitness, QuotientChartModel, ScalarField, \
    SmoothMap, TensorQuotientContext, VectorField, check_action, \
    check_module, check_quasi_equivalence, check_strong_morita, \
    cotangent_algebroid, flip_side, leaf_action_check, pointwise_bracket, \
    poisson_map_action, probe_completeness, tangent_algebroid, \
    tensor_distribution, unique_lift_action
from algebroid_lab.action import SolvedField
from algebroid_lab.algebroid import LieAlgebroidModel
from algebroid_lab.errors import AlgebroidMismatch, BasePointMismatch, \
    IntersectionNontrivial, ProjectionIllDefined
from algebroid_lab.report import FAIL, PASS


@pytest.fixture(scope="module")
def R2():
    return ChartDomain("R2", 2, ((-1, 1), (-1, 1)))


# -- check_action -----------------------------------------------------------------

def test_tangent_action_on_identity(R2):
    T = tangent_algebroid(R2)
    act = ActionModel(T, R2, SmoothMap.identity(R2),
                      tuple(VectorField.coordinate_basis(R2, i)
                            for i in range(2)), side="right")
    rep = check_action(act)
    assert rep.ok and rep.residual == 0.0


def test_minus_sharp_lift_is_a_left_action(R2):
    # the minus-sign lift over the identity is the left module structure
    P = Bivector.parse(R2, {(0, 1): "x1"})
    A = cotangent_algebroid(P)
    act = poisson_map_action(P, A, SmoothMap.identity(R2), side="left")
    rep = check_action(act)
    assert rep.ok
    # and it is *not* a right action (sign shows up in compatibility)
    wrong = ActionModel(A, R2, act.momentum, act.fields, side="right")
    assert not check_action(wrong).ok


def test_sign_flip_fails_compatibility(R2):
    P = Bivector.parse(R2, {(0, 1): "1"})
    A = cotangent_algebroid(P)
    act = poisson_map_action(P, A, SmoothMap.identity(R2), side="left")
    flipped = ActionModel(A, R2, act.momentum,
                          (act.fields[0], -act.fields[1]), side="left")
    rep = check_action(flipped)
    assert not rep.ok
    # residual is twice the anchor column magnitude
    assert rep.details["compatibility"] == pytest.approx(2.0)


def test_action_invariant_under_frame_change(R2):
    # re-express the frame through an invertible triangular matrix of
    # fields: pass/fail is unchanged
    P = Bivector.parse(R2, {(0, 1): "x1"})
    A = cotangent_algebroid(P)
    act = poisson_map_action(P, A, SmoothMap.identity(R2), side="left")
    rng = np.random.default_rng(5)
    for trial in range(3):
        g = ScalarField.parse(R2, "x1*x2") * float(rng.integers(1, 4))
        one = ScalarField.constant(R2, 1)
        zero = ScalarField.constant(R2, 0)
        T = ((one, g), (zero, one))     # unit determinant
        newA = _frame_change(A, T)
        new_fields = tuple(
            LinearCombinationField(
                R2,
                tuple(T[k][i] for k in range(2)),
                act.fields)
            for i in range(2))
        new_act = ActionModel(newA, R2, act.momentum, new_fields,
                              side="left")
        assert check_action(new_act, tol=1e-7).ok


def _frame_change(A, T):
    """Algebroid with frame e'_i = sum_k T[k][i] e_k, T unit-triangular."""
    from algebroid_lab import bracket_of_sections
    r = A.rank
    anchor = tuple(
        A.anchor_of_coeffs(tuple(T[k][i] for k in range(r)))
        for i in range(r))
    # invert the unit upper-triangular T symbolically: T = I + N, N^2 = 0
    inv = [[None] * r for _ in range(r)]
    one = ScalarField.constant(A.base, 1)
    inv[0][0] = one
    inv[1][1] = one
    inv[0][1] = -T[0][1]
    inv[1][0] = ScalarField.constant(A.base, 0)
    structure = {}
    for i in range(r):
        for j in range(i + 1, r):
            a = A.section(tuple(T[k][i] for k in range(r)))
            b = A.section(tuple(T[k][j] for k in range(r)))
            br = bracket_of_sections(a, b)   # coefficients in the old frame
            coeffs = tuple(
                sum((inv[m][k] * br.coefficients[k] for k in range(r)),
                    start=ScalarField.constant(A.base, 0))
                for m in range(r))
            structure[(i, j)] = coeffs
    return LieAlgebroidModel(A.base, r, anchor, structure)


# -- modules and completeness --------------------------------------------------------

def test_dual_pair_module_passes(dual_pair):
    rep = check_module(dual_pair["transport_module"])
    assert rep.ok
    assert rep.details["completeness"] == PASS


def test_constant_momentum_fails_submersion(R2):
    T = tangent_algebroid(R2)
    const = SmoothMap(R2, R2, (ScalarField.constant(R2, 0),
                               ScalarField.constant(R2, 0)))
    act = ActionModel(T, R2, const,
                      (VectorField.zero(R2), VectorField.zero(R2)),
                      side="right")
    rep = check_module(act)
    assert rep.status == FAIL
    assert not rep.details["submersion"]


def test_quadratic_field_flagged_incomplete():
    R1 = ChartDomain("R1", 1, ((-1, 1),))
    X = VectorField.parse(R1, ["x1^2"])
    detail = probe_completeness(X, R1, horizon=10.0)
    assert detail["status"] == FAIL
    assert detail["blown"]


def test_constant_field_chart_exit_passes():
    R1 = ChartDomain("R1", 1, ((-1, 1),))
    X = VectorField.parse(R1, ["1"])
    detail = probe_completeness(X, R1, horizon=10.0)
    assert detail["status"] == PASS


def test_linear_field_far_escape_passes():
    # e^10 ~ 2.2e4 crosses the far radius but the growth stays linear
    R1 = ChartDomain("R1", 1, ((-1, 1),))
    X = VectorField.parse(R1, ["x1"])
    detail = probe_completeness(X, R1, horizon=12.0, steps=2000)
    assert detail["status"] == PASS


def test_module_with_blowup_field():
    R1 = ChartDomain("R1", 1, ((-1, 1),))
    A = LieAlgebroidModel(R1, 1, (VectorField.zero(R1),), {})
    const0 = SmoothMap.identity(R1)
    act = ActionModel(A, R1, const0, (VectorField.parse(R1, ["x1^2"]),),
                      side="right", horizon=10.0)
    rep = check_module(act)
    assert rep.status == FAIL
    assert rep.details["completeness"] == FAIL


# -- unique lifts ----------------------------------------------------------------------

def test_unique_lift_identity(R2):
    T = tangent_algebroid(R2)
    act = unique_lift_action(T, SmoothMap.identity(R2))
    assert act.side == "right"
    for i in range(2):
        want = np.zeros(2)
        want[i] = 1.0
        np.testing.assert_allclose(act.fields[i].value((0.2, 0.3)), want,
                                   atol=1e-12)
    assert check_action(act).ok


def test_unique_lift_projection_rejected(R2):
    R4 = ChartDomain("R4", 4, ((-1, 1),) * 4)
    T = tangent_algebroid(R2)
    pr1 = SmoothMap.parse(R4, R2, ["x1", "x2"])
    with pytest.raises(IntersectionNontrivial):
        unique_lift_action(T, pr1)


def test_unique_lift_scaling_diffeo():
    R1a = ChartDomain("R1a", 1, ((-1, 1),))
    R1b = ChartDomain("R1b", 1, ((-2, 2),))
    T = tangent_algebroid(R1b)
    double = SmoothMap.parse(R1a, R1b, ["2*x1"])
    act = unique_lift_action(T, double)
    np.testing.assert_allclose(act.fields[0].value((0.3,)), [0.5],
                               atol=1e-12)
    np.testing.assert_allclose(act.fields[0].jacobian((0.3,)), [[0.0]],
                               atol=1e-10)
    assert check_action(act).ok


def test_solved_field_jacobian_matches_symbolic(R2):
    # dJ(u) = rho o J with J = (x1 + x2^2, x2): u is solvable in closed
    # form, so the implicit jacobian can be checked against divided
    # differences
    T = tangent_algebroid(R2)
    big = ChartDomain("big", 2, ((-3, 3), (-3, 3)))
    J = SmoothMap.parse(big, R2, ["x1 + x2^2", "x2"])
    act = unique_lift_action(T, J, samples=16)
    F = act.fields[0]
    x = np.array([0.2, 0.4])
    h = 1e-6
    for k in range(2):
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        fd = (F.value(xp) - F.value(xm)) / (2 * h)
        np.testing.assert_allclose(F.jacobian(x)[:, k], fd, atol=1e-6)
    assert check_action(act, tol=1e-7).ok


def test_solved_field_uniqueness_guard(R2):
    one = ScalarField.constant(R2, 1)
    zero = ScalarField.constant(R2, 0)
    # 1x2 system u1 + u2 = 1: underdetermined in the exposed directions
    f = SolvedField(R2, ((one, one),), (one,), take=(0, 1))
    from algebroid_lab.errors import UniquenessFailure
    with pytest.raises(UniquenessFailure):
        f.value((0.1, 0.1))


# -- leaf actions ------------------------------------------------------------------------

def leaf_setup(extra_field_texts):
    X = ChartDomain("X3", 3, ((-1, 1),) * 3)
    L = ChartDomain("L2", 2, ((-1, 1),) * 2)
    T = tangent_algebroid(L)
    J = SmoothMap.parse(X, L, ["x1", "x2"])
    pi = SmoothMap.parse(X, L, ["x1", "x2"])
    sigma = SmoothMap.parse(L, X, ["x1", "x2", "0"])
    q = QuotientChartModel(X, L, pi, sigma)
    fields = tuple(VectorField.parse(X, texts) for texts in extra_field_texts)
    act = ActionModel(T, X, J, fields, side="right")
    return act, q


def test_leaf_action_plain_projection():
    act, q = leaf_setup([["1", "0", "0"], ["0", "1", "0"]])
    rep = leaf_action_check(act, q)
    assert rep.ok


def test_leaf_action_vertical_component_ok():
    act, q = leaf_setup([["1", "0", "x3"], ["0", "1", "0"]])
    rep = leaf_action_check(act, q)
    assert rep.ok
    assert rep.details["fiber_constancy"] < 1e-12


def test_leaf_action_fiber_dependence_rejected():
    act, q = leaf_setup([["1", "x3", "0"], ["0", "1", "0"]])
    with pytest.raises(ProjectionIllDefined):
        leaf_action_check(act, q)


# -- quasi-equivalence and strong Morita ----------------------------------------------------

def test_dual_pair_quasi_equivalence(dual_pair):
    rep = check_quasi_equivalence(dual_pair["witness"])
    assert rep.ok
    assert rep.details["rank_failures"] == 0
    assert rep.residual < 1e-12


def test_quasi_equivalence_same_leg_fails(dual_pair):
    # J2 = J1: both actions remain valid, but their spans no longer agree
    # with the opposite kernels
    d = dual_pair
    w = MoritaWitness(d["X"], d["J1"], d["J1"], d["xi1"],
                      flip_side(d["xi1"]))
    rep = check_quasi_equivalence(w)
    assert not rep.ok
    assert rep.details["left_action"] == PASS
    assert rep.details["right_action"] == PASS
    assert rep.details["rank_failures"] > 0


def test_rank_zero_algebroid_fails(R2):
    M = ChartDomain("M1d", 1, ((-1, 1),))
    A0 = LieAlgebroidModel(M, 0, (), {})
    const = SmoothMap(R2, M, (ScalarField.constant(R2, 0),))
    left = ActionModel(A0, R2, const, (), side="left")
    right = ActionModel(A0, R2, const, (), side="right")
    w = MoritaWitness(R2, const, const, left, right)
    rep = check_quasi_equivalence(w)
    assert not rep.ok


def test_dual_pair_strong_morita(dual_pair):
    rep = check_strong_morita(dual_pair["witness"])
    assert rep.ok
    assert rep.details["commutators"] < 1e-12
    assert rep.details["completeness"] == PASS


def test_rank_zero_witness_passes_vacuously():
    # rank-0 algebroids over a shared chart with identity legs: kernels
    # and spans are both trivial, there is nothing to probe or commute
    M = ChartDomain("Mpt", 1, ((-1, 1),))
    A0 = LieAlgebroidModel(M, 0, (), {}, label="zero")
    ident = SmoothMap.identity(M)
    left = ActionModel(A0, M, ident, (), side="left")
    right = ActionModel(A0, M, ident, (), side="right")
    w = MoritaWitness(M, ident, ident, left, right)
    assert check_quasi_equivalence(w).ok
    assert check_strong_morita(w).ok


def test_perturbed_witness_fails_commutation(dual_pair):
    d = dual_pair
    # add x1 d1 to the first right-action field: stays J2-compatible and
    # bracket-compatible, but no longer commutes with the left action
    perturb = VectorField.parse(d["X"], ["x1", "0", "0", "0"])
    fields = (d["xi2"].fields[0] + perturb, d["xi2"].fields[1])
    xi2p = ActionModel(d["A2"], d["X"], d["J2"], fields, side="right")
    assert check_action(xi2p).ok
    w = MoritaWitness(d["X"], d["J1"], d["J2"], d["xi1"], xi2p)
    rep = check_strong_morita(w)
    assert not rep.ok
    assert rep.details["commutators"] > 0.1
    # the commutator oracle: [xi1(e2), perturbed] = [-d1, x1 d1] = -d1
    x = np.array([0.3, 0.1, -0.2, 0.5])
    br = pointwise_bracket(d["xi1"].fields[1], fields[0], x)
    np.testing.assert_allclose(br, [-1, 0, 0, 0], atol=1e-12)


# -- tensor distribution ----------------------------------------------------------------------

def test_tensor_distribution_dual_pair(dual_pair):
    d = dual_pair
    right = d["xi2"]                   # right A2-module on J2
    left = flip_side(d["xi2"])         # left A2-module on the second copy
    x = np.array([0.1, 0.2, 0.3, 0.4])
    y = np.array([-0.5, 0.7, 0.3, 0.4])   # same J2-image
    basis, rep = tensor_distribution(right, left, x, y)
    assert rep.details["dimension"] == 2
    assert rep.ok
    with pytest.raises(BasePointMismatch):
        tensor_distribution(right, left, x, np.array([0, 0, 0.9, 0.4]))


def test_tensor_distribution_trivial_algebroid(R2):
    M = ChartDomain("M1d", 1, ((-1, 1),))
    A0 = LieAlgebroidModel(M, 0, (), {})
    to_pt = SmoothMap(R2, M, (ScalarField.constant(R2, 0),))
    right = ActionModel(A0, R2, to_pt, (), side="right")
    left = ActionModel(A0, R2, to_pt, (), side="left")
    basis, rep = tensor_distribution(right, left,
                                     np.zeros(2), np.ones(2) * 0.3)
    assert rep.details["dimension"] == 0
    assert rep.ok


def test_tensor_distribution_quotient_kernels(dual_pair):
    # parametrize the self fiber product over J2 as
    # P = (x1, x2, s1, s2, y1, y2): X-point (x1, x2, s1, s2),
    # Y-point (y1, y2, s1, s2)
    d = dual_pair
    P = ChartDomain("P", 6, ((-2, 2),) * 6)
    L = ChartDomain("L", 4, ((-2, 2),) * 4)
    pi = SmoothMap.parse(P, L, ["x1", "x2", "x5", "x6"])
    sigma = SmoothMap.parse(L, P, ["x1", "x2", "0", "0", "x3", "x4"])
    q = QuotientChartModel(P, L, pi, sigma)
    M1 = d["M1"]
    J1_hat = SmoothMap.parse(P, M1, ["x1", "x2"])
    K3_hat = SmoothMap.parse(P, M1, ["x5", "x6"])
    # outer left A1-action on the X block, outer right A1-action on Y
    xi1_hat = (VectorField.parse(P, ["0", "1", "0", "0", "0", "0"]),
               VectorField.parse(P, ["-1", "0", "0", "0", "0", "0"]))
    eta3_hat = (VectorField.parse(P, ["0", "0", "0", "0", "0", "-1"]),
                VectorField.parse(P, ["0", "0", "0", "0", "1", "0"]))
    ctx = TensorQuotientContext(q, J1_hat, xi1_hat, K3_hat, eta3_hat)
    right = d["xi2"]
    left = flip_side(d["xi2"])
    x = np.array([0.1, 0.2, 0.3, 0.4])
    y = np.array([-0.5, 0.7, 0.3, 0.4])
    basis, rep = tensor_distribution(right, left, x, y, quotient_ctx=ctx)
    assert rep.ok
    assert rep.details["kernel_equality_failures"] == 0


def test_tensor_distribution_shared_algebroid_guard(dual_pair):
    d = dual_pair
    with pytest.raises(AlgebroidMismatch):
        tensor_distribution(d["xi2"], flip_side(d["xi1"]),
                            np.zeros(4), np.zeros(4))
