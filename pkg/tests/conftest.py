import numpy as np
import pytest

from algebroid_lab import Bivector, ChartDomain, MoritaWitness, ScalarField, \
    SmoothMap, cotangent_algebroid, flip_side, poisson_map_action

ACCEPTANCE_LINES = []


def record_acceptance(number, name, passed, note=""):
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(
        f"ACCEPTANCE {number} {name}: {status}" + (f"  ({note})" if note else ""))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# -- shared geometry ---------------------------------------------------------

@pytest.fixture(scope="session")
def r2():
    return ChartDomain("R2", 2, ((-1, 1), (-1, 1)))


@pytest.fixture(scope="session")
def r3():
    return ChartDomain("R3", 3, ((-1, 1),) * 3)


@pytest.fixture(scope="session")
def dual_pair():
    """The canonical dual-pair witness on R^4 with coordinates
    (x1, y1, x2, y2) = (x1, x2, x3, x4)."""
    X = ChartDomain("X", 4, ((-2, 2),) * 4)
    M1 = ChartDomain("M1", 2, ((-2, 2),) * 2)
    M2 = ChartDomain("M2", 2, ((-2, 2),) * 2)
    PiS = Bivector(X, {(0, 1): ScalarField.constant(X, 1),
                       (2, 3): ScalarField.constant(X, -1)})
    Pi1 = Bivector(M1, {(0, 1): ScalarField.constant(M1, 1)})
    Pi2 = Bivector(M2, {(0, 1): ScalarField.constant(M2, 1)})
    A1 = cotangent_algebroid(Pi1, label="A1")
    A2 = cotangent_algebroid(Pi2, label="A2")
    J1 = SmoothMap.parse(X, M1, ["x1", "x2"])
    J2 = SmoothMap.parse(X, M2, ["x3", "x4"])
    xi1 = poisson_map_action(PiS, A1, J1, side="left")
    xi2 = poisson_map_action(PiS, A2, J2, side="right")
    witness = MoritaWitness(X, J1, J2, xi1, xi2, horizon=10.0)
    return {
        "X": X, "M1": M1, "M2": M2, "PiS": PiS, "Pi1": Pi1, "Pi2": Pi2,
        "A1": A1, "A2": A2, "J1": J1, "J2": J2, "xi1": xi1, "xi2": xi2,
        "witness": witness,
        "transport_module": flip_side(xi1),   # right module on J1
    }


def rng(seed=0):
    return np.random.default_rng(seed)
