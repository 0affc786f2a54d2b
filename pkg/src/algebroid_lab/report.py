"""Check reports shared by every verification operation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"
ERROR = "error"


@dataclass
class CheckReport:
    check_id: str
    kind: str
    status: str
    residual: float
    tolerance: float
    worst_point: tuple | None = None
    ms: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == PASS

    def with_id(self, check_id: str) -> "CheckReport":
        self.check_id = check_id
        return self


class ResidualTracker:
    """Keeps the running max residual and the point achieving it."""

    def __init__(self):
        self.max = 0.0
        self.worst_point = None

    def update(self, residual, point=None):
        r = float(residual)
        if r >= self.max:
            self.max = r
            if point is not None:
                if hasattr(point, "__len__"):
                    self.worst_point = tuple(float(v) for v in np.ravel(point))
                else:
                    self.worst_point = (float(point),)
        return r

    def report(self, kind, tolerance, details=None, elapsed=None,
               status=None) -> CheckReport:
        if status is None:
            status = PASS if self.max < tolerance else FAIL
        return CheckReport(
            check_id=kind,
            kind=kind,
            status=status,
            residual=self.max,
            tolerance=tolerance,
            worst_point=self.worst_point,
            ms=0.0 if elapsed is None else elapsed * 1e3,
            details=details or {},
        )


class Stopwatch:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False
