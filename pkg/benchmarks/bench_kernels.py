"""Benchmark: compiled evaluation kernel against the pure-Python fallback.

Times the two kernels on the workloads that dominate real runs: single
point evaluation (the ODE hot loop) and 64-point sample batches (axiom
checks), plus one end-to-end transport integration.  Run:

    python benchmarks/bench_kernels.py

The backend choice is per-process, so the end-to-end comparison relaunches
itself with ALGEBROID_LAB_PURE=1 to time the fallback honestly.
"""

import os
import subprocess
import sys
import timeit

import numpy as np

from algebroid_lab import _kernel_py
from algebroid_lab.calculus import ChartDomain, ScalarField
from algebroid_lab.kernel import backend_name

try:
    from algebroid_lab import _kernel_c
except ImportError:
    _kernel_c = None

EXPRESSIONS = [
    ("constant field", "1"),
    ("linear", "x1 - 2*x2"),
    ("polynomial deg 3", "x1^2*x2 - x3*x4^2 + x1*x2*x3"),
    ("with transcendentals", "x1^2*exp(x2) - sin(x3)*x4 + cos(x1*x2)"),
]


def bench_kernels():
    chart = ChartDomain("M", 4, ((-2, 2),) * 4)
    x = np.array([0.3, -0.2, 0.9, 1.1])
    pts = chart.sample(64, seed=0)
    print(f"{'expression':<24} {'one/base':>10} {'one/c':>10} "
          f"{'speedup':>8}   {'batch64/base':>12} {'batch64/c':>10} "
          f"{'speedup':>8}")
    for label, text in EXPRESSIONS:
        prog = ScalarField.parse(chart, text)._program
        args = (prog.code, prog.consts, prog.stack_depth)
        n = 20000
        t_py = timeit.timeit(lambda: _kernel_py.eval_one(*args, x),
                             number=n) / n
        m = 2000
        t_pym = timeit.timeit(lambda: _kernel_py.eval_many(*args, pts),
                              number=m) / m
        if _kernel_c is not None:
            t_c = timeit.timeit(lambda: _kernel_c.eval_one(*args, x),
                                number=n) / n
            t_cm = timeit.timeit(lambda: _kernel_c.eval_many(*args, pts),
                                 number=m) / m
            print(f"{label:<24} {t_py * 1e6:>8.2f}us {t_c * 1e6:>8.2f}us "
                  f"{t_py / t_c:>7.1f}x   {t_pym * 1e6:>10.2f}us "
                  f"{t_cm * 1e6:>8.2f}us {t_pym / t_cm:>7.1f}x")
        else:
            print(f"{label:<24} {t_py * 1e6:>8.2f}us {'n/a':>10} {'':>8}  "
                  f"{t_pym * 1e6:>10.2f}us {'n/a':>10}")
    if _kernel_c is None:
        print("\ncompiled kernel not built; showing the fallback only")


def transport_workload():
    """One transport integration at h = 1e-3 through a polynomial action."""
    from algebroid_lab import ActionModel, APath, Bivector, \
        IntegratorConfig, SmoothMap, cotangent_algebroid, integrate_apath, \
        interval_chart
    M = ChartDomain("M", 2, ((-4, 4), (-4, 4)))
    A = cotangent_algebroid(Bivector.parse(M, {(0, 1): "x1"}))
    act = ActionModel(A, M, SmoothMap.identity(M), tuple(A.anchor),
                      side="right")
    I = interval_chart()
    names = {"t": 0}
    path = APath(A, (ScalarField.parse(I, "0", names),
                     ScalarField.parse(I, "1", names)),
                 SmoothMap.parse(I, M, ["exp(t)", "0"], names))
    t0 = timeit.default_timer()
    integrate_apath(path, act, np.array([1.0, 0.0]),
                    IntegratorConfig(step=1e-3))
    return timeit.default_timer() - t0


def main():
    if os.environ.get("_BENCH_CHILD"):
        print(f"  {backend_name():<10} {transport_workload():.3f} s")
        return
    print(f"active backend: {backend_name()}\n")
    bench_kernels()
    print("\ntransport integration, h = 1e-3 (end to end):")
    sys.stdout.flush()
    for env in ({}, {"ALGEBROID_LAB_PURE": "1"}):
        child_env = dict(os.environ, _BENCH_CHILD="1", **env)
        subprocess.run([sys.executable, __file__], env=child_env)


if __name__ == "__main__":
    main()
