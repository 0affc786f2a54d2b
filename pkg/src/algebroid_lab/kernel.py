"""Expression-program evaluation kernel with backend selection.

Expression trees compile to small stack programs (flat int32 opcode/arg
pairs plus a float64 constant pool).  Two interchangeable evaluators exist:

* ``_kernel_c``: Cython, compiled at install time when a toolchain is
  available; evaluates single points and sample batches in C.
* ``_kernel_py``: pure Python fallback with identical semantics; batch
  evaluation is vectorized over numpy arrays.

The compiled backend is preferred.  Set ``ALGEBROID_LAB_PURE=1`` to force
the pure backend (the benchmark uses this to compare the two).

Division by exact zero (and a negative integer power of zero) raises
``ZeroDivisionError``; callers translate that to ``EvaluationPole``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

OP_CONST = 0
OP_VAR = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_NEG = 6
OP_SIN = 7
OP_COS = 8
OP_EXP = 9
OP_POWI = 10
OP_STORE = 11   # pop the top of stack into output slot `arg`


@dataclass(frozen=True)
class Program:
    """Compiled form of one scalar expression, or, with OP_STORE
    instructions and n_out > 1, a fused bundle of several expressions
    evaluated in one kernel call (vector fields, map components,
    jacobian matrices)."""

    code: np.ndarray      # int32, flat (op, arg) pairs
    consts: np.ndarray    # float64 constant pool
    stack_depth: int
    dim: int              # number of chart coordinates the program may read
    n_out: int = 1

    @staticmethod
    def build(code, consts, stack_depth, dim, n_out=1) -> "Program":
        return Program(
            code=np.asarray(code, dtype=np.int32),
            consts=np.asarray(consts, dtype=np.float64),
            stack_depth=int(stack_depth),
            dim=int(dim),
            n_out=int(n_out),
        )


if os.environ.get("ALGEBROID_LAB_PURE"):
    from . import _kernel_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernel_c as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        from . import _kernel_py as _impl
        BACKEND = "python"


def eval_one(program: Program, point) -> float:
    """Evaluate at a single point (any sequence of >= program.dim floats)."""
    x = np.asarray(point, dtype=np.float64)
    return _impl.eval_one(program.code, program.consts, program.stack_depth, x)


def eval_many(program: Program, points) -> np.ndarray:
    """Evaluate at each row of `points` (n, dim); returns shape (n,)."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-d array")
    return _impl.eval_many(program.code, program.consts,
                           program.stack_depth, pts)


def eval_fused(program: Program, point) -> np.ndarray:
    """Evaluate a fused multi-output program; returns shape (n_out,)."""
    x = np.asarray(point, dtype=np.float64)
    return _impl.eval_fused(program.code, program.consts,
                            program.stack_depth, program.n_out, x)


def backend_name() -> str:
    return BACKEND
