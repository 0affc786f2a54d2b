"""Pure-Python evaluator for compiled expression programs.

Mirrors the Cython kernel instruction for instruction.  `eval_one` is a
plain interpreter loop; `eval_many` runs the same program with numpy array
registers, which keeps sampling checks fast without compiled code.
"""

from __future__ import annotations

import math

import numpy as np


def _powi(base, n):
    if n < 0:
        if base == 0.0:
            raise ZeroDivisionError("zero raised to a negative power")
        return 1.0 / _powi(base, -n)
    r = 1.0
    b = base
    while n:
        if n & 1:
            r *= b
        b *= b
        n >>= 1
    return r


def eval_one(code, consts, stack_depth, x):
    stack = [0.0] * stack_depth
    sp = 0
    i = 0
    n = len(code)
    while i < n:
        op = code[i]
        arg = code[i + 1]
        i += 2
        if op == 0:      # CONST
            stack[sp] = consts[arg]
            sp += 1
        elif op == 1:    # VAR
            stack[sp] = x[arg]
            sp += 1
        elif op == 2:    # ADD
            sp -= 1
            stack[sp - 1] += stack[sp]
        elif op == 3:    # SUB
            sp -= 1
            stack[sp - 1] -= stack[sp]
        elif op == 4:    # MUL
            sp -= 1
            stack[sp - 1] *= stack[sp]
        elif op == 5:    # DIV
            sp -= 1
            d = stack[sp]
            if d == 0.0:
                raise ZeroDivisionError("division by zero")
            stack[sp - 1] /= d
        elif op == 6:    # NEG
            stack[sp - 1] = -stack[sp - 1]
        elif op == 7:    # SIN
            stack[sp - 1] = math.sin(stack[sp - 1])
        elif op == 8:    # COS
            stack[sp - 1] = math.cos(stack[sp - 1])
        elif op == 9:    # EXP
            v = stack[sp - 1]
            try:
                stack[sp - 1] = math.exp(v)
            except OverflowError:
                stack[sp - 1] = math.inf
        elif op == 10:   # POWI
            stack[sp - 1] = _powi(stack[sp - 1], arg)
        else:
            raise ValueError(f"bad opcode {op}")
    return float(stack[0])


def eval_fused(code, consts, stack_depth, n_out, x):
    out = np.empty(n_out, dtype=np.float64)
    stack = [0.0] * stack_depth
    sp = 0
    i = 0
    n = len(code)
    while i < n:
        op = code[i]
        arg = code[i + 1]
        i += 2
        if op == 0:
            stack[sp] = consts[arg]
            sp += 1
        elif op == 1:
            stack[sp] = x[arg]
            sp += 1
        elif op == 2:
            sp -= 1
            stack[sp - 1] += stack[sp]
        elif op == 3:
            sp -= 1
            stack[sp - 1] -= stack[sp]
        elif op == 4:
            sp -= 1
            stack[sp - 1] *= stack[sp]
        elif op == 5:
            sp -= 1
            d = stack[sp]
            if d == 0.0:
                raise ZeroDivisionError("division by zero")
            stack[sp - 1] /= d
        elif op == 6:
            stack[sp - 1] = -stack[sp - 1]
        elif op == 7:
            stack[sp - 1] = math.sin(stack[sp - 1])
        elif op == 8:
            stack[sp - 1] = math.cos(stack[sp - 1])
        elif op == 9:
            v = stack[sp - 1]
            try:
                stack[sp - 1] = math.exp(v)
            except OverflowError:
                stack[sp - 1] = math.inf
        elif op == 10:
            stack[sp - 1] = _powi(stack[sp - 1], arg)
        elif op == 11:
            sp -= 1
            out[arg] = stack[sp]
        else:
            raise ValueError(f"bad opcode {op}")
    return out


def eval_many(code, consts, stack_depth, points):
    npts = points.shape[0]
    stack = np.empty((stack_depth, npts), dtype=np.float64)
    sp = 0
    i = 0
    n = len(code)
    with np.errstate(over="ignore", invalid="ignore"):
        while i < n:
            op = code[i]
            arg = code[i + 1]
            i += 2
            if op == 0:
                stack[sp] = consts[arg]
                sp += 1
            elif op == 1:
                stack[sp] = points[:, arg]
                sp += 1
            elif op == 2:
                sp -= 1
                stack[sp - 1] += stack[sp]
            elif op == 3:
                sp -= 1
                stack[sp - 1] -= stack[sp]
            elif op == 4:
                sp -= 1
                stack[sp - 1] *= stack[sp]
            elif op == 5:
                sp -= 1
                if np.any(stack[sp] == 0.0):
                    raise ZeroDivisionError("division by zero")
                stack[sp - 1] /= stack[sp]
            elif op == 6:
                np.negative(stack[sp - 1], out=stack[sp - 1])
            elif op == 7:
                np.sin(stack[sp - 1], out=stack[sp - 1])
            elif op == 8:
                np.cos(stack[sp - 1], out=stack[sp - 1])
            elif op == 9:
                np.exp(stack[sp - 1], out=stack[sp - 1])
            elif op == 10:
                if arg < 0 and np.any(stack[sp - 1] == 0.0):
                    raise ZeroDivisionError("zero raised to a negative power")
                np.power(stack[sp - 1], arg, out=stack[sp - 1])
            else:
                raise ValueError(f"bad opcode {op}")
    return stack[0].copy()
