# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluator for expression programs (hot kernel).

Same opcode set and semantics as _kernel_py; see kernel.py for the
contract.  Programs hand in pre-built contiguous arrays, so the wrappers
only acquire memoryviews; evaluation stacks up to 128 slots live on the C
stack.
"""

from libc.math cimport sin, cos, exp

import numpy as np

DEF STACK_CAP = 128


cdef inline double _powi(double base, int n) except? -1e308:
    cdef double r = 1.0
    cdef double b = base
    cdef int m = n
    if m < 0:
        if base == 0.0:
            raise ZeroDivisionError("zero raised to a negative power")
        return 1.0 / _powi(base, -m)
    while m:
        if m & 1:
            r *= b
        b *= b
        m >>= 1
    return r


cdef double _run(const int[::1] code, const double[::1] consts,
                 double* stack, const double* x,
                 double* out) except? -1e308:
    cdef Py_ssize_t i = 0, n = code.shape[0]
    cdef int op, arg
    cdef Py_ssize_t sp = 0
    cdef double d
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
            stack[sp - 1] = sin(stack[sp - 1])
        elif op == 8:
            stack[sp - 1] = cos(stack[sp - 1])
        elif op == 9:
            stack[sp - 1] = exp(stack[sp - 1])
        elif op == 10:
            stack[sp - 1] = _powi(stack[sp - 1], arg)
        elif op == 11:
            sp -= 1
            out[arg] = stack[sp]
        else:
            raise ValueError("bad opcode")
    return stack[0]


def eval_one(const int[::1] code, const double[::1] consts,
             int stack_depth, const double[::1] x):
    cdef double sbuf[STACK_CAP]
    cdef double dummy
    cdef double[::1] big
    if stack_depth <= STACK_CAP:
        return _run(code, consts, &sbuf[0], &x[0], &dummy)
    big = np.empty(stack_depth, dtype=np.float64)
    return _run(code, consts, &big[0], &x[0], &dummy)


def eval_fused(const int[::1] code, const double[::1] consts,
               int stack_depth, int n_out, const double[::1] x):
    out_arr = np.empty(n_out, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double sbuf[STACK_CAP]
    cdef double[::1] big
    if stack_depth <= STACK_CAP:
        _run(code, consts, &sbuf[0], &x[0], &out[0])
    else:
        big = np.empty(stack_depth, dtype=np.float64)
        _run(code, consts, &big[0], &x[0], &out[0])
    return out_arr


def eval_many(const int[::1] code, const double[::1] consts,
              int stack_depth, const double[:, ::1] points):
    out_arr = np.empty(points.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double sbuf[STACK_CAP]
    cdef double dummy
    cdef double[::1] big
    cdef double* stack
    if stack_depth <= STACK_CAP:
        stack = &sbuf[0]
    else:
        big = np.empty(stack_depth, dtype=np.float64)
        stack = &big[0]
    cdef Py_ssize_t r
    for r in range(points.shape[0]):
        out[r] = _run(code, consts, stack, &points[r, 0], &dummy)
    return out_arr
