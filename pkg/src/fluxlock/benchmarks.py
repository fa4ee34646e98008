"""Timing harness for the sequential kernels: ``python -m fluxlock.benchmarks``.

Runs each hot loop through the plain-python implementation and, when
numba is active, the compiled one, on identical pregenerated inputs.
Besides the timings it asserts the two backends agree bit for bit, which
is the property that makes ``FLUXLOCK_DISABLE_NUMBA=1`` a safe escape
hatch rather than a different simulator.  (With numba present, the
interpreted feedback loop borrows the compiled trig helper; a fully
interpreted process still produces the same bits, which the test suite
checks in a subprocess.)
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from . import _kernels
from .core import SeedStream


def _best_of(repeat: int, fn, *args):
    best = np.inf
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def _identical(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_identical(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def _single_inputs(steps: int):
    root = SeedStream(2024).child("bench", "single")
    scale = np.sqrt(0.01 * 0.005)
    noise = scale * (root.child("re").normals(steps) + 1j * root.child("im").normals(steps))
    return (1.0 + 0.0j, noise, 1.6, 0.8, 0.005, 25.0)

def _batch_inputs(steps: int, members: int):
    root = SeedStream(2024).child("bench", "batch")
    scale = np.sqrt(0.01 * 0.005)
    noise = scale * (
        root.child("re").normals(members * steps) + 1j * root.child("im").normals(members * steps)
    ).reshape(members, steps)
    return (np.full(members, 1.0 + 0.0j), noise, 1.6, 0.8, 0.005, 25.0)

def _loop_inputs(steps: int):
    root = SeedStream(2024).child("bench", "loop")
    b0 = 1.0e4
    master = b0 + 0.5 * (root.child("m1").normals(steps) + 1j * root.child("m2").normals(steps))
    vacuum = 0.5 * (root.child("v1").normals(steps) + 1j * root.child("v2").normals(steps))
    w1 = 0.5 * root.child("w1").normals(steps)
    w2 = 0.5 * root.child("w2").normals(steps)
    dphi = np.sqrt(0.02) * root.child("dphi").normals(steps) / 100.0
    theta = np.pi / 4.0
    return (
        master, vacuum, w1, w2, dphi,
        100.0, np.sin(theta), np.cos(theta),
        1.0e-9, 200, 0.1, 0.0, 1.0, 1.0e9,
    )


_CASES = (
    ("nonlinear_path", _kernels.nonlinear_path_py, "nonlinear_path", _single_inputs),
    ("nonlinear_path_batch", _kernels.nonlinear_path_batch_py, "nonlinear_path_batch", _batch_inputs),
    ("feedback_loop", _kernels.feedback_loop_py, "feedback_loop", _loop_inputs),
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="time the sequential kernels on both backends")
    parser.add_argument("--steps", type=int, default=200_000, help="samples per record")
    parser.add_argument("--members", type=int, default=32, help="ensemble size for the batch kernel")
    parser.add_argument("--repeat", type=int, default=3, help="repetitions; the best time is reported")
    args = parser.parse_args(argv)

    jit_on = _kernels.KERNEL_BACKEND == "numba"
    print(f"active backend: {_kernels.KERNEL_BACKEND}")
    if not jit_on:
        print("numba is disabled or unavailable; timing the python implementations only\n")

    header = f"{'kernel':<22}{'python':>12}{'numba':>12}{'speedup':>10}   bit-identical"
    print(header)
    print("-" * len(header))
    for name, py_fn, jit_name, make_inputs in _CASES:
        inputs = make_inputs(args.steps, args.members) if "batch" in name else make_inputs(args.steps)
        t_py, out_py = _best_of(args.repeat, py_fn, *inputs)
        if jit_on:
            jit_fn = getattr(_kernels, jit_name)
            jit_fn(*inputs)  # compile outside the timed region
            t_jit, out_jit = _best_of(args.repeat, jit_fn, *inputs)
            same = _identical(out_py, out_jit)
            print(f"{name:<22}{t_py*1e3:>10.1f}ms{t_jit*1e3:>10.1f}ms{t_py/t_jit:>9.1f}x   {same}")
            if not same:
                print(f"  backend mismatch in {name}; FLUXLOCK_DISABLE_NUMBA=1 is not equivalent here")
                return 1
        else:
            print(f"{name:<22}{t_py*1e3:>10.1f}ms{'-':>12}{'-':>10}   -")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
