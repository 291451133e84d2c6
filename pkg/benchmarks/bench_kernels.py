"""Compare the numba beam-splitter kernels against the pure-numpy reference.

Run from the repository root::

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --photons 4 8 16 24 --repeat 20

The kernel section times both backends in one process. The end-to-end
section evaluates the Bell circuit in two subprocesses, one with
``LOV_DISABLE_NUMBA=1``.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit
from pathlib import Path

from lov import _kernels

ROOT = Path(__file__).resolve().parents[1]

E2E = """
import time
from lov import _kernels
from lov.circuit import load
from lov.fock import FockVector, eval_circuit
c = load({path!r})
v = FockVector.basis((1, 0, 1, 0, 0, 0))
eval_circuit(c, v)
start = time.perf_counter()
for _ in range({repeat}):
    eval_circuit(c, v)
print(_kernels.BACKEND, (time.perf_counter() - start) / {repeat})
"""


def bench_kernels(photons: list[int], repeat: int) -> None:
    if _kernels.BACKEND != "numba":
        print("numba backend unavailable; only the numpy reference is timed")
    theta = 0.37
    # compile outside the timings
    _kernels.bs_sector(2, theta)
    print(f"{'photons':>8} {'sector numba':>14} {'sector numpy':>14} {'speedup':>8}")
    for n in photons:
        n = min(n, _kernels.STABLE_LIMIT)
        fast = min(timeit.repeat(lambda: _kernels.bs_sector(n, theta), number=repeat, repeat=3))
        slow = min(timeit.repeat(lambda: _kernels.bs_sector_numpy(n, theta), number=repeat, repeat=3))
        print(f"{n:>8} {fast / repeat * 1e6:>12.1f}us {slow / repeat * 1e6:>12.1f}us {slow / fast:>7.1f}x")


def bench_end_to_end(repeat: int) -> None:
    code = E2E.format(path=str(ROOT / "circuits" / "bell.lov"), repeat=repeat)
    for flag in ("0", "1"):
        env = dict(os.environ, LOV_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, per_call = out.stdout.split()
        print(f"bell eval [{backend:>5}] {float(per_call) * 1e3:8.2f} ms")


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--photons", type=int, nargs="+", default=[4, 8, 16, 24])
    p.add_argument("--repeat", type=int, default=50)
    p.add_argument("--skip-e2e", action="store_true")
    args = p.parse_args()
    bench_kernels(args.photons, args.repeat)
    if not args.skip_e2e:
        bench_end_to_end(max(1, args.repeat // 10))


if __name__ == "__main__":
    main()
