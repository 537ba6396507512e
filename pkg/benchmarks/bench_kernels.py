"""Compare the compiled and pure-numpy contraction kernels.

Usage::

    python benchmarks/bench_kernels.py [--n 8] [--bond 8] [--states 16] [--repeat 5]

Times each kernel on the same random MPS data with both backends, checks
that the results agree, and prints one line per kernel with the speedup.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from dgsa import _pykernels
from dgsa.model import make_model
from dgsa.tensor_mps import random_mps

try:
    from dgsa import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None


def _cases(n: int, bond: int, count: int, seed: int):
    rng = np.random.default_rng(seed)
    states = [random_mps(n, 2, bond, rng).tensors for _ in range(count)]
    mpo = make_model("tfi", n, {"h": 0.3}).mpo.tensors
    a, b = states[0], states[1]
    return {
        "left_env": lambda k: k.left_env(a, b, n - 1),
        "overlap": lambda k: k.overlap(a, b),
        "sandwich": lambda k: k.sandwich(a, mpo, b),
        "gram": lambda k: k.gram(states, states),
        "sandwich_gram": lambda k: k.sandwich_gram(states, mpo, states),
    }


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--bond", type=int, default=8)
    p.add_argument("--states", type=int, default=16)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    if _ckernels is None:
        print("compiled kernels are not built; only the pure-numpy backend is available")
    cases = _cases(args.n, args.bond, args.states, args.seed)
    print(f"n={args.n} bond={args.bond} states={args.states} repeat={args.repeat}")
    print(f"{'kernel':<14} {'python ms':>10} {'compiled ms':>12} {'speedup':>8} {'max diff':>10}")
    for name, fn in cases.items():
        t_py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1000
        if _ckernels is None:
            print(f"{name:<14} {t_py:>10.3f} {'-':>12} {'-':>8} {'-':>10}")
            continue
        t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1000
        diff = float(np.max(np.abs(np.asarray(fn(_pykernels)) - np.asarray(fn(_ckernels)))))
        print(f"{name:<14} {t_py:>10.3f} {t_c:>12.3f} {t_py / t_c:>8.2f} {diff:>10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
