"""Pure-numpy transfer-matrix contractions.

These are the reference implementations of the hot loops used throughout
the package: overlaps, MPO sandwiches and their all-pairs (Gram) versions.
The compiled module ``_ckernels`` exposes the same functions with the same
signatures; :mod:`dgsa.kernels` picks one of the two at import time.

Tensor conventions: MPS site tensors are ``(left, phys, right)`` and MPO
site tensors are ``(left, out, in, right)``, all ``complex128``.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

Tensors = Sequence[np.ndarray]


def left_env(bra: Tensors, ket: Tensors, nsites: int) -> np.ndarray:
    """Contract the first ``nsites`` sites of ``<bra|ket>``.

    Returns the environment ``E[r_bra, r_ket]`` on the bond to the right of
    site ``nsites - 1``.
    """
    env = np.ones((1, 1), dtype=np.complex128)
    for k in range(nsites):
        a = bra[k]
        b = ket[k]
        tmp = np.tensordot(env, b, axes=(1, 0))  # (lb, s, rk)
        env = np.tensordot(a.conj(), tmp, axes=((0, 1), (0, 1)))
    return env


def overlap(bra: Tensors, ket: Tensors) -> complex:
    """Return ``<bra|ket>`` for two MPS given as tensor lists."""
    n = len(bra)
    if n == 0:
        return 1.0 + 0.0j
    return complex(left_env(bra, ket, n)[0, 0])


def sandwich(bra: Tensors, mpo: Tensors, ket: Tensors) -> complex:
    """Return ``<bra|W|ket>`` for an MPO ``W``."""
    env = np.ones((1, 1, 1), dtype=np.complex128)
    for a, w, b in zip(bra, mpo, ket):
        t1 = np.tensordot(env, b, axes=(2, 0))  # (lb, w, t, rk)
        t2 = np.tensordot(t1, w, axes=((1, 2), (0, 2)))  # (lb, rk, s, v)
        env = np.tensordot(a.conj(), t2, axes=((0, 1), (0, 2)))  # (rb, rk, v)
        env = env.transpose(0, 2, 1)
    return complex(env[0, 0, 0])


def gram(bras: Sequence[Tensors], kets: Sequence[Tensors]) -> np.ndarray:
    """All-pairs overlap matrix ``G[a, b] = <bras[a]|kets[b]>``."""
    out = np.empty((len(bras), len(kets)), dtype=np.complex128)
    for ia, a in enumerate(bras):
        for ib, b in enumerate(kets):
            out[ia, ib] = overlap(a, b)
    return out


def sandwich_gram(bras: Sequence[Tensors], mpo: Tensors, kets: Sequence[Tensors]) -> np.ndarray:
    """All-pairs matrix ``M[a, b] = <bras[a]|W|kets[b]>``."""
    out = np.empty((len(bras), len(kets)), dtype=np.complex128)
    for ia, a in enumerate(bras):
        for ib, b in enumerate(kets):
            out[ia, ib] = sandwich(a, mpo, b)
    return out
