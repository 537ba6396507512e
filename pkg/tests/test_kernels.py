"""The compiled and pure-numpy contraction kernels agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from dgsa import _pykernels, kernels
from dgsa.model import make_model
from dgsa.tensor_mps import random_mps, to_dense

try:
    from dgsa import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None

BACKENDS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])


@pytest.fixture
def data(rng):
    states = [random_mps(5, 2, b, rng).tensors for b in (1, 2, 3, 4)]
    return states, make_model("tfi", 5, {"h": 0.3})


@pytest.mark.parametrize(
    "backend", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1]
)
def test_kernels_match_dense(backend, data):
    from dgsa.tensor_mps import MPS

    states, H = data
    dense = np.stack([to_dense(MPS(s)) for s in states], axis=1)
    G = backend.gram(states, states)
    assert np.abs(G - dense.conj().T @ dense).max() <= 1e-12
    S = backend.sandwich_gram(states, H.mpo.tensors, states)
    assert np.abs(S - dense.conj().T @ H.dense() @ dense).max() <= 1e-11
    assert abs(backend.overlap(states[1], states[2]) - G[1, 2]) <= 1e-12
    assert abs(backend.sandwich(states[0], H.mpo.tensors, states[3]) - S[0, 3]) <= 1e-11
    env = backend.left_env(states[2], states[3], 5)
    assert abs(env.reshape(-1)[0] - G[2, 3]) <= 1e-12


@pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")
def test_backends_agree(data):
    states, H = data
    for name in ("gram", "sandwich_gram"):
        args = (states, states) if name == "gram" else (states, H.mpo.tensors, states)
        a = getattr(_pykernels, name)(*args)
        b = getattr(_ckernels, name)(*args)
        assert np.abs(a - b).max() <= 1e-12


def test_backend_selection_env():
    code = "from dgsa import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, DGSA_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", code],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND in ("python", "compiled")
    if _ckernels is not None and not os.environ.get("DGSA_PURE_PYTHON"):
        assert kernels.BACKEND == "compiled"
