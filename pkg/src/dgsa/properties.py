"""Randomized property suites for the inequalities the pipeline relies on.

Every suite draws its instances from a seeded generator, evaluates one
inequality densely per instance and records the slack ``rhs - lhs`` (so a
negative slack beyond the tolerance is a violation). Suites never raise on
a violation; failures are reported as data by :func:`property_suite`.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import cache
from typing import Any

import numpy as np

from .agsp import approx_agsp, exact_agsp, gaussian_filter_values, make_schedule
from .model import StandardHamiltonian, make_model, partition
from .oracle import Spectrum, diagonalize, truncated_norms
from .sdp import ProgramSolution, demix, orthogonalize
from .tensor_mps import from_dense, mpo_to_dense, random_mps, to_dense, truncate_at_cut
from .viable import dense_contraction, dense_left_state

DEFAULT_INSTANCES = 1000
TOL = 1e-9
TRUNCATION_TIMES = (1.0, 5.0, 20.0, 99.0)
TRUNCATION_EXTRA_SEEDS = (1, 2, 3, 4)
CATALOG = (
    ("ising", {}),
    ("tfi", {"h": 0.3}),
    ("heisenberg", {"J": 1.0}),
    ("random_ising", {"seed": 0}),
)


# ---------------------------------------------------------------------------
# bookkeeping
# ---------------------------------------------------------------------------


@dataclass
class SuiteResult:
    """Outcome of one property suite.

    Attributes
    ----------
    name, group : str
        Registry name and the family it belongs to.
    statement : str
        The inequality checked, in plain text.
    instances, violations : int
        Number of randomized instances and of those with slack below
        ``-tolerance``.
    min_slack : float
        Smallest ``rhs - lhs`` seen.
    worst : dict
        Parameters of the instance attaining ``min_slack``.
    """

    name: str
    group: str
    statement: str
    tolerance: float
    instances: int = 0
    violations: int = 0
    min_slack: float = math.inf
    worst: dict[str, Any] = field(default_factory=dict)
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.instances > 0 and self.violations == 0

    def add(self, slack: float, **info: Any) -> None:
        """Record one instance."""
        slack = float(slack)
        self.instances += 1
        if slack < -self.tolerance or not math.isfinite(slack):
            self.violations += 1
        if slack < self.min_slack:
            self.min_slack = slack
            self.worst = dict(info)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "group": self.group,
            "statement": self.statement,
            "tolerance": self.tolerance,
            "instances": self.instances,
            "violations": self.violations,
            "min_slack": self.min_slack,
            "passed": self.passed,
            "worst": self.worst,
            "details": self.details,
        }


@dataclass(frozen=True)
class Suite:
    name: str
    group: str
    statement: str
    run: Callable[[SuiteResult, np.random.Generator, int], None]


@cache
def _catalog_entry(name: str, n: int, key: tuple) -> tuple[StandardHamiltonian, Spectrum, np.ndarray]:
    H = make_model(name, n, dict(key))
    spec = diagonalize(H)
    return H, spec, H.dense()


def catalog(ns: Sequence[int]) -> list[tuple[str, StandardHamiltonian, Spectrum, np.ndarray]]:
    """Catalog models with their spectra and dense matrices at each ``n``."""
    out = []
    for n in ns:
        for name, params in CATALOG:
            H, spec, Hd = _catalog_entry(name, n, tuple(sorted(params.items())))
            out.append((f"{name}/n={n}", H, spec, Hd))
    return out


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def _near(rng: np.random.Generator, w: np.ndarray) -> np.ndarray:
    """A unit vector at a random (log-uniform) distance from ``w``."""
    s = 10.0 ** rng.uniform(-4, 0.5)
    v = w * np.exp(1j * rng.uniform(0, 2 * np.pi)) + s * _unit(rng, w.size)
    return v / np.linalg.norm(v)


def _energy(H: np.ndarray, v: np.ndarray) -> float:
    return float(np.real(v.conj() @ H @ v))


def _low_combination(rng: np.random.Generator, spec: Spectrum, m: int) -> np.ndarray:
    """Random unit combination of the ``m`` lowest eigenvectors."""
    m = min(m, spec.eigenvectors.shape[1])
    c = _unit(rng, m) * np.exp(-rng.uniform(0, 3, size=m))
    return spec.eigenvectors[:, :m] @ (c / np.linalg.norm(c))


def _mostly_ground(rng: np.random.Generator, spec: Spectrum) -> np.ndarray:
    """Ground-space vector plus an excited component of random weight."""
    dim = spec.eigenvectors.shape[0]
    gpart = spec.ground_vectors @ _unit(rng, spec.g)
    if rng.random() < 0.5:
        m = int(rng.integers(1, 9))
        hi = min(spec.g + m, dim)
        epart = spec.eigenvectors[:, spec.g : hi] @ _unit(rng, hi - spec.g)
    else:
        epart = _unit(rng, dim)
        epart = epart - spec.ground_vectors @ (spec.ground_vectors.conj().T @ epart)
        epart /= np.linalg.norm(epart)
    p = 10.0 ** rng.uniform(-6, 0)
    return math.sqrt(1 - p) * gpart + math.sqrt(p) * epart


# ---------------------------------------------------------------------------
# viability measures
# ---------------------------------------------------------------------------


def _run_interchangeability(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    models = catalog((4, 6, 8))
    for k in range(count):
        label, H, spec, Hd = models[k % len(models)]
        v = _mostly_ground(rng, spec)
        E = _energy(Hd, v)
        Gv = float(np.linalg.norm(spec.ground_vectors.conj().T @ v))
        Delta = (E - spec.eps0) / spec.gap
        delta = 1.0 - Gv
        s_energy = Gv - (1.0 - Delta)
        s_overlap = spec.eps0 + 2 * delta * H.n - E
        res.add(min(s_energy, s_overlap), model=label, Delta=Delta, delta=delta)


# ---------------------------------------------------------------------------
# overlap facts on dense vectors
# ---------------------------------------------------------------------------


def _dims(rng: np.random.Generator) -> int:
    return int(rng.integers(2, 65))


def _run_overlap_triangle(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    for _ in range(count):
        w = _unit(rng, _dims(rng))
        v, vp = _near(rng, w), _near(rng, w)
        d1 = 1 - abs(np.vdot(v, w))
        d2 = 1 - abs(np.vdot(vp, w))
        res.add(abs(np.vdot(v, vp)) - (1 - 2 * (d1 + d2)), delta=d1, delta_prime=d2)


def _run_overlap_expectation(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    for _ in range(count):
        dim = _dims(rng)
        w = _unit(rng, dim)
        v = _near(rng, w)
        O = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        if rng.random() < 0.5:
            O = O + O.conj().T
        O *= rng.uniform(0.1, 1.0) / np.linalg.norm(O, 2)
        delta = 1 - abs(np.vdot(v, w))
        gap = abs(np.vdot(v, O @ v) - np.vdot(w, O @ w))
        res.add(2 * math.sqrt(2 * delta) - gap, delta=delta)


def _run_overlap_transfer(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    for _ in range(count):
        dim = _dims(rng)
        u = _unit(rng, dim)
        target = _near(rng, u) if rng.random() < 0.5 else _unit(rng, dim)
        v = _near(rng, u)
        omega = abs(np.vdot(u, target))
        delta = 1 - abs(np.vdot(v, u))
        res.add(omega + math.sqrt(2 * delta) - abs(np.vdot(v, target)), omega=omega, delta=delta)


def _run_overlap_pairs(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    for _ in range(count):
        dim = _dims(rng)
        u1 = _unit(rng, dim)
        u2 = _near(rng, u1) if rng.random() < 0.5 else _unit(rng, dim)
        v1, v2 = _near(rng, u1), _near(rng, u2)
        omega = abs(np.vdot(u1, u2))
        delta = max(1 - abs(np.vdot(u1, v1)), 1 - abs(np.vdot(u2, v2)))
        res.add(omega + math.sqrt(10 * delta) - abs(np.vdot(v1, v2)), omega=omega, delta=delta)


# ---------------------------------------------------------------------------
# program primitives
# ---------------------------------------------------------------------------


def _run_orthogonalising(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    models = catalog((4, 6))
    worst_orth = 0.0
    for k in range(count):
        label, H, spec, Hd = models[k % len(models)]
        while True:
            u = _low_combination(rng, spec, int(rng.integers(2, 7)))
            v = _low_combination(rng, spec, int(rng.integers(2, 7)))
            beta = abs(np.vdot(u, v))
            if beta <= 0.5:
                break
        dE = max(_energy(Hd, u), _energy(Hd, v)) - spec.eps0
        out = to_dense(orthogonalize(from_dense(v, H.n, H.d), [from_dense(u, H.n, H.d)]))
        worst_orth = max(worst_orth, abs(np.vdot(u, out)))
        bound = spec.eps0 + dE * (1 + beta) / (1 - beta)
        res.add(bound - _energy(Hd, out), model=label, beta=beta, excess=dE)
    res.details["max_overlap_after"] = worst_orth
    if worst_orth > TOL:
        res.violations += 1


def _run_demixing(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    models = catalog((4, 6))
    for k in range(count):
        label, H, spec, Hd = models[k % len(models)]
        g, eps, dim = spec.g, spec.gap, Hd.shape[0]
        Delta = rng.uniform(0.01, 1.0) / (3 * g)
        Vg = spec.ground_vectors @ np.linalg.qr(rng.normal(size=(g, g)) + 1j * rng.normal(size=(g, g)))[0]
        wg = rng.dirichlet(np.ones(g))
        rho_g = (Vg * wg[None, :]) @ Vg.conj().T
        m = int(rng.integers(1, 5))
        cols = []
        for _ in range(m):
            if rng.random() < 0.5:
                j = int(rng.integers(g, dim))
                cols.append(spec.eigenvectors[:, j])
            else:
                cols.append(_unit(rng, dim))
        Ve = np.stack(cols, axis=1)
        we = rng.dirichlet(np.ones(m))
        rho_e = (Ve * we[None, :]) @ Ve.conj().T
        excess = float(np.real(np.trace(rho_e @ Hd))) - spec.eps0
        p_max = min(1.0, Delta * eps / ((2 * g + 1) * max(excess, 1e-300)))
        p = p_max * (1 - 1e-9) * (1.0 if rng.random() < 0.25 else rng.random())
        sigma = (1 - p) * rho_g + p * rho_e
        sol = ProgramSolution(sigma=sigma, objective=None, residuals={}, status="optimal")
        out = demix(sol, Hd, spec.eps0, eps, Delta, g)
        out = out / np.linalg.norm(out)
        bound = spec.eps0 + Delta * eps
        res.add((bound - _energy(Hd, out)) / eps, model=label, Delta=Delta, p=p)


# ---------------------------------------------------------------------------
# boundary contraction
# ---------------------------------------------------------------------------


def _bond_isometry(ls: np.ndarray, M: np.ndarray) -> np.ndarray:
    """``U_v`` with ``U_v |j> = |b_j>`` matched to the gauge of ``ls``."""
    U = np.zeros((M.shape[1], ls.shape[1]), dtype=np.complex128)
    for j in range(ls.shape[1]):
        nj = np.linalg.norm(ls[:, j])
        if nj > 0:
            U[:, j] = (ls[:, j].conj() @ M) / nj**2
    return U


def _run_boundary(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    d = 2
    for k in range(count):
        name, params = CATALOG[k % len(CATALOG)]
        n = int(rng.integers(3, 7))
        H, _, Hd = _catalog_entry(name, n, tuple(sorted(params.items())))
        cut = int(rng.integers(1, n))
        part = partition(H, cut)
        _, hm, hr = part.full_dense_pieces()
        B = int(rng.integers(1, min(d**cut, d ** (n - cut)) + 1))
        ls, w = dense_left_state(_unit(rng, d**n), n, d, cut, B)
        M = w.reshape(d**cut, d ** (n - cut))
        U = _bond_isometry(ls, M)
        r = int(rng.integers(1, 4))
        X = rng.normal(size=(d**cut * B, r)) + 1j * rng.normal(size=(d**cut * B, r))
        sigma = X @ X.conj().T
        sigma /= np.real(np.trace(sigma))
        Uf = np.kron(np.eye(d**cut), U)
        lhs = float(np.real(np.trace(Uf @ sigma @ Uf.conj().T @ Hd)))
        e_left = float(np.real(np.trace(sigma @ np.kron(part.left_dense(), np.eye(B)))))
        red = np.einsum("xaxb->ab", sigma.reshape(d ** (cut - 1), d * B, d ** (cut - 1), d * B))
        diff = red - dense_contraction(ls, d)
        tn = float(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum())
        Pi = np.kron(np.eye(d**cut), U @ U.conj().T)
        hr_norm = float(np.linalg.norm(hr @ Pi, 2))
        e_right = _energy(hr, w)
        rhs = e_left + _energy(hm + hr, w) + tn * (1 + hr_norm - e_right)
        res.add(rhs - lhs, model=f"{name}/n={n}", cut=cut, B=B, trace_distance=tn)


# ---------------------------------------------------------------------------
# truncation
# ---------------------------------------------------------------------------


def _run_truncation(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    # Deterministic sweep: every catalog model (two disorder seeds) at every
    # n <= 10, every cut, every ground vector and every t.
    del rng, count
    models = list(CATALOG) + [("random_ising", {"seed": seed}) for seed in TRUNCATION_EXTRA_SEEDS]
    small = 0
    for name, params in models:
        for n in range(2, 11):
            H, spec, _ = _catalog_entry(name, n, tuple(sorted(params.items())))
            for cut in range(1, n):
                p_all, q_all = truncated_norms(H, cut, TRUNCATION_TIMES, spec.ground_vectors)
                for t, p_norms, q_norms in zip(TRUNCATION_TIMES, p_all, q_all):
                    bound = 99 * 2 ** (-t / 99)
                    for j, (a, b) in enumerate(zip(p_norms, q_norms)):
                        res.add(min(b - a, bound - b), model=f"{name}/n={n}", cut=cut, t=t, vector=j)
                        small += n <= 8
    res.details["instances_n_le_8"] = small


def _run_ground_half_energy(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    del rng, count
    for name, params in CATALOG:
        for n in range(3, 11):
            H, spec, _ = _catalog_entry(name, n, tuple(sorted(params.items())))
            for cut in range(1, n):
                part = partition(H, cut)
                M = spec.ground_vectors.reshape(H.d**cut, H.d ** (n - cut), -1)
                for j in range(spec.g):
                    v = M[:, :, j]
                    e_left = float(np.real(np.vdot(v, part.left_shifted_dense() @ v)))
                    e_right = float(np.real(np.vdot(v, v @ part.right_shifted_dense().T)))
                    res.add(1 - (e_left + e_right), model=f"{name}/n={n}", cut=cut, vector=j)


def _run_eckart_young(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    d = 2
    for _ in range(count):
        n = int(rng.integers(3, 9))
        state = random_mps(n, d, int(rng.integers(2, 9)), rng)
        v = to_dense(state)
        cut = int(rng.integers(1, n))
        M = v.reshape(d**cut, d ** (n - cut))
        u, s, vh = np.linalg.svd(M, full_matrices=False)
        rank = int(np.sum(s > 1e-12 * s[0]))
        D = int(rng.integers(1, rank + 1))
        T = to_dense(truncate_at_cut(state, cut, D))
        t_rank = int(np.sum(np.linalg.svd(T.reshape(M.shape), compute_uv=False) > 1e-10))
        best = abs(np.vdot(T, v))
        closed = math.sqrt(float(np.sum(s[:D] ** 2) / np.sum(s**2)))
        rivals = []
        if D < rank:
            idx = list(range(D - 1)) + [D]
            c = (u[:, idx] * s[idx]) @ vh[idx]
            rivals.append(c.reshape(-1))
        for _r in range(3):
            scale = 10.0 ** rng.uniform(-4, 0)
            a = u[:, :D] + scale * (rng.normal(size=(M.shape[0], D)) + 1j * rng.normal(size=(M.shape[0], D)))
            b = vh[:D] + scale * (rng.normal(size=(D, M.shape[1])) + 1j * rng.normal(size=(D, M.shape[1])))
            rivals.append(((a * s[:D]) @ b).reshape(-1))
        rival = max(abs(np.vdot(w / np.linalg.norm(w), v)) for w in rivals)
        slack = min(best - rival, TOL - abs(best - closed), float(D - t_rank))
        res.add(slack, n=n, cut=cut, D=D, rank=rank)


# ---------------------------------------------------------------------------
# approximate bases of a ground space
# ---------------------------------------------------------------------------


def _approximate_basis(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, float]:
    """Random rank-g projector, orthonormal set close to it, and its delta.

    ``delta = g * max_i (1 - <v_i|G|v_i>)`` is the least value for which the
    set satisfies the per-vector hypothesis; samples with ``delta >= 1``
    are redrawn.
    """
    while True:
        dim = int(rng.integers(4, 65))
        g = int(rng.integers(1, min(4, dim // 2) + 1))
        Wg = np.linalg.qr(rng.normal(size=(dim, g)) + 1j * rng.normal(size=(dim, g)))[0]
        scale = 10.0 ** rng.uniform(-3, -0.3)
        A = Wg @ (rng.normal(size=(g, g)) + 1j * rng.normal(size=(g, g)))
        A = A + scale * (rng.normal(size=(dim, g)) + 1j * rng.normal(size=(dim, g)))
        V = np.linalg.qr(A)[0]
        G = Wg @ Wg.conj().T
        per = np.real(np.einsum("ji,jk,ki->i", V.conj(), G, V))
        delta = float(g * np.max(1 - per))
        if delta < 1:
            return G, V, delta


def _run_basis_overlap(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    for _ in range(count):
        G, V, delta = _approximate_basis(rng)
        g = V.shape[1]
        # The least value over the span is attained by an eigenvector of V^dag G V.
        worst = float(np.linalg.eigvalsh(V.conj().T @ G @ V)[0])
        sampled = min(_energy(G, V @ _unit(rng, g)) for _ in range(4))
        res.add(min(worst, sampled) - (1 - delta), g=g, delta=delta)


def _run_basis_projection(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    for _ in range(count):
        G, V, delta = _approximate_basis(rng)
        sv = np.linalg.svd(G @ V, compute_uv=False)
        rank = int(np.sum(sv > 1e-12))
        res.add(min(float(sv[-1]), float(rank - V.shape[1]) + 1.0) - 1e-12, g=V.shape[1], delta=delta)


def _run_basis_fullness(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    for _ in range(count):
        G, V, delta = _approximate_basis(rng)
        dim, g = V.shape
        Q = np.linalg.qr(np.concatenate([V, rng.normal(size=(dim, dim - g)) + 0j], axis=1))[0][:, g:]
        worst = float(np.linalg.eigvalsh(Q.conj().T @ G @ Q)[-1])
        sampled = max(_energy(G, Q @ _unit(rng, dim - g)) for _ in range(4))
        res.add(delta - max(worst, sampled), g=g, delta=delta)


# ---------------------------------------------------------------------------
# frustration
# ---------------------------------------------------------------------------


@cache
def _left_energy_operator(name: str, n: int, key: tuple, cut: int) -> np.ndarray:
    H, _, _ = _catalog_entry(name, n, key)
    part = partition(H, cut, allow_full=True)
    return np.kron(part.left_dense(), np.eye(H.d ** (n - cut)))


def _frustration_state(rng: np.random.Generator, spec: Spectrum) -> np.ndarray:
    dim = spec.eigenvectors.shape[1]
    if rng.random() < 0.5:
        return spec.eigenvectors[:, int(rng.integers(0, min(8, dim)))]
    return _low_combination(rng, spec, int(rng.integers(2, 9)))


def _run_frustration(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    for k in range(count):
        name, params = CATALOG[k % len(CATALOG)]
        n = int(rng.integers(3, 9))
        key = tuple(sorted(params.items()))
        _, spec, Hd = _catalog_entry(name, n, key)
        cut = int(rng.integers(1, n + 1))
        HL = _left_energy_operator(name, n, key, cut)
        v1, v2 = _frustration_state(rng, spec), _frustration_state(rng, spec)
        dE = max(_energy(Hd, v1), _energy(Hd, v2)) - spec.eps0
        dL = abs(_energy(HL, v1) - _energy(HL, v2))
        res.add(1 + dE - dL, model=f"{name}/n={n}", cut=cut, excess=dE)


# ---------------------------------------------------------------------------
# filters
# ---------------------------------------------------------------------------


FILTER_ZETAS = (0.5, 0.1, 0.01)


def _run_filter_exact(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    del rng, count
    worst_formula = 0.0
    for label, _H, spec, Hd in catalog((4, 6)):
        for zeta in FILTER_ZETAS:
            op = exact_agsp(Hd, spec.eps0, spec.gap, zeta)
            norms = np.linalg.norm(op.matrix @ spec.eigenvectors, axis=0)
            formula = gaussian_filter_values(spec.eigenvalues, spec.eps0, spec.gap, op.schedule.x)
            worst_formula = max(worst_formula, float(np.max(np.abs(norms - formula))))
            for j, val in enumerate(norms):
                slack = val - 19 / 20 if j < spec.g else zeta / 2 - val
                res.add(slack, model=label, zeta=zeta, index=j)
    res.details["max_formula_deviation"] = worst_formula
    if worst_formula > TOL:
        res.violations += 1


RENORM_ZETAS = (0.5, 0.1)
RENORM_BUDGET = 0.01
RENORM_MIN_GAP = 0.1


@cache
def _filters(name: str, n: int, key: tuple, zeta: float) -> tuple[np.ndarray, np.ndarray]:
    H, spec, Hd = _catalog_entry(name, n, key)
    A = exact_agsp(Hd, spec.eps0, spec.gap, zeta).matrix
    sched = make_schedule(zeta, spec.gap, n, "desk", budget=RENORM_BUDGET)
    K = mpo_to_dense(approx_agsp(H, spec.eps0, sched, propagator="exact", check_dense=False).mpo)
    return A, K


def _run_filter_renormalization(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    # The energy step for K assumes ||A - K|| far below zeta*eps/400; the desk
    # filter (error ~1e-3) meets that only for models with an O(1) gap.
    k_energy = 0
    max_error = 0.0
    for k in range(count):
        name, params = CATALOG[k % len(CATALOG)]
        n = (4, 6)[(k // len(CATALOG)) % 2]
        zeta = RENORM_ZETAS[(k // (2 * len(CATALOG))) % len(RENORM_ZETAS)]
        key = tuple(sorted(params.items()))
        _, spec, Hd = _catalog_entry(name, n, key)
        A, K = _filters(name, n, key, zeta)
        max_error = max(max_error, float(np.linalg.norm(A - K, 2)))
        gpart = spec.ground_vectors @ _unit(rng, spec.g)
        epart = _unit(rng, Hd.shape[0])
        epart -= spec.ground_vectors @ (spec.ground_vectors.conj().T @ epart)
        epart /= np.linalg.norm(epart)
        ov = rng.uniform(0.8, 1.0)
        u = ov * gpart + math.sqrt(1 - ov**2) * epart
        Au, Ku = A @ u, K @ u
        nA, nK = float(np.linalg.norm(Au)), float(np.linalg.norm(Ku))
        level = spec.eps0 + zeta * spec.gap / 400
        slacks = [nA - 0.2, nK - 0.1, (level - _energy(Hd, Au / nA)) / spec.gap]
        if spec.gap >= RENORM_MIN_GAP:
            slacks.append((level - _energy(Hd, Ku / nK)) / spec.gap)
            k_energy += 1
        res.add(min(slacks), model=f"{name}/n={n}", zeta=zeta, overlap=ov)
    res.details["k_energy_instances"] = k_energy
    res.details["max_filter_error"] = max_error


FILTER_BUDGET = 0.01
FILTER_BUDGET_ZETA = 0.1


def _run_filter_budget(res: SuiteResult, rng: np.random.Generator, count: int) -> None:
    del rng, count
    comps = {}
    for name, params, eps in (("ising", {}, None), ("tfi", {"h": 0.3}, 0.6)):
        H, spec, Hd = _catalog_entry(name, 4, tuple(sorted(params.items())))
        sched = make_schedule(FILTER_BUDGET_ZETA, eps or spec.gap, H.n, "desk", budget=FILTER_BUDGET)
        op = approx_agsp(H, spec.eps0, sched, propagator="trotter")
        diag = op.diagnostics
        measured = float(diag["measured_budget"])
        err = float(diag["measured_error"])
        comps[name] = {
            k: float(diag[k])
            for k in ("delta_T", "delta_D", "propagator_error", "compression_error", "measured_budget", "measured_error")
        }
        comps[name]["target"] = FILTER_BUDGET
        res.add(min(measured - err, FILTER_BUDGET - measured), model=f"{name}/n=4")
    res.details["components"] = comps


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


SUITES: tuple[Suite, ...] = (
    Suite(
        "interchangeability",
        "viability",
        "<v|H|v> <= e0 + D*eps implies ||Gv|| >= 1 - D; ||Gv|| >= 1 - d implies <v|H|v> <= e0 + 2dn",
        _run_interchangeability,
    ),
    Suite("overlap_triangle", "overlap", "|<v|v'>| >= 1 - 2(d + d')", _run_overlap_triangle),
    Suite("overlap_expectation", "overlap", "|<v|O|v> - <w|O|w>| <= 2 sqrt(2d) for ||O|| <= 1", _run_overlap_expectation),
    Suite("overlap_transfer", "overlap", "|<v|G>| <= w + sqrt(2d) when |<u|G>| <= w", _run_overlap_transfer),
    Suite("overlap_pairs", "overlap", "|<v1|v2>| <= w + sqrt(10d) when |<u1|u2>| <= w", _run_overlap_pairs),
    Suite(
        "orthogonalising",
        "programs",
        "orthogonalized energy <= e0 + dE (1 + b)/(1 - b), output orthogonal to 1e-9",
        _run_orthogonalising,
    ),
    Suite(
        "demixing",
        "programs",
        "Tr(sigma H) <= e0 + D eps/(2g+1), D <= 1/3g implies leading eigenvector energy <= e0 + D eps",
        _run_demixing,
    ),
    Suite(
        "boundary_contraction",
        "boundary",
        "Tr(s'H) <= Tr(s H_L) + <v|H_i + H_R|v> + ||Tr s - cont(v)||_1 (1 + ||H_R Pi_v|| - <v|H_R|v>)",
        _run_boundary,
    ),
    Suite("truncation", "truncation", "||(1-P_t)G|| <= ||(1-Q_t)G|| <= 99 2^(-t/99)", _run_truncation),
    Suite("eckart_young", "truncation", "truncate_at_cut maximizes overlap among rank-D states", _run_eckart_young),
    Suite("basis_overlap", "approximate_basis", "every unit v in span{v_i} has <v|G|v> >= 1 - d", _run_basis_overlap),
    Suite("basis_projection", "approximate_basis", "G v_i are linearly independent", _run_basis_projection),
    Suite("basis_fullness", "approximate_basis", "unit v' orthogonal to span{v_i} has <v'|G|v'> <= d", _run_basis_fullness),
    Suite("frustration", "frustration", "|<H_L>_1 - <H_L>_2| <= 1 + dE", _run_frustration),
    Suite("ground_half_energy", "frustration", "<G|H_L' + H_R'|G> <= 1 for ground vectors at every cut", _run_ground_half_energy),
    Suite(
        "filter_exact",
        "filter",
        "exact filter keeps ground norms >= 19/20 and shrinks excited norms to <= zeta/2",
        _run_filter_exact,
    ),
    Suite(
        "filter_renormalization",
        "filter",
        "ground overlap >= 4/5 gives ||Au|| >= 1/5, ||Ku|| >= 1/10 and filtered energy <= e0 + zeta eps/400",
        _run_filter_renormalization,
    ),
    Suite(
        "filter_budget",
        "filter",
        "||A - K|| <= measured budget <= configured budget (n=4, desk schedule)",
        _run_filter_budget,
    ),
)

SUITE_NAMES = tuple(s.name for s in SUITES)


def run_suite(name: str, seed: int = 0, instances: int = DEFAULT_INSTANCES) -> SuiteResult:
    """Run one registered suite.

    Raises
    ------
    KeyError
        If ``name`` is not registered.
    """
    index = SUITE_NAMES.index(name) if name in SUITE_NAMES else None
    if index is None:
        raise KeyError(f"unknown suite {name!r}; known: {', '.join(SUITE_NAMES)}")
    suite = SUITES[index]
    res = SuiteResult(suite.name, suite.group, suite.statement, TOL)
    rng = np.random.default_rng([seed, index])
    suite.run(res, rng, instances)
    return res


def run_suites(seed: int = 0, instances: int = DEFAULT_INSTANCES, names: Sequence[str] | None = None) -> dict[str, Any]:
    """Run the selected suites (all by default) and collect a report."""
    chosen = list(names) if names else list(SUITE_NAMES)
    results = [run_suite(name, seed, instances) for name in chosen]
    return {
        "seed": seed,
        "instances_requested": instances,
        "suites": [r.to_dict() for r in results],
        "groups": sorted({r.group for r in results}),
        "passed": all(r.passed for r in results),
    }


__all__ = [
    "SUITES",
    "SUITE_NAMES",
    "SuiteResult",
    "catalog",
    "run_suite",
    "run_suites",
]
