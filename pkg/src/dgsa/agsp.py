"""Approximate ground-space projectors.

The exact filter is the Gaussian ``A = exp[-x (H - e0')**2 / (2 eps**2)]``
with ``x = 33 - 8 ln(zeta)``. Its Fourier representation, discretized with
a left-endpoint rectangle rule and cut off at time ``T``, gives

    K = (2 eps tau / sqrt(2 pi x)) * sum_{j=0}^{ceil(T/tau)}
        exp[i e0' tau j - eps**2 tau**2 j**2 / (2 x)] U(tau j),

with ``U(t)`` an approximation of ``exp(-i H t)``. The stored operator is
the Hermitian part ``(K + K^dagger) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg as sla
from scipy.special import erfc

from .errors import BudgetExceededError
from .model import StandardHamiltonian
from .tensor_mps import (
    MPO,
    ZERO_TOL,
    OperatorSchmidt,
    mpo_add,
    mpo_compress,
    mpo_dagger,
    mpo_from_dense,
    mpo_identity,
    mpo_to_dense,
    operator_schmidt,
)

DENSE_CHECK_DIM = 2**10
ZETA_PRIME_DENOMINATOR = 240000.0


@dataclass(frozen=True)
class AgspSchedule:
    """Parameters of the discretized filter.

    ``T`` and ``tau`` are the values actually used. In ``"theory"`` mode
    they come from the operator-norm budget ``zeta_prime``; in ``"desk"``
    mode the same closed forms are evaluated with a user budget in place of
    ``zeta_prime`` and the theoretical values are kept alongside.

    Attributes
    ----------
    delta_T, delta_D : float
        Closed-form time-cutoff and discretization budgets
        ``exp(-eps**2 T**2 / 2x)`` and ``4 eps tau / sqrt(2 pi x)``.
    delta_T_exact : float
        The exact Gaussian tail mass ``erfc(eps T / sqrt(2x))``, which the
        closed form bounds from above.
    """

    zeta: float
    eps: float
    n: int
    x: float
    zeta_prime: float
    T: float
    tau: float
    delta_T: float
    delta_D: float
    delta_T_exact: float
    mode: str
    budget: float
    T_theory: float
    tau_theory: float
    bond_budget: int = 256

    @property
    def n_steps(self) -> int:
        """``ceil(T / tau)``; the sum has ``n_steps + 1`` terms."""
        if self.tau <= 0:
            return 0
        return int(math.ceil(self.T / self.tau - 1e-12))

    @property
    def n_steps_theory(self) -> float:
        return math.ceil(self.T_theory / self.tau_theory)

    @property
    def prefactor(self) -> float:
        return 2.0 * self.eps * self.tau / math.sqrt(2.0 * math.pi * self.x)

    def coefficients(self, e0p: float) -> np.ndarray:
        """Weights ``c_j`` of the propagators ``U(tau j)``."""
        j = np.arange(self.n_steps + 1, dtype=float)
        return self.prefactor * np.exp(1j * e0p * self.tau * j - (self.eps * self.tau * j) ** 2 / (2 * self.x))

    def report(self) -> dict[str, Any]:
        return {
            "zeta": self.zeta,
            "eps": self.eps,
            "n": self.n,
            "x": self.x,
            "zeta_prime": self.zeta_prime,
            "mode": self.mode,
            "budget": self.budget,
            "T": self.T,
            "tau": self.tau,
            "n_terms": self.n_steps + 1,
            "delta_T": self.delta_T,
            "delta_T_exact": self.delta_T_exact,
            "delta_D": self.delta_D,
            "T_theory": self.T_theory,
            "tau_theory": self.tau_theory,
            "n_terms_theory": float(self.n_steps_theory + 1),
            "bond_budget": self.bond_budget,
        }


def filter_width(zeta: float) -> float:
    """``x = 33 - 8 ln zeta``, chosen so that ``exp(-x/8) <= zeta/2``."""
    return 33.0 - 8.0 * math.log(zeta)


def _closed_forms(eps: float, x: float, budget: float) -> tuple[float, float]:
    T = math.sqrt(2 * x) / eps * math.sqrt(math.log(3.0 / budget))
    tau = budget * math.sqrt(2 * math.pi * x) / (12.0 * eps)
    return T, tau


def make_schedule(
    zeta: float,
    eps: float,
    n: int,
    mode: str = "theory",
    budget: float | None = None,
    bond_budget: int = 256,
    tau: float | None = None,
    T: float | None = None,
) -> AgspSchedule:
    """Build a filter schedule.

    Parameters
    ----------
    zeta : float
        Target shrinking factor scale, ``0 < zeta <= 1``.
    eps : float
        Spectral gap lower bound.
    n : int
        Chain length (enters only the theoretical budget).
    mode : {"theory", "desk"}
        In desk mode ``budget`` replaces the theoretical operator-norm
        budget when evaluating ``T`` and ``tau``.
    tau, T : float, optional
        Explicit overrides (recorded as used values).

    Raises
    ------
    ValueError
        If ``zeta`` is outside ``(0, 1]`` or ``eps <= 0``.
    """
    if not 0 < zeta <= 1:
        raise ValueError("zeta must lie in (0, 1]")
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = filter_width(zeta)
    zp = zeta * eps / (ZETA_PRIME_DENOMINATOR * n)
    T_th, tau_th = _closed_forms(eps, x, zp)
    if mode == "theory":
        used_budget = zp
        T_used, tau_used = T_th, tau_th
    elif mode == "desk":
        if budget is None or budget <= 0:
            raise ValueError("desk mode needs a positive budget")
        used_budget = float(budget)
        T_used, tau_used = _closed_forms(eps, x, used_budget)
    else:
        raise ValueError(f"unknown schedule mode {mode!r}")
    if tau is not None:
        tau_used = float(tau)
    if T is not None:
        T_used = float(T)
    delta_T = math.exp(-(eps**2) * T_used**2 / (2 * x))
    delta_D = 4 * eps * tau_used / math.sqrt(2 * math.pi * x)
    delta_T_exact = float(erfc(eps * T_used / math.sqrt(2 * x)))
    return AgspSchedule(
        zeta=zeta,
        eps=eps,
        n=n,
        x=x,
        zeta_prime=zp,
        T=T_used,
        tau=tau_used,
        delta_T=delta_T,
        delta_D=delta_D,
        delta_T_exact=delta_T_exact,
        mode=mode,
        budget=used_budget,
        T_theory=T_th,
        tau_theory=tau_th,
        bond_budget=bond_budget,
    )


@dataclass
class AgspOperator:
    """Exact (dense) or approximate (MPO) ground-space projector.

    Attributes
    ----------
    form : {"dense", "mpo"}
    matrix : ndarray or None
        The dense operator for the exact filter.
    mpo : MPO or None
        The Hermitized discretized filter.
    e0p : float
        Reference energy the filter is centred on.
    diagnostics : dict
        Budget components and measured errors.
    """

    form: str
    schedule: AgspSchedule
    e0p: float
    matrix: np.ndarray | None = None
    mpo: MPO | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)
    _splits: dict[tuple[int, float], OperatorSchmidt] = field(default_factory=dict, repr=False)

    def dense(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        return mpo_to_dense(self.mpo)

    def decompose(self, cut: int, rel_tol: float = ZERO_TOL) -> OperatorSchmidt:
        """Operator Schmidt decomposition ``sum_j A_j (x) B_j`` at ``cut`` (cached)."""
        if self.mpo is None:
            raise ValueError("only the MPO form can be decomposed")
        key = (cut, rel_tol)
        if key not in self._splits:
            self._splits[key] = operator_schmidt(self.mpo, cut, rel_tol)
        return self._splits[key]


def gaussian_filter_values(energies: np.ndarray, e0p: float, eps: float, x: float) -> np.ndarray:
    return np.exp(-x * (np.asarray(energies) - e0p) ** 2 / (2 * eps**2))


def exact_agsp(H_dense: np.ndarray, e0p: float, eps: float, zeta: float) -> AgspOperator:
    """The exact Gaussian filter as a dense matrix."""
    x = filter_width(zeta)
    vals, vecs = np.linalg.eigh(H_dense)
    f = gaussian_filter_values(vals, e0p, eps, x)
    A = (vecs * f[None, :]) @ vecs.conj().T
    sched = make_schedule(zeta, eps, max(1, int(round(math.log2(H_dense.shape[0])))))
    return AgspOperator(form="dense", schedule=sched, e0p=e0p, matrix=A)


# ---------------------------------------------------------------------------
# propagators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropagatorInfo:
    """Record of one propagator construction."""

    t: float
    trotter_steps: int
    bond_dims: tuple[int, ...]
    error: float
    truncation: float


def _two_site_gate(h: np.ndarray, dt: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-1j * dt * vals)[None, :]) @ vecs.conj().T


def _apply_gate(ts: list[np.ndarray], k: int, gate: np.ndarray, d: int, abs_tol: float, bond_cap: int) -> float:
    """Left-multiply sites ``k, k+1`` of an MPO by a two-site gate in place.

    Returns the Frobenius norm of the discarded singular values.
    """
    a, b = ts[k], ts[k + 1]
    la, rb = a.shape[0], b.shape[3]
    theta = np.einsum("lstm,mpqr->lsptqr", a, b)  # (l, s1, s2, t1, t2, r)
    g = gate.reshape(d, d, d, d)
    theta = np.einsum("uvsp,lsptqr->lutvqr", g, theta)  # (l, s1', t1, s2', t2, r)
    mat = theta.reshape(la * d * d, d * d * rb)
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    keep = _keep_by_abs(s, abs_tol, bond_cap)
    lost = float(np.sqrt(np.sum(s[keep:] ** 2)))
    ts[k] = u[:, :keep].reshape(la, d, d, keep)
    ts[k + 1] = (s[:keep, None] * vh[:keep]).reshape(keep, d, d, rb)
    return lost


def _keep_by_abs(s: np.ndarray, abs_tol: float, cap: int) -> int:
    tail = np.sqrt(np.cumsum((s**2)[::-1]))[::-1]  # tail[k] = ||s[k:]||
    ok = np.flatnonzero(tail <= abs_tol)
    keep = int(ok[0]) if ok.size else s.size
    keep = max(1, min(keep, cap))
    rank = max(1, int(np.sum(s > ZERO_TOL * max(s[0], 1e-300))))
    return min(keep, rank) if keep > rank else keep


def _trotter_step(ts: list[np.ndarray], gates_half: list, gates_full: list, d: int, abs_tol: float, cap: int) -> float:
    """One second-order step: even bonds dt/2, odd bonds dt, even bonds dt/2."""
    lost = 0.0
    n = len(ts)
    for k in range(0, n - 1, 2):
        lost += _apply_gate(ts, k, gates_half[k], d, abs_tol, cap)
    for k in range(1, n - 1, 2):
        lost += _apply_gate(ts, k, gates_full[k], d, abs_tol, cap)
    for k in range(0, n - 1, 2):
        lost += _apply_gate(ts, k, gates_half[k], d, abs_tol, cap)
    return lost


def _exact_propagator(H: StandardHamiltonian, t: float) -> np.ndarray:
    return sla.expm(-1j * t * H.dense())


class TrotterPropagator:
    """Incremental second-order Trotter propagator as an MPO.

    ``advance(dt_total, steps)`` multiplies the current operator by
    ``steps`` Trotter steps of size ``dt_total / steps``.
    """

    def __init__(self, H: StandardHamiltonian, abs_tol: float, bond_cap: int):
        self.H = H
        self.d = H.d
        self.abs_tol = abs_tol
        self.bond_cap = bond_cap
        self.ts = [t.copy() for t in mpo_identity(H.n, H.d).tensors]
        self.t = 0.0
        self.truncation = 0.0
        self._gate_cache: dict[float, tuple[list, list]] = {}

    def _gates(self, dt: float):
        if dt not in self._gate_cache:
            half = [_two_site_gate(h, dt / 2) for h in self.H.local_terms]
            full = [_two_site_gate(h, dt) for h in self.H.local_terms]
            self._gate_cache[dt] = (half, full)
        return self._gate_cache[dt]

    def advance(self, dt_total: float, steps: int) -> None:
        if self.H.n == 1 or dt_total == 0:
            self.t += dt_total
            return
        dt = dt_total / steps
        half, full = self._gates(dt)
        for _ in range(steps):
            self.truncation += _trotter_step(self.ts, half, full, self.d, self.abs_tol, self.bond_cap)
        self.t += dt_total

    def mpo(self) -> MPO:
        return MPO(tuple(t.copy() for t in self.ts))


def propagator_mpo(
    H: StandardHamiltonian,
    t: float,
    target_err: float,
    bond_cap: int = 256,
    max_steps: int = 4096,
) -> tuple[MPO, PropagatorInfo]:
    """Second-order Trotter MPO for ``exp(-i H t)`` with a certified error.

    The number of Trotter steps is doubled until the dense operator-norm
    error is at most ``target_err`` (dense certification needs
    ``d**n <= 2**10``; beyond that the Trotter error is not certified and
    reported as NaN).

    Raises
    ------
    BudgetExceededError
        If the target cannot be met within ``max_steps`` steps or the bond cap.
    """
    if t == 0:
        ident = mpo_identity(H.n, H.d)
        return ident, PropagatorInfo(0.0, 0, tuple(ident.bond_dims), 0.0, 0.0)
    dense_ok = H.d**H.n <= DENSE_CHECK_DIM
    exact = _exact_propagator(H, t) if dense_ok else None
    steps = max(1, int(math.ceil(abs(t) / 0.25)))
    best = math.inf
    while steps <= max_steps:
        prop = TrotterPropagator(H, abs_tol=target_err / (8.0 * 3 * H.n * steps), bond_cap=bond_cap)
        prop.advance(t, steps)
        op = prop.mpo()
        if exact is None:
            return op, PropagatorInfo(t, steps, tuple(op.bond_dims), float("nan"), prop.truncation)
        err = float(np.linalg.norm(mpo_to_dense(op) - exact, 2))
        best = min(best, err)
        if err <= target_err:
            return op, PropagatorInfo(t, steps, tuple(op.bond_dims), err, prop.truncation)
        steps *= 2
    raise BudgetExceededError(f"propagator for t={t} misses target {target_err:.1e}", best)


# ---------------------------------------------------------------------------
# the discretized filter
# ---------------------------------------------------------------------------


def filter_symbol(energies: np.ndarray, e0p: float, schedule: AgspSchedule, chunk: int = 1 << 22) -> np.ndarray:
    """Eigenvalues of the Hermitized discretized filter for exact propagators.

    For ``U(t) = exp(-iHt)`` the Hermitian part of the sum is the function
    ``sum_j |c_j| cos((E - e0') tau j)`` of ``H``; it is evaluated here in
    fixed ``j`` order, chunked to bound memory.
    """
    energies = np.asarray(energies, dtype=float)
    nt = schedule.n_steps + 1
    out = np.zeros_like(energies)
    step = max(1, chunk // max(1, energies.size))
    for start in range(0, nt, step):
        j = np.arange(start, min(nt, start + step), dtype=float)
        w = schedule.prefactor * np.exp(-((schedule.eps * schedule.tau * j) ** 2) / (2 * schedule.x))
        phase = np.cos(np.outer(energies - e0p, schedule.tau * j))
        out += phase @ w
    return out


def approx_agsp(
    H: StandardHamiltonian,
    e0p: float,
    schedule: AgspSchedule,
    propagator: str = "trotter",
    compress_tol: float = 1e-10,
    propagator_tol: float | None = None,
    check_dense: bool = True,
) -> AgspOperator:
    """Discretized Fourier filter as a Hermitized MPO.

    Parameters
    ----------
    propagator : {"trotter", "exact"}
        ``"trotter"`` builds every ``U(tau j)`` incrementally by Trotter
        steps with per-gate truncation and certifies each against the
        dense exponential. ``"exact"`` uses exact propagators through the
        dense eigendecomposition (desk scale only) and then compresses the
        summed operator into an MPO.
    compress_tol : float
        Relative singular-value cutoff for compressing the summed MPO; the
        resulting Frobenius error enters the measured budget.
    propagator_tol : float, optional
        Per-propagator error target for the Trotter route (default: the
        schedule budget divided by three).

    Notes
    -----
    The measured budget is ``delta_T + delta_D + sum_j |c_j| err_j +
    compression``, where ``err_j`` are the certified propagator errors.
    """
    n, d = H.n, H.d
    dense_ok = d**n <= DENSE_CHECK_DIM
    coeffs = schedule.coefficients(e0p)
    diag: dict[str, Any] = {"propagator": propagator, "n_terms": int(coeffs.size)}
    if propagator == "exact":
        if not dense_ok:
            raise ValueError("exact propagators are available only at desk scale")
        vals, vecs = np.linalg.eigh(H.dense())
        f = filter_symbol(vals, e0p, schedule)
        Kd = (vecs * f[None, :]) @ vecs.conj().T
        op = mpo_from_dense(Kd, n, d, rel_tol=compress_tol, hermitian=True)
        prop_err = 0.0
        comp_err = float(op.discarded)
        diag["symmetrization_change"] = None
        diag["max_propagator_bond"] = None
    elif propagator == "trotter":
        tol = schedule.budget / 3.0 if propagator_tol is None else propagator_tol
        op, prop_err, comp_err, sym_change, max_bond = _trotter_sum(H, coeffs, schedule, tol, compress_tol)
        diag["symmetrization_change"] = sym_change
        diag["max_propagator_bond"] = max_bond
    else:
        raise ValueError(f"unknown propagator route {propagator!r}")
    budget = schedule.delta_T + schedule.delta_D + prop_err + comp_err
    diag.update(
        {
            "delta_T": schedule.delta_T,
            "delta_D": schedule.delta_D,
            "propagator_error": prop_err,
            "compression_error": comp_err,
            "measured_budget": budget,
            "bond_dims": list(op.bond_dims),
        }
    )
    if check_dense and dense_ok:
        A = exact_agsp(H.dense(), e0p, schedule.eps, schedule.zeta).matrix
        diag["measured_error"] = float(np.linalg.norm(A - mpo_to_dense(op), 2))
    else:
        diag["measured_error"] = None
    return AgspOperator(form="mpo", schedule=schedule, e0p=e0p, mpo=op, diagnostics=diag)


def _trotter_sum(
    H: StandardHamiltonian, coeffs: np.ndarray, schedule: AgspSchedule, prop_tol: float, compress_tol: float
) -> tuple[MPO, float, float, float | None, int]:
    n, d = H.n, H.d
    dense_ok = d**n <= DENSE_CHECK_DIM
    tau = schedule.tau
    vals, vecs = (np.linalg.eigh(H.dense()) if dense_ok else (None, None))
    # Pick the Trotter step count per tau from the first propagator.
    steps = max(1, int(math.ceil(tau / 0.25)))
    abs_tol = prop_tol / (8.0 * 3 * n * max(1, steps) * max(1, coeffs.size))
    while True:
        trial = TrotterPropagator(H, abs_tol=abs_tol, bond_cap=schedule.bond_budget)
        trial.advance(tau, steps)
        if not dense_ok:
            break
        ex = (vecs * np.exp(-1j * tau * vals)[None, :]) @ vecs.conj().T
        # Error grows at most linearly in the number of steps taken.
        err1 = float(np.linalg.norm(mpo_to_dense(trial.mpo()) - ex, 2))
        if err1 * max(1, coeffs.size - 1) <= prop_tol or steps >= 1 << 14:
            break
        steps *= 2
    prop = TrotterPropagator(H, abs_tol=abs_tol, bond_cap=schedule.bond_budget)
    total = None
    weighted_err = 0.0
    comp_err = 0.0
    max_bond = 1
    for j, c in enumerate(coeffs):
        if j > 0:
            prop.advance(tau, steps)
        u = prop.mpo()
        max_bond = max(max_bond, u.max_bond)
        if dense_ok and j > 0:
            ex = (vecs * np.exp(-1j * tau * j * vals)[None, :]) @ vecs.conj().T
            err = float(np.linalg.norm(mpo_to_dense(u) - ex, 2))
        else:
            err = 0.0 if j == 0 else float(prop.truncation)
        if err > prop_tol:
            raise BudgetExceededError(f"propagator U({tau * j:.3g}) misses target {prop_tol:.1e}", err)
        weighted_err += abs(c) * err
        term = MPO(u.tensors)
        if total is None:
            total = mpo_add([term], [c])
        else:
            total = mpo_add([total, term], [1.0, c])
            before = total.discarded
            total = mpo_compress(total, compress_tol, hermitian=False)
            comp_err += total.discarded - before
            total = MPO(total.tensors)
    herm = mpo_add([total, mpo_dagger(total)], [0.5, 0.5])
    herm = mpo_compress(herm, compress_tol, hermitian=False)
    comp_err += herm.discarded
    sym_change = None
    if dense_ok:
        kd = mpo_to_dense(total)
        hd = mpo_to_dense(herm)
        sym_change = float(np.linalg.norm(kd - hd, 2))
        hd = (hd + hd.conj().T) / 2
        herm = mpo_from_dense(hd, n, d, rel_tol=ZERO_TOL, hermitian=True)
    else:
        herm = MPO(herm.tensors, hermitian=True, discarded=herm.discarded)
    return herm, weighted_err, comp_err, sym_change, max_bond


def shrink_report(op: AgspOperator, spec) -> dict[str, Any]:
    """Per-eigenvector norms ``||K E_j||`` and their summary."""
    K = op.dense()
    vecs = spec.eigenvectors
    norms = np.linalg.norm(K @ vecs, axis=0)
    g = spec.g
    return {
        "norms": [float(x) for x in norms],
        "min_ground_retention": float(norms[:g].min()),
        "max_excited_shrink": float(norms[g:].max()) if norms.size > g else 0.0,
    }
