"""End-to-end degenerate ground-space approximation and run reports.

The driver runs one pass per requested ground state. Pass ``h`` walks the
chain left to right with :func:`dgsa.viable.step`, recycling the left
Schmidt vectors of the states already found, finishes with
:func:`dgsa.viable.final_step`, and extracts the next state with the
ground-state program followed by demixing and orthogonalization. The
first pass is the nondegenerate algorithm (no previous states).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .agsp import AgspOperator, approx_agsp, make_schedule
from .errors import ConfigError, PreconditionError, SpanError, StageError
from .model import StandardHamiltonian, make_model, partition
from .oracle import Spectrum, diagonalize, projector_distance
from .properties import DEFAULT_INSTANCES, run_suites
from .sdp import (
    build_span,
    demix,
    leading_eigenvector,
    orthogonalize,
    solve_gsa_program,
)
from .tensor_mps import MPS, expectation, norm, scale_state, schmidt_decompose, to_dense
from .viable import (
    PassContext,
    PipelineConfig,
    ViableSet,
    f_of_g,
    final_step,
    initial_set,
    step,
    theory_constants,
)

log = logging.getLogger(__name__)

REPORT_DIGITS = 10


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """One run of the algorithm.

    Attributes
    ----------
    model : str
        Catalog model name.
    n : int
        Chain length.
    params : dict
        Model parameters.
    g : int
        Number of ground states to produce.
    eps : float or None
        Gap lower bound. With the oracle on and ``eps_from_oracle`` set, the
        measured gap replaces it (a mismatch above 10% is warned).
    eta : float
        Target projector error, ``0 < eta <= 1/3``.
    oracle : bool
        Enable the dense oracle (diagnostics, witness candidates, metrics).
    eps_from_oracle : bool
        Let the oracle's gap override ``eps``. Turn off for models whose
        lowest levels are split by much less than the gap to the band above.
    herald_threshold : float
        A state is flagged when its energy exceeds ``eps0 + threshold * eps``.
    overcount : bool
        Run one extra pass after the ``g`` requested ones.
    pipeline : PipelineConfig
    """

    model: str = "ising"
    n: int = 6
    params: Mapping[str, Any] = field(default_factory=dict)
    g: int = 2
    eps: float | None = None
    eta: float = 0.05
    seed: int = 0
    oracle: bool = True
    eps_from_oracle: bool = True
    herald_threshold: float = 0.5
    overcount: bool = False
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def __post_init__(self) -> None:
        if self.g < 1:
            raise ConfigError("g must be at least 1")
        if not 0 < self.eta <= 1.0 / 3.0:
            raise ConfigError("eta must lie in (0, 1/3]")
        if self.eps is not None and self.eps <= 0:
            raise ConfigError("eps must be positive")
        if self.eps is None and not self.oracle:
            raise ConfigError("eps is required when the oracle is off")
        if self.pipeline.net_mode not in ("candidates", "exhaustive"):
            raise ConfigError(f"unknown net mode {self.pipeline.net_mode!r}")

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["params"] = dict(self.params)
        out["pipeline"]["targets"] = dict(self.pipeline.targets)
        return out


def _pipeline_from(data: Mapping[str, Any]) -> PipelineConfig:
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown pipeline keys: {sorted(unknown)}")
    kw = dict(data)
    if "targets" in kw:
        kw["targets"] = tuple(sorted((str(k), float(v)) for k, v in dict(kw["targets"]).items()))
    return PipelineConfig(**kw)


def config_from_dict(data: Mapping[str, Any]) -> RunConfig:
    """Build a :class:`RunConfig` from parsed key-value data.

    The model may be given as a nested block ``model: {name, n, params}``
    or flat (``model``, ``n``, ``params``).

    Raises
    ------
    ConfigError
        On unknown keys or invalid values.
    """
    data = dict(data)
    model = data.pop("model", "ising")
    if isinstance(model, Mapping):
        data.setdefault("n", model.get("n", 6))
        data.setdefault("params", model.get("params", {}))
        model = model.get("name", "ising")
    pipeline = _pipeline_from(data.pop("pipeline", {}) or {})
    known = {f.name for f in fields(RunConfig)} - {"model", "pipeline"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "seed" in data:
        pipeline = replace(pipeline, seed=int(data["seed"]))
    return RunConfig(model=str(model), pipeline=pipeline, **data)


def load_config(path: str | Path) -> RunConfig:
    """Read a YAML run configuration."""
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    return config_from_dict(data)


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass
class GroundSpaceResult:
    """Output of :func:`degenerate_gsa`.

    Attributes
    ----------
    states : list of MPS
        The orthonormal approximate ground states.
    energies : list of float
        ``<gamma_j|H|gamma_j>`` in standardized units.
    orthonormality_residual : float
        ``max |<gamma_i|gamma_j> - delta_ij|``.
    metrics : dict
        Oracle comparisons (projector distances, overlaps) when enabled.
    stages : list of dict
        Per-stage diagnostic rows.
    herald : dict
        Energy excesses and which states are flagged as too high.
    report : dict
        The full machine-readable report.
    """

    states: list[MPS]
    energies: list[float]
    orthonormality_residual: float
    metrics: dict[str, Any]
    stages: list[dict[str, Any]]
    herald: dict[str, Any]
    report: dict[str, Any]

    def projector_dense(self) -> np.ndarray:
        """``Upsilon = sum_j |gamma_j><gamma_j|`` as a dense matrix."""
        V = np.stack([to_dense(s) for s in self.states], axis=1)
        return V @ V.conj().T


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------


def schmidt_vecs(i: int, states: Sequence[MPS]) -> list[MPS]:
    """Union of the left Schmidt vectors of ``states`` at cut ``i``.

    At ``i == n`` the (normalized) states themselves are returned.
    """
    out: list[MPS] = []
    for s in states:
        if i == s.length:
            out.append(scale_state(s, 1.0 / norm(s)))
            continue
        sd = schmidt_decompose(s, i)
        out.extend(v for v, c in zip(sd.left_vectors, sd.coefficients) if c > 1e-12)
    return out


def approx_ground_state(
    S_n: ViableSet,
    H: StandardHamiltonian,
    prev: Sequence[MPS],
    eps0: float,
    eps: float,
    eta: float,
    g: int,
    check_preconditions: bool = True,
) -> tuple[MPS, dict[str, Any]]:
    """Least-energy state of the final span, orthogonal to ``prev``.

    The ground-state program is solved on the span, the solution is
    demixed to a pure state and orthogonalized against ``prev``.

    Raises
    ------
    StageError
        If the program is infeasible or a demixing hypothesis fails while
        ``check_preconditions`` is set.
    """
    span = build_span(S_n.states, {"H": H.mpo})
    try:
        sol = solve_gsa_program(span, prev)
    except SpanError as exc:
        raise StageError(S_n.h, H.n, "final", f"ground-state program: {exc}") from exc
    if not sol.feasible:
        raise StageError(S_n.h, H.n, "final", "ground-state program infeasible")
    Hs = span.ops["H"]
    Delta = eta**2 / (4 * g)
    info: dict[str, Any] = {
        "span_rank": span.rank,
        "program_energy": sol.objective,
        "program_degeneracy": sol.info.get("degeneracy"),
        "demix_Delta": Delta,
        "demix_threshold": eps0 + Delta * eps / (2 * g + 1),
    }
    if check_preconditions:
        try:
            c = demix(sol, Hs, eps0, eps, Delta, g)
        except PreconditionError as exc:
            raise StageError(S_n.h, H.n, "final", f"demixing: {exc}") from exc
    else:
        c = leading_eigenvector(sol.sigma, Hs)
    v = span.to_mps(c)
    v = orthogonalize(v, prev)
    info["energy"] = expectation(v, H.mpo)
    return v, info


def _build_filters(
    H: StandardHamiltonian, e0p: float, eps: float, eta: float, g: int, cfg: PipelineConfig
) -> tuple[AgspOperator, AgspOperator]:
    sch = make_schedule(cfg.zeta_reduce, eps, H.n, "desk", budget=cfg.reduce_budget)
    K = approx_agsp(H, e0p, sch, propagator=cfg.propagator, compress_tol=cfg.filter_compress_tol, check_dense=False)
    zf = eta**2 / (4 * f_of_g(g))
    schf = make_schedule(zf, eps, H.n, "desk", budget=cfg.final_budget)
    Kf = approx_agsp(H, e0p, schf, propagator=cfg.propagator, compress_tol=cfg.filter_compress_tol, check_dense=False)
    return K, Kf




@dataclass
class _Run:
    """Shared state of the passes of one run."""

    H: StandardHamiltonian
    spec: Spectrum | None
    eps: float
    eta: float
    g: int
    cfg: PipelineConfig
    e0p: float = 0.0
    e0_source: str = ""
    K: AgspOperator | None = None
    K_final: AgspOperator | None = None
    stages: list[dict[str, Any]] = field(default_factory=list)
    passes: list[dict[str, Any]] = field(default_factory=list)

    def set_centre(self, e0p: float, source: str) -> None:
        self.e0p, self.e0_source = e0p, source
        self.K, self.K_final = _build_filters(self.H, e0p, self.eps, self.eta, self.g, self.cfg)

    def walk(self, h: int, prev: Sequence[MPS], enforce: bool, filters: bool = True) -> ViableSet:
        """Steps over cuts ``1 .. n-1`` and the final step of pass ``h``."""
        ctx = PassContext(
            self.H,
            self.eps,
            self.g,
            h,
            list(prev),
            self.cfg,
            K=self.K if filters else None,
            K_final=self.K_final if filters else None,
            spec=self.spec,
            enforce=enforce,
        )
        S = initial_set(h, self.H.d)
        try:
            for i in range(1, self.H.n):
                S = step(S, schmidt_vecs(i, prev), ctx)
            S = final_step(S, ctx)
        finally:
            if filters:
                self.stages.extend(ctx.rows)
        return S

    def run_pass(self, h: int, prev: Sequence[MPS], enforce: bool) -> MPS:
        S_n = self.walk(h, prev, enforce)
        eps0 = self.spec.eps0 if self.spec is not None else self.e0p
        v, info = approx_ground_state(S_n, self.H, prev, eps0, self.eps, self.eta, self.g, enforce)
        info.update({"h": h, "enforced": enforce, "final_set_size": S_n.size, "bond_dims": v.bond_dims})
        info["bond_bound"] = int(sum(s.max_bond for s in S_n.states))
        if self.spec is not None:
            V = self.spec.ground_vectors
            info["ground_overlap"] = float(np.linalg.norm(V.conj().T @ to_dense(v)))
        self.passes.append(info)
        return v


def _prepare(H: StandardHamiltonian, spec: Spectrum | None, eps: float, eta: float, g: int, cfg: PipelineConfig) -> _Run:
    run = _Run(H, spec, eps, eta, g, cfg)
    if spec is not None:
        run.set_centre(spec.eps0, "oracle")
    else:
        # Without an oracle the filter centre comes from a pass that only
        # trims and truncates.
        S_boot = run.walk(1, [], enforce=False, filters=False)
        v0, _ = approx_ground_state(S_boot, H, [], 0.0, eps, eta, g, check_preconditions=False)
        run.set_centre(expectation(v0, H.mpo), "bootstrap")
    return run


def nondegenerate_gsa(
    H: StandardHamiltonian,
    eps: float,
    eta: float,
    cfg: PipelineConfig,
    spec: Spectrum | None = None,
    g: int = 1,
) -> tuple[MPS, dict[str, Any]]:
    """The first pass: approximate one ground state with no previous states.

    Returns the state and the pass diagnostics (stage rows included).
    """
    run = _prepare(H, spec, eps, eta, g, cfg)
    v = run.run_pass(1, [], enforce=True)
    return v, {"pass": run.passes[0], "stages": run.stages, "e0p": run.e0p, "e0_source": run.e0_source}


def overcount_check(
    energies: Sequence[float], eps0: float, eps: float, threshold: float = 0.5, expected: int | None = None
) -> dict[str, Any]:
    """Flag states whose energy lies more than ``threshold * eps`` above ``eps0``.

    A flagged state heralds that more ground states were requested than
    the model has.
    """
    excess = [(e - eps0) / eps for e in energies]
    flagged = [j + 1 for j, x in enumerate(excess) if x >= threshold]
    return {
        "eps0": eps0,
        "eps": eps,
        "threshold": threshold,
        "excess": excess,
        "flagged": flagged,
        "fired": bool(flagged),
        "expected_count": expected,
    }


def _resolve_eps(config: RunConfig, spec: Spectrum | None, warnings: list[str]) -> tuple[float, str]:
    if spec is not None and config.eps_from_oracle:
        gap = spec.gap
        if config.eps is not None and abs(gap - config.eps) > 0.1 * config.eps:
            warnings.append(f"configured eps={config.eps} differs from the measured gap {gap:.6g} by more than 10%")
        return gap, "oracle"
    if config.eps is None:
        raise ConfigError("eps must be configured when the oracle gap is not used")
    if spec is not None and abs(spec.gap - config.eps) > 0.1 * config.eps:
        warnings.append(f"configured eps={config.eps} kept although the measured gap is {spec.gap:.6g}")
    return float(config.eps), "config"


def degenerate_gsa(config: RunConfig, timings: bool = False) -> GroundSpaceResult:
    """Run the whole algorithm for ``config.g`` ground states.

    Parameters
    ----------
    timings : bool
        Include wall-clock times in the report (they break byte-for-byte
        reproducibility, so they are off by default).

    Raises
    ------
    StageError
        If a stage misses its target or a program fails; the error names
        the pass, the cut and the stage.
    """
    H = make_model(config.model, config.n, config.params)
    cfg = config.pipeline
    warnings: list[str] = []
    spec = diagonalize(H) if config.oracle else None
    eps, eps_source = _resolve_eps(config, spec, warnings)
    g = config.g
    if spec is not None and spec.g < g:
        warnings.append(f"requested g={g} exceeds the oracle degeneracy {spec.g}; targets are not enforced past it")
    run = _prepare(H, spec, eps, config.eta, g, cfg)
    states: list[MPS] = []
    total = g + (1 if config.overcount else 0)
    for h in range(1, total + 1):
        enforce = h <= g and (spec is None or h <= spec.g)
        if h == 2 and spec is None:
            run.set_centre(expectation(states[0], H.mpo), "first-state energy")
        states.append(run.run_pass(h, states, enforce))
    main = states[:g]
    energies = [expectation(s, H.mpo) for s in states]
    V = np.stack([to_dense(s) for s in main], axis=1) if spec is not None else None
    from . import kernels

    ts = [s.tensors for s in main]
    gram = kernels.gram(ts, ts)
    ortho = float(np.abs(gram - np.eye(len(main))).max())
    metrics: dict[str, Any] = {}
    if spec is not None:
        U = V @ V.conj().T
        G = spec.G
        fro, tr = projector_distance(G, U)
        ident = float(np.trace(G).real + np.trace(U).real - 2 * np.trace(G @ U).real)
        metrics = {
            "frobenius_error": fro,
            "trace_error": tr,
            "trace_bound": math.sqrt(spec.g + g) * fro,
            "trace_bound_holds": bool(tr <= math.sqrt(spec.g + g) * fro + 1e-12),
            "identity_residual": abs(fro**2 - ident),
            "ground_overlaps": [float(np.linalg.norm(spec.ground_vectors.conj().T @ V[:, j])) for j in range(g)],
            "gram_rank": int(np.linalg.matrix_rank(gram, tol=1e-8)),
        }
    eps0_ref = spec.eps0 if spec is not None else energies[0]
    herald = overcount_check(energies, eps0_ref, eps, config.herald_threshold, g)
    stage_rows = [{k: v for k, v in r.items() if timings or k != "wall_ms"} for r in run.stages]
    report = {
        "config": config.to_dict(),
        "model": {
            "name": H.name,
            "n": H.n,
            "d": H.d,
            "params": dict(H.params),
            "scale": H.scale,
            "total_shift": H.total_shift,
        },
        "spectrum": None if spec is None else {k: v for k, v in spec.report().items() if k != "eigenvalues"}
        | {"lowest": [float(x) for x in spec.eigenvalues[: max(4, g + 2)]]},
        "eps": eps,
        "eps_source": eps_source,
        "filter_centre": run.e0p,
        "filter_centre_source": run.e0_source,
        "filters": {
            "reduce": {"schedule": run.K.schedule.report(), "diagnostics": run.K.diagnostics},
            "final": {"schedule": run.K_final.schedule.report(), "diagnostics": run.K_final.diagnostics},
        },
        "theory": theory_constants(eps, g, H.n),
        "states": [
            {
                "index": j + 1,
                "energy": energies[j],
                "energy_original_units": H.to_original_units(energies[j]),
                "bond_dims": list(states[j].bond_dims),
            }
            for j in range(len(states))
        ],
        "orthonormality_residual": ortho,
        "metrics": metrics,
        "herald": herald,
        "passes": run.passes,
        "stages": stage_rows,
        "warnings": warnings,
    }
    report = clean_report(report)
    return GroundSpaceResult(states, energies, ortho, metrics, stage_rows, herald, report)


def spectrum_report(config: RunConfig) -> dict[str, Any]:
    """Dense oracle export for ``config``'s model.

    Lists the full standardized spectrum, the degeneracy and gap, and the
    least eigenvalues of the left and right blocks at every cut.
    """
    H = make_model(config.model, config.n, config.params)
    spec = diagonalize(H)
    cuts = []
    for cut in range(1, H.n):
        part = partition(H, cut)
        cuts.append({"cut": cut, "eps_left": part.eps_left, "eps_right": part.eps_right})
    report = {
        "config": config.to_dict(),
        "model": {"name": H.name, "n": H.n, "d": H.d, "params": dict(H.params), "scale": H.scale, "total_shift": H.total_shift},
        "spectrum": spec.report(),
        "eigenvalues_original_units": [H.to_original_units(float(x)) for x in spec.eigenvalues],
        "cuts": cuts,
    }
    return clean_report(report)


def property_suite(config: RunConfig, instances: int = DEFAULT_INSTANCES, names: Sequence[str] | None = None) -> dict[str, Any]:
    """Run the randomized property suites seeded by ``config.seed``.

    Failures are data: each suite reports its instance count, violations
    and least slack, and ``passed`` is the conjunction over suites.
    """
    report = run_suites(seed=config.seed, instances=instances, names=names)
    report["config"] = config.to_dict()
    return clean_report(report)


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------


def clean_report(obj: Any) -> Any:
    """JSON-ready copy with floats rounded to ``REPORT_DIGITS`` significant digits.

    Rounding keeps reports byte-identical when the last bits of a linear
    algebra result differ between runs.
    """
    if isinstance(obj, Mapping):
        return {str(k): clean_report(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean_report(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean_report(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return str(x)
        if x == 0.0:
            return 0.0
        return float(f"{x:.{REPORT_DIGITS}g}")
    if isinstance(obj, complex):
        return {"re": clean_report(obj.real), "im": clean_report(obj.imag)}
    return obj


def dumps_report(report: Mapping[str, Any]) -> str:
    """Deterministic JSON text of a report."""
    return json.dumps(clean_report(report), sort_keys=True, indent=2) + "\n"


STAGE_COLUMNS = ("h", "i", "stage", "size", "max_bond", "measured_error")


def stages_csv(rows: Sequence[Mapping[str, Any]], timings: bool = False) -> str:
    """Flat comma-separated table of the stage rows."""
    cols = STAGE_COLUMNS + (("wall_ms",) if timings else ())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in clean_report([{c: r.get(c) for c in cols} for r in rows]):
        w.writerow(["" if r[c] is None else r[c] for c in cols])
    return buf.getvalue()


__all__ = [
    "GroundSpaceResult",
    "RunConfig",
    "approx_ground_state",
    "clean_report",
    "config_from_dict",
    "degenerate_gsa",
    "dumps_report",
    "load_config",
    "nondegenerate_gsa",
    "overcount_check",
    "property_suite",
    "schmidt_vecs",
    "spectrum_report",
    "stages_csv",
]
