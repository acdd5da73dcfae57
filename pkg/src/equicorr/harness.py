"""Replicated Monte Carlo experiments with deterministic parallel execution.

Every experiment is described by a frozen :class:`ExperimentConfig`, runs
replicate-level work on a worker pool (capped by the ``THREADS``
environment variable), and emits a flat list of :class:`CsvRow` records
that :func:`rows_to_csv` serialises with a fixed schema:

    experiment,n,rho,r,tau2_mode,tau2,p,theta,grid_param,replicate,value,stderr,reps,seed

The ``replicate`` column is an integer for raw per-replicate values,
``"agg"`` for aggregated estimates (which always carry ``stderr`` and
``reps``), and a named pseudo-replicate for closed-form reference rows
emitted next to the estimates they predict (``"asymptotic"`` for the
false-positive formulas, ``"limit_proof_chain"``/``"limit_statement"``
for the two shrinking-noise limit variants).  ``grid_param`` names the
axis being swept so a consumer knows which column varies.

Determinism contract: the random stream of a replicate is a pure function
of ``(master_seed, grid position, replicate index)`` -- never of worker
scheduling -- and aggregation is commutative, so a given config produces
byte-identical CSV at any worker count.  Trajectory experiments
(``ratio_convergence``, ``null_posterior_convergence``, ``info_growth``)
give each replicate a single stream spanning the whole ``n`` grid and
grow the observation vector incrementally, so a trajectory is the same
experiment continued to more channels rather than independent draws.

Memory stays bounded by one replicate's observation vector per worker;
nothing materialises a ``reps x n`` matrix.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .adaptive import (
    fpp_adaptive_asymptotic,
    fpp_type2_asymptotic,
    tau2_max_fpp,
    threshold_for_fpp,
    type2_mle_tau2,
)
from .asymptotics import (
    InfoGrowthSpec,
    fpp_fixed_tau_asymptotic,
    info_growth_limit,
)
from .bayes import decide, posterior, posterior_asymptotic
from .errors import BoundaryFitWarning, InvalidInputError
from .model import ModelSpec, PriorSpec, TruthScenario, substream

__all__ = [
    "EXPERIMENTS",
    "TAU_MODES",
    "ExperimentConfig",
    "FppEstimate",
    "CsvRow",
    "config_from_text",
    "config_from_file",
    "resolve_workers",
    "run_experiment",
    "run_fpp",
    "run_power_curve",
    "run_ratio_convergence",
    "run_null_posterior_convergence",
    "run_tau_sweep",
    "run_threshold_curve",
    "run_info_growth",
    "rows_to_csv",
    "write_csv",
]

EXPERIMENTS = (
    "fpp",
    "power_curve",
    "ratio_convergence",
    "null_posterior_convergence",
    "tau_sweep",
    "threshold_curve",
    "info_growth",
)

TAU_MODES = ("fixed", "adaptive_max_fpp", "type2_mle")

# Which config axis each experiment sweeps (the CSV grid_param column).
_GRID_AXIS = {
    "fpp": "n",
    "power_curve": "theta",
    "ratio_convergence": "n",
    "null_posterior_convergence": "n",
    "tau_sweep": "tau2",
    "threshold_curve": "n",
    "info_growth": "n",
}

_CSV_HEADER = (
    "experiment,n,rho,r,tau2_mode,tau2,p,theta,"
    "grid_param,replicate,value,stderr,reps,seed"
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete, self-contained description of one experiment run.

    ``grid`` is the swept axis -- ``n`` values, ``theta`` values, or
    ``tau2`` values depending on the experiment (see the config-file keys
    in :func:`config_from_text`).  ``rho`` may hold several correlation
    levels for the convergence experiments ("per rho" trajectories); the
    per-grid-point experiments require exactly one.
    """

    experiment: str
    rho: tuple[float, ...]
    r: float
    grid: tuple[float, ...]
    reps: int
    master_seed: int
    threshold_p: float | None = None
    tau_mode: str = "fixed"
    tau2: float | None = None
    n_channels: int | None = None  # fixed model size (power_curve, tau_sweep)
    truth_index: int = 0           # info_growth truth (0 = null)
    theta: float = 0.0             # info_growth signal amplitude
    d_regime: str | None = None    # info_growth noise schedule
    d: float | None = None         # info_growth finite-regime limit
    target_fpp: float | None = None  # threshold_curve target

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise InvalidInputError(
                f"unknown experiment {self.experiment!r}; "
                f"expected one of {', '.join(EXPERIMENTS)}"
            )
        if self.tau_mode not in TAU_MODES:
            raise InvalidInputError(
                f"unknown tau2_mode {self.tau_mode!r}; "
                f"expected one of {', '.join(TAU_MODES)}"
            )
        if not self.grid:
            raise InvalidInputError("grid must be non-empty")
        if self.reps < 1:
            raise InvalidInputError(f"reps must be >= 1, got {self.reps}")
        if not (0 <= self.master_seed < 2**63):
            raise InvalidInputError("master_seed must fit in 63 bits")
        if not self.rho:
            raise InvalidInputError("at least one rho value is required")
        for rho in self.rho:
            if not (np.isfinite(rho) and 0.0 <= rho < 1.0):
                raise InvalidInputError(f"rho must lie in [0, 1), got {rho!r}")
        if not (np.isfinite(self.r) and 0.0 < self.r < 1.0):
            raise InvalidInputError(f"r must lie in (0, 1), got {self.r!r}")
        if self.tau_mode == "fixed" and self.experiment != "threshold_curve":
            if self.tau2 is None or not (np.isfinite(self.tau2) and self.tau2 >= 0):
                if self.experiment != "tau_sweep":
                    raise InvalidInputError(
                        "tau2_mode 'fixed' requires a tau2 value"
                    )
        axis = _GRID_AXIS[self.experiment]
        if axis == "n":
            for v in self.grid:
                if v != int(v) or int(v) < 2:
                    raise InvalidInputError(
                        f"n grid values must be integers >= 2, got {v!r}"
                    )
            if list(self.grid) != sorted(self.grid):
                raise InvalidInputError("n grid must be ascending")
        if self.experiment in ("power_curve", "tau_sweep"):
            if self.n_channels is None or self.n_channels < 2:
                raise InvalidInputError(
                    f"experiment {self.experiment!r} requires n (>= 2 channels)"
                )
        if self.experiment in ("fpp", "power_curve") and len(self.rho) != 1:
            raise InvalidInputError(
                f"experiment {self.experiment!r} takes exactly one rho"
            )
        if self.experiment == "info_growth":
            if self.d_regime not in ("d_to_zero", "d_finite", "d_to_infinity"):
                raise InvalidInputError(
                    "info_growth requires d_regime in "
                    "{d_to_zero, d_finite, d_to_infinity}"
                )
            if self.d_regime == "d_finite" and (
                self.d is None or not (np.isfinite(self.d) and self.d > 0)
            ):
                raise InvalidInputError("d_regime 'd_finite' requires d > 0")
            if self.truth_index < 0:
                raise InvalidInputError("truth must be >= 0")
            if self.truth_index > 0 and self.theta == 0.0:
                raise InvalidInputError(
                    "a signal truth in info_growth requires a nonzero theta"
                )
            if self.tau_mode != "fixed":
                raise InvalidInputError(
                    "info_growth supports only tau2_mode 'fixed'"
                )
        if self.experiment == "threshold_curve":
            if self.target_fpp is None or not (
                np.isfinite(self.target_fpp) and self.target_fpp > 0
            ):
                raise InvalidInputError(
                    "threshold_curve requires a positive target_fpp"
                )
        elif self.threshold_p is None or not (
            np.isfinite(self.threshold_p) and 0.0 < self.threshold_p < 1.0
        ):
            raise InvalidInputError(
                f"experiment {self.experiment!r} requires p in (0, 1)"
            )

    def summary(self) -> str:
        """One-line config echo for result records."""
        parts = [f"experiment={self.experiment}"]
        for f in fields(self):
            if f.name == "experiment":
                continue
            v = getattr(self, f.name)
            if v is None or v == () or (f.name == "theta" and v == 0.0):
                continue
            parts.append(f"{f.name}={v}")
        return " ".join(parts)


@dataclass(frozen=True)
class FppEstimate:
    """A simulated false-positive (or acceptance) probability.

    ``stderr`` is the binomial standard error
    ``sqrt(estimate (1 - estimate) / reps)``.
    """

    estimate: float
    stderr: float
    reps: int
    config_echo: str

    def __post_init__(self) -> None:
        expected = math.sqrt(self.estimate * (1.0 - self.estimate) / self.reps)
        if abs(self.stderr - expected) > 1e-12:
            raise InvalidInputError(
                f"stderr {self.stderr!r} is not the binomial standard error "
                f"of {self.estimate!r} at reps={self.reps}"
            )


@dataclass(frozen=True)
class CsvRow:
    """One output record; field order matches the CSV schema."""

    experiment: str
    n: int
    rho: float
    r: float
    tau2_mode: str
    tau2: float
    p: float
    theta: float
    grid_param: str
    replicate: str
    value: float
    stderr: float
    reps: int
    seed: int


# --------------------------------------------------------------------------
# Config-file parsing: flat "key = value" lines, '#' comments, repeated keys
# forming grids.
# --------------------------------------------------------------------------

_GRID_KEYS = {"n", "rho", "theta", "tau2"}
_KNOWN_KEYS = {
    "experiment", "n", "rho", "r", "p", "tau2", "tau2_mode", "theta",
    "truth", "d_regime", "d", "target_fpp", "reps", "seed",
}


def config_from_text(text: str) -> ExperimentConfig:
    """Parse a flat key = value experiment description.

    Lines are ``key = value`` with ``#`` starting a comment; blank lines
    are skipped.  Repeating a grid key (``n``, ``theta``, ``tau2``,
    ``rho``) builds that grid in file order.  Unknown keys and malformed
    lines are rejected with their line number.
    """
    values: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(
                f"config line {lineno}: expected 'key = value', got {raw!r}"
            )
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _KNOWN_KEYS:
            raise InvalidInputError(f"config line {lineno}: unknown key {key!r}")
        if not val:
            raise InvalidInputError(f"config line {lineno}: empty value for {key!r}")
        if key in values and key not in _GRID_KEYS:
            raise InvalidInputError(
                f"config line {lineno}: key {key!r} given more than once"
            )
        values.setdefault(key, []).append(val)
    return config_from_mapping(values)


def config_from_mapping(values: dict[str, list[str]]) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from parsed key/value lists."""

    def one(key: str) -> str | None:
        got = values.get(key)
        return got[-1] if got else None

    def parse_float(key: str, s: str) -> float:
        try:
            return float(s)
        except ValueError:
            raise InvalidInputError(f"config key {key!r}: not a number: {s!r}")

    def parse_int(key: str, s: str) -> int:
        try:
            return int(s)
        except ValueError:
            raise InvalidInputError(f"config key {key!r}: not an integer: {s!r}")

    experiment = one("experiment")
    if experiment is None:
        raise InvalidInputError("config is missing the 'experiment' key")
    if experiment not in EXPERIMENTS:
        raise InvalidInputError(
            f"unknown experiment {experiment!r}; "
            f"expected one of {', '.join(EXPERIMENTS)}"
        )
    axis = _GRID_AXIS[experiment]

    n_values = [parse_int("n", s) for s in values.get("n", [])]
    theta_values = [parse_float("theta", s) for s in values.get("theta", [])]
    tau2_values = [parse_float("tau2", s) for s in values.get("tau2", [])]
    rho_values = [parse_float("rho", s) for s in values.get("rho", [])]

    if axis == "n":
        grid = tuple(float(v) for v in n_values)
        n_channels = None
    elif axis == "theta":
        grid = tuple(theta_values)
        n_channels = n_values[0] if n_values else None
        if len(n_values) > 1:
            raise InvalidInputError(
                f"experiment {experiment!r} takes a single n, got {n_values}"
            )
    else:  # tau2 axis
        grid = tuple(tau2_values)
        n_channels = n_values[0] if n_values else None
        if len(n_values) > 1:
            raise InvalidInputError(
                f"experiment {experiment!r} takes a single n, got {n_values}"
            )
    if not grid:
        raise InvalidInputError(
            f"experiment {experiment!r} needs at least one {axis!r} value"
        )

    tau2: float | None
    if axis == "tau2":
        tau2 = None  # swept; per-point values come from the grid
    else:
        tau2 = parse_float("tau2", one("tau2")) if one("tau2") else None
    if len(tau2_values) > 1 and axis != "tau2":
        raise InvalidInputError(
            f"experiment {experiment!r} takes a single tau2, got {tau2_values}"
        )

    theta = 0.0
    if experiment == "info_growth" and theta_values:
        if len(theta_values) > 1:
            raise InvalidInputError(
                "info_growth takes a single theta, got "
                f"{theta_values}"
            )
        theta = theta_values[0]

    r = one("r")
    if r is None:
        raise InvalidInputError("config is missing the 'r' key")

    return ExperimentConfig(
        experiment=experiment,
        rho=tuple(rho_values) if rho_values else (0.0,),
        r=parse_float("r", r),
        grid=grid,
        reps=parse_int("reps", one("reps") or "1"),
        master_seed=parse_int("seed", one("seed") or "0"),
        threshold_p=parse_float("p", one("p")) if one("p") else None,
        tau_mode=one("tau2_mode") or "fixed",
        tau2=tau2,
        n_channels=n_channels,
        truth_index=parse_int("truth", one("truth") or "0"),
        theta=theta,
        d_regime=one("d_regime"),
        d=parse_float("d", one("d")) if one("d") else None,
        target_fpp=(
            parse_float("target_fpp", one("target_fpp"))
            if one("target_fpp") else None
        ),
    )


def config_from_file(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_text(fh.read())


# --------------------------------------------------------------------------
# Worker-pool plumbing.
# --------------------------------------------------------------------------


def resolve_workers(requested: int | None = None) -> int:
    """Worker count: explicit request, else $THREADS, else the CPUs we own."""
    if requested is not None:
        if requested < 1:
            raise InvalidInputError(f"workers must be >= 1, got {requested}")
        return requested
    env = os.environ.get("THREADS")
    if env is not None:
        try:
            w = int(env)
        except ValueError:
            raise InvalidInputError(f"THREADS must be an integer, got {env!r}")
        if w < 1:
            raise InvalidInputError(f"THREADS must be >= 1, got {w}")
        return w
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover - non-Linux fallback
        return os.cpu_count() or 1


def _stream_index(outer: int, rep: int) -> int:
    # One Philox key per (grid position, replicate); the packing keeps the
    # replicate streams stable when reps changes.
    if rep >= 2**40 or outer >= 2**23:
        raise InvalidInputError("grid or replicate index out of range")
    return (outer << 40) | rep


def _chunks(reps: int, pieces: int) -> list[tuple[int, int]]:
    size = max(1, math.ceil(reps / pieces))
    return [(lo, min(lo + size, reps)) for lo in range(0, reps, size)]


def _map_tasks(worker, tasks, workers: int):
    """Run tasks (picklable argument tuples) preserving task order."""
    if workers == 1 or len(tasks) == 1:
        return [worker(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        futures = [pool.submit(worker, *t) for t in tasks]
        return [f.result() for f in futures]


def _null_sample(spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    # Local O(n) null sampler: common shock + idiosyncratic parts.
    shock = math.sqrt(spec.rho) * rng.standard_normal()
    return shock + math.sqrt(1.0 - spec.rho) * rng.standard_normal(spec.n_channels)


def _binomial_stderr(k: int, reps: int) -> float:
    est = k / reps
    return math.sqrt(est * (1.0 - est) / reps)


# --------------------------------------------------------------------------
# Counting experiments: fpp and power_curve.
# --------------------------------------------------------------------------


def _count_chunk(
    cfg: ExperimentConfig, outer: int, grid_value: float,
    rep_lo: int, rep_hi: int,
) -> int:
    rho = cfg.rho[0]
    if cfg.experiment == "fpp":
        n = int(grid_value)
        truth = TruthScenario()
        theta = 0.0
    else:  # power_curve
        n = int(cfg.n_channels)
        theta = float(grid_value)
        truth = TruthScenario(model_index=1, theta=theta)
    spec = ModelSpec(n_channels=n, rho=rho)

    fixed_prior: PriorSpec | None = None
    if cfg.tau_mode == "fixed":
        fixed_prior = PriorSpec(tau2=cfg.tau2, r=cfg.r)
    elif cfg.tau_mode == "adaptive_max_fpp":
        fixed_prior = PriorSpec(
            tau2=tau2_max_fpp(n, rho, cfg.threshold_p, cfg.r), r=cfg.r
        )

    count = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryFitWarning)
        for rep in range(rep_lo, rep_hi):
            rng = substream(cfg.master_seed, _stream_index(outer, rep))
            x = _null_sample(spec, rng)
            if truth.model_index >= 1:
                x[truth.model_index - 1] += truth.theta
            if fixed_prior is not None:
                prior = fixed_prior
            else:
                prior = PriorSpec(tau2=type2_mle_tau2(x, spec), r=cfg.r)
            dec = decide(posterior(x, spec, prior), cfg.threshold_p)
            if cfg.experiment == "fpp":
                count += dec.is_signal_claim
            else:
                count += dec.accepted == truth.model_index
    return count


def _fpp_reference(cfg: ExperimentConfig, n: int, rho: float) -> float:
    if cfg.tau_mode == "fixed":
        return fpp_fixed_tau_asymptotic(n, rho, cfg.tau2, cfg.threshold_p, cfg.r)
    if cfg.tau_mode == "adaptive_max_fpp":
        return fpp_adaptive_asymptotic(n, cfg.threshold_p, cfg.r)
    return fpp_type2_asymptotic(cfg.threshold_p, cfg.r, n)


def _effective_tau2(cfg: ExperimentConfig, n: int, rho: float) -> float:
    """tau2 column value for a grid point; nan when data-dependent."""
    if cfg.tau_mode == "fixed":
        return float(cfg.tau2)
    if cfg.tau_mode == "adaptive_max_fpp":
        return tau2_max_fpp(n, rho, cfg.threshold_p, cfg.r)
    return float("nan")


def _run_counting(cfg: ExperimentConfig, workers: int) -> list[CsvRow]:
    rho = cfg.rho[0]
    rows: list[CsvRow] = []
    axis = _GRID_AXIS[cfg.experiment]
    for gi, gv in enumerate(cfg.grid):
        tasks = [
            (cfg, gi, gv, lo, hi)
            for lo, hi in _chunks(cfg.reps, workers * 8)
        ]
        count = sum(_map_tasks(_count_chunk, tasks, workers))
        est = count / cfg.reps
        if cfg.experiment == "fpp":
            n, theta = int(gv), 0.0
        else:
            n, theta = int(cfg.n_channels), float(gv)
        common = dict(
            experiment=cfg.experiment, n=n, rho=rho, r=cfg.r,
            tau2_mode=cfg.tau_mode, tau2=_effective_tau2(cfg, n, rho),
            p=cfg.threshold_p, theta=theta, grid_param=axis,
            seed=cfg.master_seed,
        )
        rows.append(CsvRow(
            replicate="agg", value=est,
            stderr=_binomial_stderr(count, cfg.reps), reps=cfg.reps, **common,
        ))
        if cfg.experiment == "fpp":
            rows.append(CsvRow(
                replicate="asymptotic", value=_fpp_reference(cfg, n, rho),
                stderr=0.0, reps=0, **common,
            ))
    return rows


# --------------------------------------------------------------------------
# Trajectory experiments: shared incremental sampler.
# --------------------------------------------------------------------------


def _trajectory_chunk(
    cfg: ExperimentConfig, rho_index: int, rep_lo: int, rep_hi: int
) -> list[tuple[int, int, float, float]]:
    """Per-replicate trajectory values.

    Returns tuples ``(rep, grid_index, value, effective_tau2)``.  One
    random stream per replicate spans the whole grid: the common shock is
    drawn once and idiosyncratic noise is extended as ``n`` grows, so each
    trajectory is a single experiment observed at increasing size.
    """
    rho = cfg.rho[rho_index]
    out: list[tuple[int, int, float, float]] = []
    n_grid = [int(v) for v in cfg.grid] if _GRID_AXIS[cfg.experiment] == "n" else []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryFitWarning)
        for rep in range(rep_lo, rep_hi):
            rng = substream(cfg.master_seed, _stream_index(rho_index, rep))
            if cfg.experiment == "tau_sweep":
                n = int(cfg.n_channels)
                spec = ModelSpec(n_channels=n, rho=rho)
                x = _null_sample(spec, rng)
                exact = posterior  # alias for symmetry with below
                for gi, tau2 in enumerate(cfg.grid):
                    prior = PriorSpec(tau2=float(tau2), r=cfg.r)
                    num = posterior_asymptotic(x, spec, prior).probs[1]
                    den = exact(x, spec, prior).probs[1]
                    out.append((rep, gi, float(num / den), float(tau2)))
                continue

            shock = math.sqrt(rho) * rng.standard_normal()
            idio = np.empty(0)
            for gi, n in enumerate(n_grid):
                grown = rng.standard_normal(n - idio.shape[0])
                idio = np.concatenate([idio, grown])
                spec = ModelSpec(n_channels=n, rho=rho)
                x = shock + math.sqrt(1.0 - rho) * idio

                if cfg.experiment == "ratio_convergence":
                    prior = _trajectory_prior(cfg, spec, x)
                    num = posterior_asymptotic(x, spec, prior).probs[1]
                    den = posterior(x, spec, prior).probs[1]
                    out.append((rep, gi, float(num / den), prior.tau2))
                elif cfg.experiment == "null_posterior_convergence":
                    prior = _trajectory_prior(cfg, spec, x)
                    value = posterior(x, spec, prior).null_prob
                    out.append((rep, gi, float(value), prior.tau2))
                else:  # info_growth
                    d_n = _d_schedule(cfg, n)
                    sigma2 = d_n / math.log(n)
                    y = x.copy()
                    if cfg.truth_index >= 1:
                        y[cfg.truth_index - 1] += cfg.theta / math.sqrt(sigma2)
                    tau2_eff = cfg.tau2 / sigma2
                    prior = PriorSpec(tau2=tau2_eff, r=cfg.r)
                    value = posterior(y, spec, prior).probs[cfg.truth_index]
                    out.append((rep, gi, float(value), tau2_eff))
    return out


def _trajectory_prior(
    cfg: ExperimentConfig, spec: ModelSpec, x: np.ndarray
) -> PriorSpec:
    if cfg.tau_mode == "fixed":
        return PriorSpec(tau2=cfg.tau2, r=cfg.r)
    if cfg.tau_mode == "adaptive_max_fpp":
        return PriorSpec(
            tau2=tau2_max_fpp(spec.n_channels, spec.rho, cfg.threshold_p, cfg.r),
            r=cfg.r,
        )
    return PriorSpec(tau2=type2_mle_tau2(x, spec), r=cfg.r)


def _d_schedule(cfg: ExperimentConfig, n: int) -> float:
    """The noise-scale numerator d_n for each shrinking-noise regime."""
    if cfg.d_regime == "d_to_zero":
        return 1.0 / math.log(math.log(n))
    if cfg.d_regime == "d_finite":
        return float(cfg.d)
    return math.sqrt(math.log(n))  # d_to_infinity, still o(log n)


def _run_trajectories(cfg: ExperimentConfig, workers: int) -> list[CsvRow]:
    axis = _GRID_AXIS[cfg.experiment]
    rows: list[CsvRow] = []
    for rho_index, rho in enumerate(cfg.rho):
        tasks = [
            (cfg, rho_index, lo, hi)
            for lo, hi in _chunks(cfg.reps, workers * 4)
        ]
        results = [t for chunk in _map_tasks(_trajectory_chunk, tasks, workers)
                   for t in chunk]
        # (rep, grid) -> value; deterministic grouping by grid then replicate.
        by_grid: dict[int, list[tuple[int, float, float]]] = {}
        for rep, gi, value, tau2_eff in results:
            by_grid.setdefault(gi, []).append((rep, value, tau2_eff))
        for gi, gv in enumerate(cfg.grid):
            entries = sorted(by_grid.get(gi, []))
            if axis == "n":
                n = int(gv)
                tau2_col = None  # varies per replicate only for type2_mle
            else:
                n = int(cfg.n_channels)
                tau2_col = float(gv)
            common = dict(
                experiment=cfg.experiment, n=n, rho=rho, r=cfg.r,
                tau2_mode=cfg.tau_mode, p=cfg.threshold_p, theta=cfg.theta,
                grid_param=axis, seed=cfg.master_seed,
            )
            values = np.array([v for _, v, _ in entries])
            tau2s = np.array([t for _, _, t in entries])
            same_tau2 = tau2_col if tau2_col is not None else (
                float(tau2s[0]) if np.all(tau2s == tau2s[0]) else float("nan")
            )
            for rep, value, tau2_eff in entries:
                rows.append(CsvRow(
                    replicate=str(rep), value=value, stderr=0.0, reps=1,
                    tau2=tau2_eff if tau2_col is None else tau2_col, **common,
                ))
            mean = float(values.mean())
            stderr = float(values.std(ddof=1) / math.sqrt(len(values))) \
                if len(values) > 1 else 0.0
            rows.append(CsvRow(
                replicate="agg", value=mean, stderr=stderr, reps=len(values),
                tau2=same_tau2, **common,
            ))
            if cfg.experiment == "info_growth":
                igs = InfoGrowthSpec(regime=cfg.d_regime, d=cfg.d)
                spec = ModelSpec(n_channels=n, rho=rho)
                prior = PriorSpec(tau2=cfg.tau2, r=cfg.r)
                truth = TruthScenario(
                    model_index=cfg.truth_index,
                    theta=cfg.theta if cfg.truth_index else 0.0,
                )
                for form in ("proof_chain", "statement"):
                    lim = info_growth_limit(igs, spec, prior, truth, form=form)
                    rows.append(CsvRow(
                        replicate=f"limit_{form}",
                        value=lim.value if lim.value is not None else float("nan"),
                        stderr=0.0, reps=0, tau2=float("nan"), **common,
                    ))
    return rows


# --------------------------------------------------------------------------
# Deterministic curve: threshold_curve.
# --------------------------------------------------------------------------


def _run_threshold_curve(cfg: ExperimentConfig) -> list[CsvRow]:
    rows = []
    for rho in cfg.rho:
        for gv in cfg.grid:
            n = int(gv)
            p_n = threshold_for_fpp(cfg.target_fpp, cfg.r, n)
            rows.append(CsvRow(
                experiment=cfg.experiment, n=n, rho=rho, r=cfg.r,
                tau2_mode="adaptive_max_fpp", tau2=float("nan"),
                p=float("nan"), theta=0.0, grid_param="n",
                replicate="agg", value=p_n, stderr=0.0, reps=0,
                seed=cfg.master_seed,
            ))
    return rows


# --------------------------------------------------------------------------
# Dispatch and serialisation.
# --------------------------------------------------------------------------


def run_experiment(
    cfg: ExperimentConfig, *, workers: int | None = None
) -> list[CsvRow]:
    """Run any configured experiment; returns rows in deterministic order."""
    w = resolve_workers(workers)
    if cfg.experiment in ("fpp", "power_curve"):
        return _run_counting(cfg, w)
    if cfg.experiment == "threshold_curve":
        return _run_threshold_curve(cfg)
    return _run_trajectories(cfg, w)


def _require(cfg: ExperimentConfig, experiment: str) -> None:
    if cfg.experiment != experiment:
        raise InvalidInputError(
            f"config is for {cfg.experiment!r}, expected {experiment!r}"
        )


def run_fpp(
    cfg: ExperimentConfig, *, workers: int | None = None
) -> list[FppEstimate]:
    """Null false-positive probability per grid point (plus CSV rows via
    :func:`run_experiment`, which this wraps)."""
    _require(cfg, "fpp")
    rows = run_experiment(cfg, workers=workers)
    return [
        FppEstimate(
            estimate=row.value, stderr=row.stderr, reps=row.reps,
            config_echo=f"{cfg.summary()} n={row.n}",
        )
        for row in rows if row.replicate == "agg"
    ]


def run_power_curve(
    cfg: ExperimentConfig, *, workers: int | None = None
) -> list[CsvRow]:
    _require(cfg, "power_curve")
    return run_experiment(cfg, workers=workers)


def run_ratio_convergence(
    cfg: ExperimentConfig, *, workers: int | None = None
) -> list[CsvRow]:
    _require(cfg, "ratio_convergence")
    return run_experiment(cfg, workers=workers)


def run_null_posterior_convergence(
    cfg: ExperimentConfig, *, workers: int | None = None
) -> list[CsvRow]:
    _require(cfg, "null_posterior_convergence")
    return run_experiment(cfg, workers=workers)


def run_tau_sweep(
    cfg: ExperimentConfig, *, workers: int | None = None
) -> list[CsvRow]:
    _require(cfg, "tau_sweep")
    return run_experiment(cfg, workers=workers)


def run_threshold_curve(
    cfg: ExperimentConfig, *, workers: int | None = None
) -> list[CsvRow]:
    _require(cfg, "threshold_curve")
    return run_experiment(cfg, workers=workers)


def run_info_growth(
    cfg: ExperimentConfig, *, workers: int | None = None
) -> list[CsvRow]:
    _require(cfg, "info_growth")
    return run_experiment(cfg, workers=workers)


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return "nan"
    return format(float(value), ".12g")


def rows_to_csv(rows: list[CsvRow]) -> str:
    """Serialise rows under the fixed header; '.' decimals, no locale."""
    lines = [_CSV_HEADER]
    for row in rows:
        lines.append(",".join(
            _fmt(getattr(row, f.name)) for f in fields(CsvRow)
        ))
    return "\n".join(lines) + "\n"


def write_csv(rows: list[CsvRow], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(rows_to_csv(rows))
