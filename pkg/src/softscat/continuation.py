"""Continuation in frequency: deterministic sweeps and random-walk schedules.

A reconstruction visits a sequence of frequency indices and warm-starts each
single-frequency solve from the previous visit's curve.  The deterministic
schedule is 1, 2, ..., N_k.  The stochastic schedule is a reflected biased
random walk that stops the first time it reaches N_k.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .curvekit import (
    CurveEnsemble,
    FourierCurve,
    chamfer,
    circle,
    is_admissible,
    make_random_circle,
    pointwise_spread,
    sample_equispaced,
)
from .forward import FactorizationError, ScatteringData, ScatteringSetup
from .sfopt import IterationStats, OptimizerSettings, RankDeficiencyError, solve_single_frequency

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One round of the SplitMix64 output function."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def trial_rng(base_seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for ``trial`` derived from the master seed."""
    return np.random.default_rng(splitmix64((base_seed + trial) & MASK64) ^ stream)


class PathLengthError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Frequencies and data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrequencyGrid:
    k_min: float = 1.0
    dk: float = 0.25
    n: int = 117

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("frequency grid needs at least one point")
        if not (self.k_min > 0 and self.dk > 0):
            raise ValueError("k_min and dk must be positive")

    @property
    def values(self) -> np.ndarray:
        return self.k_min + self.dk * np.arange(self.n)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> float:
        return float(self.values[i])

    @classmethod
    def up_to(cls, k_max: float, k_min: float = 1.0, dk: float = 0.25) -> "FrequencyGrid":
        n = int(round((k_max - k_min) / dk)) + 1
        return cls(k_min, dk, n)


@dataclass
class MultiFrequencyData:
    """Measured data and sensor layout for every grid frequency."""

    grid: FrequencyGrid
    setups: list[ScatteringSetup]
    data: list[ScatteringData]

    def __post_init__(self):
        if len(self.setups) != len(self.grid) or len(self.data) != len(self.grid):
            raise ValueError("need one setup and one data set per grid frequency")
        for s, d, k in zip(self.setups, self.data, self.grid.values):
            if not np.isclose(s.k, k, rtol=0, atol=1e-12):
                raise ValueError(f"setup frequency {s.k} does not match grid value {k}")
            if not d.matches(s):
                raise ValueError(f"data at k={k} does not match its setup")

    def truncated(self, n: int) -> "MultiFrequencyData":
        grid = FrequencyGrid(self.grid.k_min, self.grid.dk, n)
        return MultiFrequencyData(grid, self.setups[:n], self.data[:n])


def synthesize(
    truth: FourierCurve,
    grid: FrequencyGrid,
    setup_factory: Callable[[float], ScatteringSetup] = ScatteringSetup,
    n_nodes: int | None = None,
) -> MultiFrequencyData:
    """Forward data for every grid frequency (``n_nodes`` oversamples the truth)."""
    from .forward import forward_map

    setups = [setup_factory(float(k)) for k in grid.values]
    data = [forward_map(truth, s, n_nodes) for s in setups]
    return MultiFrequencyData(grid, setups, data)


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScifConfig:
    p: float = 0.603
    seed: int = 0
    n_trials: int = 1
    max_path_len: int | None = None

    def __post_init__(self):
        if not 0.5 < self.p <= 1.0:
            raise ValueError("p must lie in (1/2, 1]")
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")

    def path_cap(self, n_k: int) -> int:
        """Default cap: 20 times the expected length."""
        cap = self.max_path_len
        if cap is None:
            cap = int(np.ceil(20 * n_k / (2 * self.p - 1)))
        if cap < n_k:
            raise ValueError("max_path_len must be at least N_k")
        return cap


@dataclass
class VisitRecord:
    index: int  # walk index, 0 is the reflected state solved at k_1
    k: float
    residual_in: float
    residual_out: float
    iterations: int
    n_pde: int
    reason: str
    admissible: bool


@dataclass
class PathRecord:
    indices: list[int]
    redraws: int = 0
    visits: list[VisitRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.indices)

    def grid_indices(self) -> list[int]:
        """Zero-based grid positions solved at each visit (state 0 maps to k_1)."""
        return [max(i, 1) - 1 for i in self.indices]

    def is_valid(self, n_k: int) -> bool:
        idx = self.indices
        if not idx or idx[-1] != n_k or n_k in idx[:-1]:
            return False
        prev = 0
        for i in idx:
            if i < 0 or abs(i - prev) > 1 or (i == prev and i != 0):
                return False
            prev = i
        return True


def _walk(p: float, n_k: int, rng: np.random.Generator, cap: int) -> list[int] | None:
    out = []
    i = 0
    # draw in blocks to avoid per-step generator overhead
    while len(out) < cap:
        ups = rng.random(min(4096, cap - len(out))) < p
        for up in ups:
            i = i + 1 if up else max(0, i - 1)
            out.append(i)
            if i == n_k:
                return out
    return None


def scif_sample_path(config: ScifConfig, n_k: int, rng: np.random.Generator) -> PathRecord:
    """Reflected biased walk from state 0: up with probability p, else down (floored at 0).

    A walk longer than the configured cap is discarded and redrawn from the
    same generator; the number of redraws is recorded.
    """
    if n_k < 1:
        raise ValueError("N_k must be positive")
    cap = config.path_cap(n_k)
    for redraw in range(100):
        path = _walk(config.p, n_k, rng, cap)
        if path is not None:
            return PathRecord(path, redraws=redraw)
        logger.info("walk exceeded %d steps; redrawing", cap)
    raise PathLengthError(f"no walk reached N_k={n_k} within {cap} steps in 100 draws")


def expected_path_length(p: float, n_k: int) -> float:
    """Exact mean hitting time of N_k for the walk above (starting at 0)."""
    if p == 1.0:
        return float(n_k)
    q = 1.0 - p
    d = 2 * p - 1
    return n_k / d - q * (1.0 - (q / p) ** n_k) / d**2


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------


@dataclass
class ContinuationResult:
    curve: FourierCurve
    curves: list[FourierCurve]
    path: PathRecord
    stats: list[IterationStats]

    @property
    def residuals(self) -> list[float]:
        return [v.residual_out for v in self.path.visits]

    @property
    def n_pde(self) -> int:
        return sum(v.n_pde for v in self.path.visits)

    @property
    def final_residual(self) -> float:
        return self.path.visits[-1].residual_out


def _visit(curve, data: MultiFrequencyData, gi: int, settings: OptimizerSettings):
    setup = data.setups[gi]
    try:
        new, stats = solve_single_frequency(curve, data.data[gi], setup, settings)
    except (RankDeficiencyError, FactorizationError) as exc:
        logger.warning("k=%g: visit failed (%s); keeping the current curve", setup.k, exc)
        stats = IterationStats(k=setup.k, reason=f"error: {exc}")
        return curve, stats
    return new, stats


def run_path(
    data: MultiFrequencyData,
    init: FourierCurve,
    path: PathRecord,
    settings: OptimizerSettings = OptimizerSettings(),
    keep_curves: bool = True,
) -> ContinuationResult:
    """Solve along ``path``, each visit warm-started from the previous result."""
    n_k = len(data.grid)
    if not path.indices or max(path.indices) > n_k:
        raise ValueError("path visits indices outside the frequency grid")
    curve = init
    curves, all_stats = [], []
    path.visits = []
    for idx, gi in zip(path.indices, path.grid_indices()):
        curve, stats = _visit(curve, data, gi, settings)
        k = data.setups[gi].k
        path.visits.append(
            VisitRecord(
                index=idx,
                k=k,
                residual_in=stats.initial_residual,
                residual_out=stats.final_residual,
                iterations=len(stats.rows),
                n_pde=stats.n_pde,
                reason=stats.reason,
                admissible=bool(is_admissible(curve, k, settings.constraint)),
            )
        )
        all_stats.append(stats)
        if keep_curves:
            curves.append(curve)
    return ContinuationResult(curve, curves, path, all_stats)


def cif(
    data: MultiFrequencyData,
    init: FourierCurve | None = None,
    settings: OptimizerSettings = OptimizerSettings(),
) -> ContinuationResult:
    """Standard sweep k_1, ..., k_{N_k} (default start: unit circle at the origin)."""
    init = init if init is not None else circle(1.0)
    path = PathRecord(list(range(1, len(data.grid) + 1)))
    return run_path(data, init, path, settings)


def scif(
    data: MultiFrequencyData,
    init: FourierCurve | None,
    path: PathRecord,
    settings: OptimizerSettings = OptimizerSettings(),
) -> ContinuationResult:
    init = init if init is not None else circle(1.0)
    if not path.is_valid(len(data.grid)):
        raise ValueError("invalid walk for this frequency grid")
    return run_path(data, init, path, settings)


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


@dataclass
class TrialResult:
    trial: int
    seed: int
    curve: FourierCurve | None
    residual: float
    init: FourierCurve | None
    path: PathRecord | None
    n_pde: int = 0
    chamfer: float | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class TrialSummary:
    trials: list[TrialResult]
    ensemble: CurveEnsemble | None
    best_by_residual: TrialResult | None
    best_by_chamfer: TrialResult | None
    spread: np.ndarray | None
    reference_nodes: np.ndarray | None


TRIAL_MODES = ("random-init-cif", "scif")


def run_trial(
    mode: str,
    trial: int,
    base_seed: int,
    data: MultiFrequencyData,
    settings: OptimizerSettings = OptimizerSettings(),
    p: float = 0.603,
    init: FourierCurve | None = None,
    truth: FourierCurve | None = None,
    max_path_len: int | None = None,
) -> TrialResult:
    seed = base_seed + trial
    rng = trial_rng(base_seed, trial)
    n_k = len(data.grid)
    if mode not in TRIAL_MODES:
        raise ValueError(f"unknown trial mode {mode!r}; choose from {TRIAL_MODES}")
    config = ScifConfig(p=p, seed=seed, max_path_len=max_path_len)
    config.path_cap(n_k)
    start = None
    try:
        if mode == "random-init-cif":
            start = init if init is not None else make_random_circle(rng)
            res = cif(data, start, settings)
        else:
            start = init if init is not None else circle(1.0)
            res = scif(data, start, scif_sample_path(config, n_k, rng), settings)
    except Exception as exc:  # numerical failures are isolated per trial
        logger.warning("trial %d failed: %s", trial, exc)
        return TrialResult(trial, seed, None, float("inf"), start, None, error=str(exc))
    dist = None
    if truth is not None:
        k_top = data.setups[-1].k
        dist = chamfer(sample_equispaced(truth, k_top), sample_equispaced(res.curve, k_top))
    return TrialResult(trial, seed, res.curve, res.final_residual, start, res.path, res.n_pde, dist)


def run_trials(
    mode: str,
    n_trials: int,
    base_seed: int,
    data: MultiFrequencyData,
    settings: OptimizerSettings = OptimizerSettings(),
    p: float = 0.603,
    init: FourierCurve | None = None,
    truth: FourierCurve | None = None,
    max_path_len: int | None = None,
    trial_indices: Sequence[int] | None = None,
) -> TrialSummary:
    """Independent trials with seeds base_seed + t; the summary is order independent."""
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    if mode not in TRIAL_MODES:
        raise ValueError(f"unknown trial mode {mode!r}; choose from {TRIAL_MODES}")
    order = list(trial_indices) if trial_indices is not None else list(range(n_trials))
    if sorted(order) != list(range(n_trials)):
        raise ValueError("trial_indices must be a permutation of range(n_trials)")
    results = {}
    for t in order:
        logger.info("%s trial %d/%d", mode, t + 1, n_trials)
        results[t] = run_trial(mode, t, base_seed, data, settings, p, init, truth, max_path_len)
    trials = [results[t] for t in range(n_trials)]
    return summarize(trials, data.setups[-1].k)


def summarize(trials: list[TrialResult], k_top: float) -> TrialSummary:
    good = [t for t in trials if t.ok]
    if not good:
        return TrialSummary(trials, None, None, None, None, None)
    ensemble = CurveEnsemble(
        [t.curve for t in good],
        [{"trial": t.trial, "seed": t.seed, "residual": t.residual, "path_length": len(t.path)} for t in good],
    )
    best_res = min(good, key=lambda t: (t.residual, t.trial))
    best_ch = None
    if all(t.chamfer is not None for t in good):
        best_ch = min(good, key=lambda t: (t.chamfer, t.trial))
    ref = sample_equispaced(best_res.curve, k_top)
    spread = pointwise_spread(ensemble, ref, k_top)
    return TrialSummary(trials, ensemble, best_res, best_ch, spread, ref.nodes)
