"""Single-frequency constrained shape optimization.

Each iteration linearizes the forward map around the current curve, proposes a
normal update from steepest descent (Cauchy step) or Gauss-Newton, and filters
the update until the new curve is admissible and lowers the residual.

Update sign: with r = u_meas - F(curve) and F(curve + c) ~ F + J c, every
step returned here is meant to be *added*, so it decreases the linear model
||r - J c||.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .curvekit import (
    ConstraintParams,
    FourierCurve,
    PerturbationCoeffs,
    apply_normal_update,
    displaced_nodes,
    is_simple_polygon,
    is_admissible,
    resample_arclength,
    sample_equispaced,
    trimmed,
)
from .forward import ForwardSolution, ScatteringData, ScatteringSetup, solve_forward
from .frechet import JacobianMatrix, jacobian, n_h_rule

logger = logging.getLogger(__name__)

METHODS = ("sd", "gn", "sd-gn", "min(sd,gn)", "sd-min(sd,gn)")
FILTERS = ("gaussian", "step-length")


class RankDeficiencyError(np.linalg.LinAlgError):
    pass


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class OptimizerSettings:
    method: str = "sd"
    filter: str = "gaussian"
    n_sd: int = 5
    maxit: int = 100
    eps_c: float = 1e-3
    eps_r: float = 1e-5
    n_filter: int = 10
    constraint: ConstraintParams = field(default_factory=ConstraintParams)
    n_h: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.filter not in FILTERS:
            raise ValueError(f"unknown filter {self.filter!r}; choose from {FILTERS}")
        if self.maxit < 1:
            raise ValueError("maxit must be at least 1")
        if not (self.eps_c > 0 and self.eps_r > 0):
            raise ValueError("tolerances must be positive")
        if self.n_filter < 0 or self.n_sd < 0:
            raise ValueError("n_filter and n_sd must be non-negative")

    def modes(self, k: float) -> int:
        return self.n_h if self.n_h is not None else n_h_rule(k)


@dataclass
class IterationStats:
    """Per-iteration log of one single-frequency solve.

    ``n_pde`` counts one unit per forward solve (residual evaluation) and one
    per Jacobian build (all its right-hand sides share one factorization).
    ``n_filter_solves`` counts only the residual evaluations made while
    filtering candidate updates, which is the unit used in published
    per-frequency solve tables (a step rejected at every filter level costs
    N_it_filt + 1 of them).
    """

    k: float
    rows: list[dict] = field(default_factory=list)
    n_pde: int = 0
    n_jacobians: int = 0
    n_residuals: int = 0
    n_filter_solves: int = 0
    reason: str = ""
    initial_residual: float = float("nan")
    final_residual: float = float("nan")

    @property
    def residuals(self) -> list[float]:
        return [self.initial_residual] + [row["residual"] for row in self.rows]

    def csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "residual", "update_norm", "filter_attempts", "n_pde", "step", "reason"])
        for row in self.rows:
            writer.writerow(
                [row["iteration"], f"{row['residual']:.17g}", f"{row['update_norm']:.17g}",
                 row["filter_attempts"], row["n_pde"], row["step"], ""]
            )
        writer.writerow([len(self.rows), f"{self.final_residual:.17g}", "", "", self.n_pde, "", self.reason])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Residual and steps
# ---------------------------------------------------------------------------


def residual(curve: FourierCurve, measured: ScatteringData, setup: ScatteringSetup) -> np.ndarray:
    """r = u_meas - F_k(curve)."""
    if not measured.matches(setup):
        raise DimensionError("measured data does not match the scattering setup")
    return measured.values - solve_forward(curve, setup).data.values


def _jac_array(J) -> np.ndarray:
    return J.matrix if isinstance(J, JacobianMatrix) else np.asarray(J)


def sd_step(J, r: np.ndarray) -> PerturbationCoeffs:
    """Steepest descent with the exact Cauchy step of the quadratic model."""
    A = _jac_array(J)
    r = np.asarray(r)
    if A.shape[0] != r.size:
        raise DimensionError(f"Jacobian has {A.shape[0]} rows, residual has {r.size}")
    delta = A.real.T @ r.real + A.imag.T @ r.imag
    dd = float(delta @ delta)
    if dd == 0.0:
        return PerturbationCoeffs(np.zeros(A.shape[1]))
    Ad = A @ delta
    t = dd / float(np.vdot(Ad, Ad).real)
    return PerturbationCoeffs(t * delta)


def gn_step(J, r: np.ndarray) -> PerturbationCoeffs:
    """Least-squares solution of [Re J; Im J] c = [Re r; Im r] by QR."""
    A = _jac_array(J)
    r = np.asarray(r)
    if A.shape[0] != r.size:
        raise DimensionError(f"Jacobian has {A.shape[0]} rows, residual has {r.size}")
    M = np.vstack([A.real, A.imag])
    b = np.concatenate([r.real, r.imag])
    q, R = np.linalg.qr(M)
    d = np.abs(np.diag(R))
    if d.min() <= 1e-13 * d.max():
        raise RankDeficiencyError("stacked Jacobian is numerically rank deficient")
    return PerturbationCoeffs(solve_triangular(R, q.T @ b))


def gaussian_filter(c, level: int, n_h: int | None = None, sigma: float | None = None) -> PerturbationCoeffs:
    """Damp mode m by exp(-m^2 / (sigma^2 N_h^2)), sigma = 10^-level."""
    c = c.c if isinstance(c, PerturbationCoeffs) else np.asarray(c, dtype=float)
    if level < 0:
        raise ValueError("filter level must be non-negative")
    n_h = n_h if n_h is not None else (c.size - 1) // 2
    sigma = sigma if sigma is not None else 10.0 ** (-level)
    m = np.arange(1, n_h + 1)
    with np.errstate(over="ignore"):
        damp = np.exp(-(m**2) / (sigma**2 * n_h**2))
    return PerturbationCoeffs(np.concatenate([[c[0]], c[1 : n_h + 1] * damp, c[n_h + 1 :] * damp]))


def step_length_filter(c, level: int) -> PerturbationCoeffs:
    c = c.c if isinstance(c, PerturbationCoeffs) else np.asarray(c, dtype=float)
    if level < 0:
        raise ValueError("filter level must be non-negative")
    return PerturbationCoeffs(c / 2.0**level)


def apply_filter(c: PerturbationCoeffs, level: int, kind: str) -> PerturbationCoeffs:
    if kind == "gaussian":
        return gaussian_filter(c, level)
    return step_length_filter(c, level)


# ---------------------------------------------------------------------------
# Filtered acceptance
# ---------------------------------------------------------------------------


@dataclass
class Accepted:
    curve: FourierCurve
    solution: ForwardSolution
    update: PerturbationCoeffs
    residual: float
    attempts: int
    evaluations: int
    step: str


def _try_candidates(curve, sampled, candidates, measured, setup, settings, res0, level):
    """One filter level for a set of named candidates; best strict decrease wins."""
    k = setup.k
    best = None
    evaluations = 0
    for name, c in candidates:
        d = apply_filter(c, level, settings.filter)
        if not np.any(d.c):
            # a zero update leaves the curve as it is: no strict decrease possible
            continue
        # a tangled displaced polygon cannot refit to a simple curve; skip the refit
        if not is_simple_polygon(displaced_nodes(sampled, d)):
            continue
        try:
            new = apply_normal_update(curve, d, k, sampled)
        except Exception as exc:  # reparametrization failure counts as rejection
            logger.debug("update rejected at level %d: %s", level, exc)
            continue
        if not is_admissible(new, k, settings.constraint):
            continue
        sol = solve_forward(new, setup)
        evaluations += 1
        res = float(np.linalg.norm(measured.values - sol.data.values))
        if res < res0 and (best is None or res < best[3]):
            best = (name, d, new, res, sol)
    return best, evaluations


def filtered_accept(
    curve: FourierCurve,
    c: PerturbationCoeffs | dict,
    measured: ScatteringData,
    setup: ScatteringSetup,
    settings: OptimizerSettings,
    res0: float | None = None,
    sampled=None,
) -> "Accepted | _Rejected":
    """Smallest filter level giving an admissible curve with strictly lower residual.

    ``c`` may be a dict of named candidates (e.g. ``{"sd": ..., "gn": ...}``);
    they are filtered in lockstep and, at the first level where any passes,
    the one with the smallest residual is taken (ties go to the first listed).
    When every level fails the result is a falsy record of the evaluations
    spent.
    """
    k = setup.k
    sampled = sampled if sampled is not None else sample_equispaced(curve, k)
    if res0 is None:
        res0 = float(np.linalg.norm(measured.values - solve_forward(curve, setup).data.values))
    candidates = list(c.items()) if isinstance(c, dict) else [("update", c)]
    evaluations = 0
    for level in range(settings.n_filter + 1):
        best, n_eval = _try_candidates(curve, sampled, candidates, measured, setup, settings, res0, level)
        evaluations += n_eval
        if best is not None:
            name, d, new, res, sol = best
            return Accepted(new, sol, d, res, level + 1, evaluations, name)
    return _Rejected(evaluations, settings.n_filter + 1)


@dataclass
class _Rejected:
    evaluations: int
    attempts: int

    def __bool__(self) -> bool:
        return False


# ---------------------------------------------------------------------------
# Main loop
# ---------------------------------------------------------------------------


def make_admissible(curve: FourierCurve, k: float, params: ConstraintParams, max_passes: int = 10) -> FourierCurve:
    """Low-pass the curve's own coefficients until it is admissible at k."""
    if is_admissible(curve, k, params):
        return curve
    m_k = params.bandlimit(k)
    zc = curve.coeffs_z
    modes = curve.modes
    for p in range(max_passes):
        width = m_k / 2.0**p
        filtered = zc * np.exp(-(modes**2) / width**2)
        pts = type(curve).from_z_coeffs(filtered, curve.length)
        nodes = sample_equispaced(pts, k).nodes
        candidate = trimmed(resample_arclength(nodes))
        if is_admissible(candidate, k, params):
            logger.info("initial guess smoothed to satisfy constraints (pass %d)", p)
            return candidate
    raise ValueError("could not make the initial guess admissible")


def _step_kind(method: str, iteration: int, n_sd: int) -> str:
    if method in ("sd", "gn", "min(sd,gn)"):
        return method
    if iteration < n_sd:
        return "sd"
    return "gn" if method == "sd-gn" else "min(sd,gn)"


def solve_single_frequency(
    curve0: FourierCurve,
    measured: ScatteringData,
    setup: ScatteringSetup,
    settings: OptimizerSettings = OptimizerSettings(),
) -> tuple[FourierCurve, IterationStats]:
    """Minimize ||u_meas - F_k(curve)|| over admissible curves from ``curve0``."""
    k = setup.k
    if not measured.matches(setup):
        raise DimensionError("measured data does not match the scattering setup")
    stats = IterationStats(k=k)
    curve = make_admissible(curve0, k, settings.constraint)
    sol = solve_forward(curve, setup)
    stats.n_pde += 1
    stats.n_residuals += 1
    res = float(np.linalg.norm(measured.values - sol.data.values))
    stats.initial_residual = res
    n_h = settings.modes(k)

    for it in range(settings.maxit):
        if res < settings.eps_r:
            stats.reason = "small-residual"
            break
        r = measured.values - sol.data.values
        J = jacobian(sol, n_h)
        stats.n_pde += 1
        stats.n_jacobians += 1
        kind = _step_kind(settings.method, it, settings.n_sd)
        if kind == "sd":
            cand = {"sd": sd_step(J, r)}
        elif kind == "gn":
            cand = {"gn": gn_step(J, r)}
        else:
            cand = {"sd": sd_step(J, r), "gn": gn_step(J, r)}
        if all(v.norm() == 0.0 for v in cand.values()):
            stats.reason = "stationary"
            break
        acc = filtered_accept(curve, cand, measured, setup, settings, res0=res, sampled=sol.sampled)
        stats.n_pde += acc.evaluations
        stats.n_residuals += acc.evaluations
        stats.n_filter_solves += acc.evaluations
        if not acc:
            stats.reason = "filter-rejected"
            break
        curve, sol, res = acc.curve, acc.solution, acc.residual
        dnorm = acc.update.norm()
        stats.rows.append(
            {
                "iteration": it + 1,
                "residual": res,
                "update_norm": dnorm,
                "filter_attempts": acc.attempts,
                "n_pde": stats.n_pde,
                "step": acc.step,
                "curve": curve,
            }
        )
        if dnorm < settings.eps_c:
            stats.reason = "small-update"
            break
    else:
        stats.reason = "max-iterations"
    if not stats.reason:
        stats.reason = "small-residual"
    stats.final_residual = res
    logger.debug("k=%g: %s after %d iterations, residual %.3e", k, stats.reason, len(stats.rows), res)
    return curve, stats
