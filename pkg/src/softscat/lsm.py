"""Linear sampling method initializer.

For every test point x we look for a Herglotz density g with A g ~ G_x, where
A holds the scaled scattered-field samples and G_x the free-space field of a
point source at x seen at the receivers.  With Tikhonov regularization the
density stays bounded everywhere, and log ||g|| separates the obstacle
interior (small norms) from the exterior (large norms).  A level set of that
indicator, smoothed into a star-shaped curve, serves as an initial guess.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from skimage import measure

from .curvekit import ConstraintParams, FourierCurve, from_polar, is_admissible
from .forward import ScatteringData, ScatteringSetup
from .specfun import hankel01

logger = logging.getLogger(__name__)

LOG_FLOOR = math.log(np.finfo(float).tiny)


class ExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class LsmConfig:
    alpha: float = 1e-3
    n_star: int = 10
    box: tuple[float, float, float, float] = (-2.0, 2.0, -2.0, 2.0)
    resolution: int = 201
    level: float = 0.5

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.resolution < 32:
            raise ValueError("grid resolution must be at least 32")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")
        if self.n_star < 1:
            raise ValueError("n_star must be at least 1")
        x0, x1, y0, y1 = self.box
        if not (x1 > x0 and y1 > y0):
            raise ValueError("box must be (xmin, xmax, ymin, ymax) with positive extent")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        x0, x1, y0, y1 = self.box
        return np.linspace(x0, x1, self.resolution), np.linspace(y0, y1, self.resolution)

    def points(self) -> np.ndarray:
        xs, ys = self.axes()
        X, Y = np.meshgrid(xs, ys)  # rows follow y
        return np.column_stack([X.ravel(), Y.ravel()])


@dataclass(frozen=True)
class IndicatorField:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # (len(ys), len(xs))

    def csv(self) -> str:
        lines = ["x,y,h"]
        for j, y in enumerate(self.ys):
            for i, x in enumerate(self.xs):
                lines.append(f"{x:.17g},{y:.17g},{self.values[j, i]:.17g}")
        return "\n".join(lines) + "\n"


def lsm_prefactor(k: float, n_directions: int) -> complex:
    return math.sqrt(8 * math.pi) * np.exp(-0.25j * math.pi) / (math.sqrt(k) * n_directions)


def build_lsm_matrix(data: ScatteringData, setup: ScatteringSetup) -> np.ndarray:
    """Receivers along rows, incident directions along columns."""
    if not data.matches(setup):
        raise ValueError("data does not match the scattering setup")
    return lsm_prefactor(setup.k, setup.n_directions) * data.grid().T


def point_source_rhs(points: np.ndarray, receivers: np.ndarray, k: float) -> np.ndarray:
    """(i/4) H0(k |x - x_m|) with receivers along rows and points along columns."""
    r = np.hypot(receivers[:, None, 0] - points[None, :, 0], receivers[:, None, 1] - points[None, :, 1])
    if np.any(r <= 0):
        raise ValueError("a sampling point coincides with a receiver")
    return 0.25j * hankel01(k * r).h0


def herglotz_field(A: np.ndarray, points: np.ndarray, receivers: np.ndarray, k: float, alpha: float) -> np.ndarray:
    """Tikhonov densities g(x) for all points (directions along rows, points along columns)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    G = point_source_rhs(points, receivers, k)
    filt = s / (s**2 + alpha**2)
    return Vh.conj().T @ (filt[:, None] * (U.conj().T @ G))


def indicator(g: np.ndarray) -> np.ndarray:
    """h = log sqrt(sum |g|^2) per column; zero norms map to a finite floor."""
    nrm = np.sqrt(np.sum(np.abs(g) ** 2, axis=0))
    with np.errstate(divide="ignore"):
        h = np.log(nrm)
    if np.any(nrm == 0):
        logger.warning("zero Herglotz density; indicator floored at %g", LOG_FLOOR)
        h = np.where(nrm == 0, LOG_FLOOR, h)
    return h


def indicator_field(data: ScatteringData, setup: ScatteringSetup, config: LsmConfig = LsmConfig()) -> IndicatorField:
    A = build_lsm_matrix(data, setup)
    pts = config.points()
    g = herglotz_field(A, pts, setup.receivers, setup.k, config.alpha)
    xs, ys = config.axes()
    return IndicatorField(xs, ys, indicator(g).reshape(len(ys), len(xs)))


def star_fit(points: np.ndarray, n_star: int, center: np.ndarray | None = None):
    """Least-squares r(theta) = a0 + sum a_j cos(j theta) + b_j sin(j theta) about ``center``."""
    center = points.mean(axis=0) if center is None else np.asarray(center)
    d = points - center
    theta = np.arctan2(d[:, 1], d[:, 0])
    r = np.hypot(d[:, 0], d[:, 1])
    design = star_design(theta, n_star)
    coef, *_ = np.linalg.lstsq(design, r, rcond=None)
    return center, coef, design, r


def star_design(theta: np.ndarray, n_star: int) -> np.ndarray:
    j = np.arange(1, n_star + 1)
    return np.column_stack([np.ones_like(theta), np.cos(np.outer(theta, j)), np.sin(np.outer(theta, j))])


def star_curve(center, coef) -> FourierCurve:
    n_star = (coef.size - 1) // 2
    j = np.arange(1, n_star + 1)
    a, b = coef[1 : n_star + 1], coef[n_star + 1 :]

    def r(t):
        jt = np.asarray(t)[..., None] * j
        return coef[0] + np.cos(jt) @ a + np.sin(jt) @ b

    def dr(t):
        jt = np.asarray(t)[..., None] * j
        return np.cos(jt) @ (j * b) - np.sin(jt) @ (j * a)

    return from_polar(r, dr, tuple(center))


def _closed_contours(field: IndicatorField, level_value: float) -> list[np.ndarray]:
    out = []
    xs, ys = field.xs, field.ys
    for c in measure.find_contours(field.values, level_value):
        if len(c) < 4 or not np.allclose(c[0], c[-1]):
            continue
        rows, cols = c[:, 0], c[:, 1]
        x = np.interp(cols, np.arange(len(xs)), xs)
        y = np.interp(rows, np.arange(len(ys)), ys)
        out.append(np.column_stack([x, y])[:-1])
    return out


def _polygon_area(p: np.ndarray) -> float:
    return 0.5 * abs(float(np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1])))


def extract_initial_curve(
    field: IndicatorField,
    config: LsmConfig = LsmConfig(),
    k: float = 1.0,
    constraint: ConstraintParams = ConstraintParams(),
) -> FourierCurve:
    """Largest closed contour at the normalized level, smoothed into a star-shaped curve.

    The interior of the scatterer is the low-indicator region, so the contour
    is taken around the grid minimum.  If the fit is not admissible at ``k``
    it is redone with fewer modes.
    """
    h = field.values
    lo, hi = float(h.min()), float(h.max())
    if not hi > lo:
        raise ExtractionError("indicator is constant; no level set to extract")
    level_value = lo + config.level * (hi - lo)
    contours = _closed_contours(field, level_value)
    if not contours:
        raise ExtractionError(
            f"no closed contour at level {config.level}; try a different level (e.g. a sweep from 0.2 to 0.8)"
        )
    best = max(contours, key=_polygon_area)
    n_star = config.n_star
    if best.shape[0] < 2 * n_star + 1:
        raise ExtractionError(f"contour has only {best.shape[0]} points for {n_star} star modes")
    center = best.mean(axis=0)
    for n in range(n_star, 0, -1):
        _, coef, _, _ = star_fit(best, n, center)
        if coef[0] <= 0:
            continue
        try:
            curve = star_curve(center, coef)
        except Exception as exc:
            logger.debug("star fit with %d modes failed: %s", n, exc)
            continue
        if is_admissible(curve, k, constraint):
            if n < n_star:
                logger.info("star fit reduced to %d modes for admissibility", n)
            return curve
    raise ExtractionError("could not fit an admissible star-shaped curve to the contour")


def lsm_initial_guess(
    data: ScatteringData, setup: ScatteringSetup, config: LsmConfig = LsmConfig()
) -> tuple[FourierCurve, IndicatorField]:
    field = indicator_field(data, setup, config)
    return extract_initial_curve(field, config, setup.k), field
