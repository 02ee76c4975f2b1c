"""Closed planar curves stored as Fourier series in arclength.

A :class:`FourierCurve` holds the coefficients of x(t) and y(t) for
t in [0, L), with L the curve length. All curves are kept counter-clockwise so
that the curvature of a convex curve is positive and the outward normal is
(y', -x').

Besides representation this module carries the admissibility test (simple
curve plus curvature band-limit), the normal-perturbation update used by the
optimizers, the comparison metrics and the benchmark shape generators.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree
from shapely.geometry import LinearRing, Point, Polygon

logger = logging.getLogger(__name__)

MIN_NODES = 300
POINTS_PER_WAVELENGTH = 20
CURVE_FILE_MAGIC = "fouriercurve"
CURVE_FILE_VERSION = "v1"


class CurveError(ValueError):
    """Invalid curve data (non-finite coefficients, bad lengths, ...)."""


class ReparametrizationError(RuntimeError):
    pass


class ShapeGenerationError(RuntimeError):
    pass


class MetricUndefinedError(ValueError):
    pass


class CurveParseError(ValueError):
    pass


def _centered_modes(n: int) -> np.ndarray:
    return np.arange((-n + 1) // 2, (n - 1) // 2 + 1)


@dataclass(frozen=True, eq=False)
class FourierCurve:
    """Closed curve x(t), y(t) = sum_j (x_j, y_j) exp(2 pi i j t / L).

    ``coeffs_x`` and ``coeffs_y`` are ordered by increasing mode, from
    floor((-N+1)/2) to floor((N-1)/2).
    """

    coeffs_x: np.ndarray
    coeffs_y: np.ndarray
    length: float

    def __post_init__(self):
        cx = np.asarray(self.coeffs_x, dtype=complex)
        cy = np.asarray(self.coeffs_y, dtype=complex)
        object.__setattr__(self, "coeffs_x", cx)
        object.__setattr__(self, "coeffs_y", cy)
        if cx.shape != cy.shape or cx.ndim != 1:
            raise CurveError("coefficient arrays must be 1-D with equal length")
        if cx.size < 5:
            raise CurveError(f"need at least 5 Fourier modes, got {cx.size}")
        if not (np.all(np.isfinite(cx)) and np.all(np.isfinite(cy))):
            raise CurveError("non-finite Fourier coefficients")
        if not (math.isfinite(self.length) and self.length > 0):
            raise CurveError(f"curve length must be positive, got {self.length}")

    @property
    def n_modes(self) -> int:
        return self.coeffs_x.size

    @property
    def modes(self) -> np.ndarray:
        return _centered_modes(self.n_modes)

    @property
    def coeffs_z(self) -> np.ndarray:
        """Coefficients of the complex coordinate z = x + i y."""
        return self.coeffs_x + 1j * self.coeffs_y

    @classmethod
    def from_z_coeffs(cls, zc: np.ndarray, length: float) -> "FourierCurve":
        """Build from centred coefficients of z = x + iy (odd count)."""
        zc = np.asarray(zc, dtype=complex)
        if zc.size % 2 == 0:
            raise CurveError("complex-coordinate coefficients need an odd mode count")
        zr = np.conj(zc[::-1])  # conj(z_{-j}) at position of j
        cx = 0.5 * (zc + zr)
        cy = (zc - zr) / 2j
        return cls(cx, cy, float(length))

    def evaluate(self, t: np.ndarray, derivative: int = 0) -> np.ndarray:
        """Complex coordinate (or its t-derivative) at arbitrary parameters t."""
        t = np.asarray(t, dtype=float)
        w = 2 * np.pi * self.modes / self.length
        zc = self.coeffs_z * (1j * w) ** derivative
        return np.exp(1j * np.outer(t, w)) @ zc

    def _grid_values(self, n: int, derivative: int = 0) -> np.ndarray:
        spec = np.zeros(n, dtype=complex)
        w = 2 * np.pi * self.modes / self.length
        zc = self.coeffs_z * (1j * w) ** derivative
        for j, c in zip(self.modes, zc):
            if abs(j) < n / 2 or j == -n // 2 and n % 2 == 0:
                spec[j % n] += c
        return np.fft.ifft(spec) * n

    def translated(self, dx: float, dy: float) -> "FourierCurve":
        cx = self.coeffs_x.copy()
        cy = self.coeffs_y.copy()
        zero = int(np.flatnonzero(self.modes == 0)[0])
        cx[zero] += dx
        cy[zero] += dy
        return FourierCurve(cx, cy, self.length)


@dataclass(frozen=True, eq=False)
class SampledCurve:
    """Equispaced-in-arclength sampling of a :class:`FourierCurve`."""

    nodes: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    curvature: np.ndarray
    spacing: float
    parent: FourierCurve
    k: float | None = None

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    @property
    def length(self) -> float:
        return self.parent.length

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing


@dataclass(frozen=True)
class ConstraintParams:
    eps_kappa: float = 0.1
    floor_modes: int = 20

    def __post_init__(self):
        if not 0 < self.eps_kappa < 1:
            raise ValueError("eps_kappa must lie in (0, 1)")

    def bandlimit(self, k: float) -> int:
        """Curvature band-limit M(k) = max(20, floor(2k))."""
        return max(self.floor_modes, int(math.floor(2 * k)))


@dataclass(frozen=True)
class PerturbationCoeffs:
    """Coefficients (c0, cos 1..Nh, sin 1..Nh) of a normal perturbation."""

    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        object.__setattr__(self, "c", c)
        if c.ndim != 1 or c.size < 3 or c.size % 2 == 0:
            raise ValueError(f"perturbation vector must have odd length >= 3, got {c.size}")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite perturbation coefficients")

    @property
    def n_h(self) -> int:
        return (self.c.size - 1) // 2

    def __neg__(self) -> "PerturbationCoeffs":
        return PerturbationCoeffs(-self.c)

    def norm(self) -> float:
        return float(np.linalg.norm(self.c))


@dataclass(frozen=True)
class Admissibility:
    ok: bool
    reason: str  # "ok", "self-intersection" or "energy"
    energy_ratio: float = float("nan")

    def __bool__(self) -> bool:
        return self.ok


@dataclass
class CurveEnsemble:
    curves: list[FourierCurve]
    metadata: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if not self.curves:
            raise ValueError("ensemble must contain at least one curve")
        if not self.metadata:
            self.metadata = [{} for _ in self.curves]

    def __len__(self) -> int:
        return len(self.curves)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def node_count(length: float, k: float) -> int:
    """max(300, ceil(20 points per wavelength))."""
    per_wavelength = POINTS_PER_WAVELENGTH * length * k / (2 * np.pi)
    return max(MIN_NODES, int(math.ceil(per_wavelength - 1e-9)))


def sample_equispaced(curve: FourierCurve, k: float, n: int | None = None) -> SampledCurve:
    """Sample ``curve`` at equispaced arclength nodes resolving frequency ``k``.

    ``n`` overrides the node rule (it is never allowed below the rule when
    used by the solvers, but tests and oversampled synthesis pass it).
    """
    if not (np.all(np.isfinite(curve.coeffs_x)) and np.all(np.isfinite(curve.coeffs_y))):
        raise CurveError("non-finite coefficients")
    if k <= 0:
        raise ValueError("frequency must be positive")
    if n is None:
        n = node_count(curve.length, k)
    z = curve._grid_values(n)
    dz = curve._grid_values(n, 1)
    d2z = curve._grid_values(n, 2)
    speed = np.abs(dz)
    tang = dz / speed
    kappa = np.imag(np.conj(dz) * d2z) / speed**3
    nodes = np.column_stack([z.real, z.imag])
    tangents = np.column_stack([tang.real, tang.imag])
    normals = np.column_stack([tang.imag, -tang.real])
    return SampledCurve(
        nodes=nodes,
        tangents=tangents,
        normals=normals,
        curvature=kappa,
        spacing=curve.length / n,
        parent=curve,
        k=k,
    )


def speed_deviation(curve: FourierCurve, n: int | None = None) -> float:
    """max | |gamma'(t)| - 1 | over a grid; zero for an exact arclength curve."""
    n = n or max(2 * curve.n_modes + 1, 64)
    return float(np.max(np.abs(np.abs(curve._grid_values(n, 1)) - 1.0)))


# ---------------------------------------------------------------------------
# Arclength reparametrization
# ---------------------------------------------------------------------------


def _fft_modes(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer modes and weights of the real-symmetric trig interpolant on n points.

    For even n the Nyquist coefficient is split evenly between +n/2 and -n/2.
    Returns (modes, index into fft array).
    """
    half = (n - 1) // 2
    modes = list(range(-half, half + 1))
    idx = [m % n for m in modes]
    if n % 2 == 0:
        modes += [-n // 2, n // 2]
        idx += [n // 2, n // 2]
    return np.array(modes), np.array(idx)


def _trig_coeffs(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = values.size
    f = np.fft.fft(values) / n
    modes, idx = _fft_modes(n)
    c = f[idx].astype(complex)
    if n % 2 == 0:
        c[-2:] *= 0.5
    return modes, c


def _invert_arclength(speed: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Solve ell(s) = targets for s in [0, 2pi) given equispaced speed samples."""
    n = speed.size
    modes, sc = _trig_coeffs(speed)
    nz = modes != 0
    mean = sc[~nz].sum().real
    w = sc[nz] / (1j * modes[nz])
    grid = 2 * np.pi * np.arange(n) / n
    # spectral primitive on the grid
    f = np.fft.fft(speed) / n
    q = np.fft.fftfreq(n, 1 / n)
    g = np.zeros_like(f)
    ok = (q != 0) & (np.abs(q) < n / 2)
    g[ok] = f[ok] / (1j * q[ok])
    prim = (np.fft.ifft(g) * n).real
    ell_grid = mean * grid + prim - prim[0]
    s = np.interp(targets, np.append(ell_grid, 2 * np.pi * mean), np.append(grid, 2 * np.pi))
    prev = np.inf
    for _ in range(20):
        e = np.exp(1j * np.outer(s, modes[nz]))
        ell = mean * s + ((e - 1.0) @ w).real
        sp = mean + (e @ sc[nz]).real
        step = (ell - targets) / sp
        s = s - step
        size = np.max(np.abs(step))
        if size < 1e-14 or size >= prev:
            break
        prev = size
    return s


def resample_arclength(points, n_modes: int | None = None, max_sweeps: int = 100) -> FourierCurve:
    """Fit a closed point sequence with an arclength-parametrized Fourier curve.

    The points are treated as samples of a periodic curve at equispaced
    parameter values. The trigonometric interpolant is resampled at equal
    arclength, and the procedure is repeated until the length estimate is
    stable to 1e-10 relative. The result is oriented counter-clockwise and
    truncated to ``n_modes`` modes (default: the largest odd count not
    exceeding half the number of points).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise CurveError("points must be an (n, 2) array")
    if np.allclose(pts[0], pts[-1], rtol=0, atol=1e-14 * max(1.0, np.abs(pts).max())):
        pts = pts[:-1]
    n = pts.shape[0]
    if n_modes is None:
        n_modes = n // 2 if (n // 2) % 2 else n // 2 - 1
    if n < 2 * n_modes:
        raise CurveError(f"need at least {2 * n_modes} points for {n_modes} modes, got {n}")
    if not np.all(np.isfinite(pts)):
        raise CurveError("non-finite points")
    z = pts[:, 0] + 1j * pts[:, 1]
    # counter-clockwise orientation
    if np.sum(z.real * np.roll(z.imag, -1) - np.roll(z.real, -1) * z.imag) < 0:
        z = z[::-1]

    targets_unit = np.arange(n) / n
    length_prev = None
    for _sweep in range(max_sweeps):
        modes, zc = _trig_coeffs(z)
        dz = np.exp(1j * np.outer(2 * np.pi * np.arange(n) / n, modes)) @ (1j * modes * zc)
        speed = np.abs(dz)
        length = 2 * np.pi * speed.mean()
        s = _invert_arclength(speed, targets_unit * length)
        z = np.exp(1j * np.outer(s, modes)) @ zc
        if length_prev is not None and abs(length - length_prev) < 1e-10 * length:
            break
        length_prev = length
    else:
        raise ReparametrizationError(
            f"arclength reparametrization did not converge in {max_sweeps} sweeps"
        )

    f = np.fft.fft(z) / n
    half = (n_modes - 1) // 2
    idx = np.arange(-half, half + 1) % n
    return FourierCurve.from_z_coeffs(f[idx], length)


def trimmed(curve: FourierCurve, rel_tol: float = 1e-15) -> FourierCurve:
    """Drop the outermost modes whose coefficients are negligible."""
    zc = curve.coeffs_z
    mags = np.abs(zc) + np.abs(zc[::-1])
    thresh = rel_tol * max(np.abs(zc).max(), 1e-300)
    half = curve.n_modes // 2
    keep = half
    while keep > 2 and mags[half - keep] < thresh:
        keep -= 1
    if keep == half:
        return curve
    sl = slice(half - keep, half + keep + 1)
    return FourierCurve(curve.coeffs_x[sl], curve.coeffs_y[sl], curve.length)


# ---------------------------------------------------------------------------
# Curvature and admissibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvatureSpectrum:
    values: np.ndarray
    modes: np.ndarray
    coeffs: np.ndarray


def curvature_spectrum(curve: SampledCurve) -> CurvatureSpectrum:
    """Curvature at the nodes and its Fourier coefficients in arclength.

    The coefficients are computed on a grid fine enough to hold the 2*N_Gamma
    modes of a product of two N_Gamma-mode series.
    """
    parent = curve.parent
    n_fine = max(curve.n, 2 * parent.n_modes + 1)
    if n_fine % 2 == 0:
        n_fine += 1
    dz = parent._grid_values(n_fine, 1)
    d2z = parent._grid_values(n_fine, 2)
    kappa = np.imag(np.conj(dz) * d2z) / np.abs(dz) ** 3
    f = np.fft.fft(kappa) / n_fine
    modes = _centered_modes(n_fine)
    return CurvatureSpectrum(values=curve.curvature.copy(), modes=modes, coeffs=f[modes % n_fine])


def elastic_energies(kappa_coeffs: np.ndarray, modes: np.ndarray, m: int) -> tuple[float, float]:
    """Total curvature energy and the part carried by modes |j| <= m."""
    power = np.abs(kappa_coeffs) ** 2
    return float(power.sum()), float(power[np.abs(modes) <= m].sum())


def is_simple_polygon(nodes: np.ndarray) -> bool:
    return bool(LinearRing(nodes).is_simple)


def is_admissible(
    curve: FourierCurve, k: float, params: ConstraintParams = ConstraintParams(), sampled: SampledCurve | None = None
) -> Admissibility:
    sampled = sampled if sampled is not None else sample_equispaced(curve, k)
    if not is_simple_polygon(sampled.nodes):
        return Admissibility(False, "self-intersection")
    spec = curvature_spectrum(sampled)
    e_tot, e_band = elastic_energies(spec.coeffs, spec.modes, params.bandlimit(k))
    ratio = e_band / e_tot if e_tot > 0 else 1.0
    if e_band < (1 - params.eps_kappa) * e_tot:
        return Admissibility(False, "energy", ratio)
    return Admissibility(True, "ok", ratio)


# ---------------------------------------------------------------------------
# Normal updates
# ---------------------------------------------------------------------------


def perturbation_values(c: PerturbationCoeffs | np.ndarray, t: np.ndarray, length: float) -> np.ndarray:
    """h(t; c) = c0 + sum_l c_l cos(2 pi l t/L) + c_{l+Nh} sin(2 pi l t/L)."""
    c = c.c if isinstance(c, PerturbationCoeffs) else np.asarray(c, dtype=float)
    n_h = (c.size - 1) // 2
    ang = 2 * np.pi * np.outer(t, np.arange(1, n_h + 1)) / length
    return c[0] + np.cos(ang) @ c[1 : n_h + 1] + np.sin(ang) @ c[n_h + 1 :]


def perturbation_basis(t: np.ndarray, length: float, n_h: int) -> np.ndarray:
    """Columns h_l(t): constant, cosines 1..Nh, sines 1..Nh."""
    ang = 2 * np.pi * np.outer(t, np.arange(1, n_h + 1)) / length
    return np.column_stack([np.ones_like(t), np.cos(ang), np.sin(ang)])


def displaced_nodes(sampled: SampledCurve, c: PerturbationCoeffs | np.ndarray) -> np.ndarray:
    h = perturbation_values(c, sampled.t, sampled.length)
    return sampled.nodes + h[:, None] * sampled.normals


def apply_normal_update(
    curve: FourierCurve, c: PerturbationCoeffs | np.ndarray, k: float, sampled: SampledCurve | None = None
) -> FourierCurve:
    """Move the nodes along the outward normal by h(t; c) and refit in arclength.

    The result is not checked for admissibility.
    """
    sampled = sampled if sampled is not None else sample_equispaced(curve, k)
    pts = displaced_nodes(sampled, c)
    return trimmed(resample_arclength(pts))


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _points(x) -> np.ndarray:
    return x.nodes if isinstance(x, SampledCurve) else np.asarray(x, dtype=float).reshape(-1, 2)


def chamfer(a, b) -> float:
    """Symmetric mean nearest-neighbour distance between two node sets."""
    pa, pb = _points(a), _points(b)
    if len(pa) == 0 or len(pb) == 0:
        raise ValueError("chamfer distance needs non-empty point sets")
    da, _ = cKDTree(pb).query(pa)
    db, _ = cKDTree(pa).query(pb)
    return float(0.5 * da.mean() + 0.5 * db.mean())


def area_error(truth, approx) -> float:
    """Symmetric-difference area of the node polygons over the true area."""
    p_true = Polygon(_points(truth))
    p_approx = Polygon(_points(approx))
    if p_true.area <= 0 or p_approx.area <= 0:
        raise MetricUndefinedError("degenerate polygon (zero area)")
    if not p_true.is_valid:
        p_true = p_true.buffer(0)
    if not p_approx.is_valid:
        p_approx = p_approx.buffer(0)
    return float(p_true.symmetric_difference(p_approx).area / p_true.area)


def pointwise_spread(ensemble: CurveEnsemble, reference: SampledCurve, k: float | None = None) -> np.ndarray:
    """Per reference node, std over members of the distance to the member's nearest node."""
    k = k if k is not None else (reference.k or 1.0)
    dists = []
    for member in ensemble.curves:
        nodes = sample_equispaced(member, k).nodes
        d, _ = cKDTree(nodes).query(reference.nodes)
        dists.append(d)
    return np.std(np.array(dists), axis=0)


def cavity_region(truth) -> Polygon:
    """Largest piece of (convex hull minus polygon): the opening of a trapping domain."""
    poly = Polygon(_points(truth))
    if not poly.is_valid:
        poly = poly.buffer(0)
    rest = poly.convex_hull.difference(poly)
    if rest.is_empty:
        raise MetricUndefinedError("curve is convex; there is no cavity")
    pieces = list(getattr(rest, "geoms", [rest]))
    return max(pieces, key=lambda g: g.area)


def in_cavity(nodes, truth, tol: float = 0.05) -> np.ndarray:
    """True for nodes within ``tol`` of the cavity region of ``truth``."""
    region = cavity_region(truth)
    pts = _points(nodes)
    return np.array([region.distance(Point(x, y)) <= tol for x, y in pts])


# ---------------------------------------------------------------------------
# Shapes
# ---------------------------------------------------------------------------


def circle(radius: float = 1.0, center: tuple[float, float] = (0.0, 0.0)) -> FourierCurve:
    zc = np.zeros(5, dtype=complex)
    zc[2] = center[0] + 1j * center[1]
    zc[3] = radius
    return FourierCurve.from_z_coeffs(zc, 2 * np.pi * radius)


def resample_parametric(func, dfunc, n: int = 4096, n_modes: int | None = None) -> FourierCurve:
    """Arclength Fourier curve from an analytic 2pi-periodic parametrization.

    ``func(s)`` and ``dfunc(s)`` return the complex coordinate and its
    derivative. Cumulative arclength is integrated spectrally on the grid and
    refined between grid points with Gauss-Legendre quadrature of the exact
    speed, so Newton's method can invert it without O(n^2) work.
    """
    s_grid = 2 * np.pi * np.arange(n) / n
    if orientation_sign(func(s_grid)) < 0:
        return resample_parametric(lambda s: func(-s), lambda s: -dfunc(-s), n, n_modes)
    speed = np.abs(dfunc(s_grid))
    f = np.fft.fft(speed) / n
    m = np.fft.fftfreq(n, 1 / n)
    g = np.zeros_like(f)
    nz = (m != 0) & (np.abs(m) < n / 2)
    g[nz] = f[nz] / (1j * m[nz])
    prim = np.fft.ifft(g) * n
    mean = f[0].real
    length = 2 * np.pi * mean
    ell_grid = mean * s_grid + (prim - prim[0]).real
    h = 2 * np.pi / n
    gx, gw = np.polynomial.legendre.leggauss(16)

    def ell(s):
        j = np.clip(np.floor(s / h).astype(int), 0, n - 1)
        lo = s_grid[j]
        half = 0.5 * (s - lo)
        nodes = lo[:, None] + half[:, None] * (gx[None, :] + 1)
        return ell_grid[j] + half * (np.abs(dfunc(nodes)) @ gw)

    targets = length * np.arange(n) / n
    s = np.interp(targets, np.append(ell_grid, length), np.append(s_grid, 2 * np.pi))
    for _ in range(50):
        step = (ell(s) - targets) / np.abs(dfunc(s))
        s = s - step
        if np.max(np.abs(step)) < 1e-14:
            break
    fz = np.fft.fft(func(s)) / n
    if n_modes is None:
        n_modes = n // 2 - 1 if (n // 2) % 2 == 0 else n // 2
    half = (n_modes - 1) // 2
    idx = np.arange(-half, half + 1) % n
    return trimmed(FourierCurve.from_z_coeffs(fz[idx], length), rel_tol=1e-15)


def orientation_sign(z: np.ndarray) -> float:
    return float(np.sign(np.sum(z.real * np.roll(z.imag, -1) - np.roll(z.real, -1) * z.imag)))


def from_polar(radius_fn, dradius_fn, center=(0.0, 0.0), n: int = 2048) -> FourierCurve:
    """Star-shaped curve r(theta) about ``center``; ``dradius_fn`` is r'(theta)."""
    c0 = center[0] + 1j * center[1]
    return resample_parametric(
        lambda th: c0 + radius_fn(th) * np.exp(1j * th),
        lambda th: (dradius_fn(th) + 1j * radius_fn(th)) * np.exp(1j * th),
        n,
    )


def star(amplitude: float = 0.2, petals: int = 3, radius: float = 1.0, n: int = 2048) -> FourierCurve:
    """r(theta) = radius (1 + amplitude cos(petals theta))."""
    return from_polar(
        lambda th: radius * (1 + amplitude * np.cos(petals * th)),
        lambda th: -radius * amplitude * petals * np.sin(petals * th),
        n=n,
    )


def ellipse(a: float, b: float, n: int = 2048) -> FourierCurve:
    return resample_parametric(
        lambda t: a * np.cos(t) + 1j * b * np.sin(t),
        lambda t: -a * np.sin(t) + 1j * b * np.cos(t),
        n,
    )


def make_cavity(a: float, b: float, alpha: float, n: int = 16384) -> FourierCurve:
    """'C'-shaped obstacle: ellipse about (20, 0) pushed forward by z^(2 alpha).

    The power uses the continuous branch of arg z along the ellipse (the
    ellipse never winds around the origin), and the image is scaled so that
    its largest modulus is one.
    """
    if not (a > 0 and b > 0 and alpha > 0):
        raise ValueError("a, b and alpha must be positive")
    if a >= 20:
        raise ShapeGenerationError("ellipse must not enclose the origin")
    t = 2 * np.pi * np.arange(n) / n
    z = 20 + a * np.cos(t) + 1j * b * np.sin(t)
    scale = np.abs(z).max() ** (2 * alpha)

    def zfun(s):
        return 20 + a * np.cos(s) + 1j * b * np.sin(s)

    def w(s):
        # the principal branch is continuous here because Re z > 0
        return np.exp(2 * alpha * np.log(zfun(s))) / scale

    def dw(s):
        dz = -a * np.sin(s) + 1j * b * np.cos(s)
        return 2 * alpha * w(s) / zfun(s) * dz

    pts = w(t)
    if not is_simple_polygon(np.column_stack([pts.real, pts.imag])):
        raise ShapeGenerationError(f"cavity ({a}, {b}, {alpha}) is self-intersecting")
    curve = resample_parametric(w, dw, n)
    check = curve._grid_values(4 * curve.n_modes + 1)
    if not is_simple_polygon(np.column_stack([check.real, check.imag])):
        raise ShapeGenerationError(f"cavity ({a}, {b}, {alpha}) is self-intersecting")
    return curve


def make_random_circle(rng: np.random.Generator) -> FourierCurve:
    """Circle with R ~ U[0.5, 1.5] and centre ~ U[-0.5, 0.5]^2, drawn in that order."""
    u = rng.random(3)
    return circle(0.5 + u[0], (u[1] - 0.5, u[2] - 0.5))


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------


def format_curve(curve: FourierCurve) -> str:
    lines = [f"{CURVE_FILE_MAGIC} {CURVE_FILE_VERSION} {curve.n_modes} {curve.length:.17g}"]
    for j, cx, cy in zip(curve.modes, curve.coeffs_x, curve.coeffs_y):
        lines.append(f"{j} {cx.real:.17g} {cx.imag:.17g} {cy.real:.17g} {cy.imag:.17g}")
    return "\n".join(lines) + "\n"


def save_curve(curve: FourierCurve, path) -> None:
    Path(path).write_text(format_curve(curve))


def parse_curve(text: str, source: str = "<string>") -> FourierCurve:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CurveParseError(f"{source}: empty curve file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != CURVE_FILE_MAGIC or head[1] != CURVE_FILE_VERSION:
        raise CurveParseError(f"{source}:1: expected header '{CURVE_FILE_MAGIC} {CURVE_FILE_VERSION} N L'")
    try:
        n = int(head[2])
        length = float(head[3])
    except ValueError as exc:
        raise CurveParseError(f"{source}:1: bad mode count or length ({exc})") from None
    if len(lines) - 1 != n:
        raise CurveParseError(f"{source}: header announces {n} modes, found {len(lines) - 1} rows")
    expected = _centered_modes(n)
    cx = np.empty(n, dtype=complex)
    cy = np.empty(n, dtype=complex)
    for i, line in enumerate(lines[1:]):
        fields = line.split()
        lineno = i + 2
        if len(fields) != 5:
            raise CurveParseError(f"{source}:{lineno}: expected 5 fields, got {len(fields)}")
        try:
            j = int(fields[0])
            vals = [float(v) for v in fields[1:]]
        except ValueError as exc:
            raise CurveParseError(f"{source}:{lineno}: {exc}") from None
        if j != expected[i]:
            raise CurveParseError(f"{source}:{lineno}: mode {j} out of order (expected {expected[i]})")
        cx[i] = complex(vals[0], vals[1])
        cy[i] = complex(vals[2], vals[3])
    try:
        return FourierCurve(cx, cy, length)
    except CurveError as exc:
        raise CurveParseError(f"{source}: {exc}") from None


def load_curve(path) -> FourierCurve:
    path = Path(path)
    return parse_curve(path.read_text(), str(path))


def fixture_path(name: str) -> Path:
    """Path of a shipped coefficient file (e.g. ``simple_plane``)."""
    return Path(__file__).parent / "data" / f"{name}.fc"


def load_fixture(name: str) -> FourierCurve:
    return load_curve(fixture_path(name))


def signed_area(nodes: np.ndarray) -> float:
    x, y = nodes[:, 0], nodes[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def nodes_of(curves: Sequence[FourierCurve], k: float) -> list[np.ndarray]:
    return [sample_equispaced(c, k).nodes for c in curves]
