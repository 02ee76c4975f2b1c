"""Exterior sound-soft scattering by a combined-field integral equation.

The scattered field is represented as u = (D + ik S)[sigma] and the density
solves

    sigma/2 + D[sigma] + ik S[sigma] = -u_inc   on the boundary.

Discretization is Nystrom on equispaced arclength nodes. The logarithmic
parts of the S, D and S' kernels are split off and integrated with the
spectrally accurate periodic log-quadrature of Kress; the remaining smooth
parts use the trapezoidal rule with analytic diagonal limits.

Kernel conventions (G = i/4 H0(k r), nu outward):

    S   : G(x, y)
    D   : dG/dnu_y = ik/4 H1(kr) (x-y).nu_y / r     -> diagonal -kappa/(4 pi)
    S'  : dG/dnu_x = -ik/4 H1(kr) (x-y).nu_x / r    -> diagonal -kappa/(4 pi)
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import special

from .curvekit import FourierCurve, SampledCurve, node_count, sample_equispaced
from .specfun import hankel01, hankel1_sequence

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.57721566490153286061
MAX_DENSE_NODES = 10_000
MIN_POINTS_PER_WAVELENGTH = 10
NEAR_FIELD_SPACINGS = 5


class ResolutionError(ValueError):
    pass


class FactorizationError(RuntimeError):
    pass


class ContractError(ValueError):
    pass


class NearFieldError(ValueError):
    pass


@dataclass(frozen=True)
class ScatteringSetup:
    """Frequency, incident directions and receiver circle.

    Defaults follow floor(10 k) directions and as many receivers on a circle
    of radius 10.
    """

    k: float
    n_directions: int | None = None
    n_receivers: int | None = None
    radius: float = 10.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("frequency must be positive")
        nd = self.n_directions if self.n_directions is not None else int(math.floor(10 * self.k))
        nr = self.n_receivers if self.n_receivers is not None else nd
        if nd < 1 or nr < 1:
            raise ValueError("need at least one direction and one receiver")
        object.__setattr__(self, "n_directions", nd)
        object.__setattr__(self, "n_receivers", nr)

    @property
    def direction_angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_directions) / self.n_directions

    @property
    def directions(self) -> np.ndarray:
        th = self.direction_angles
        return np.column_stack([np.cos(th), np.sin(th)])

    @property
    def receiver_angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_receivers) / self.n_receivers

    @property
    def receivers(self) -> np.ndarray:
        th = self.receiver_angles
        return self.radius * np.column_stack([np.cos(th), np.sin(th)])

    @property
    def size(self) -> int:
        return self.n_directions * self.n_receivers


@dataclass(frozen=True, eq=False)
class ScatteringData:
    """Scattered field samples, direction-major: index n * N_r + r."""

    values: np.ndarray
    n_directions: int
    n_receivers: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).ravel()
        object.__setattr__(self, "values", v)
        if v.size != self.n_directions * self.n_receivers:
            raise ValueError(
                f"expected {self.n_directions * self.n_receivers} values, got {v.size}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite scattering data")

    @classmethod
    def from_grid(cls, grid: np.ndarray) -> "ScatteringData":
        """From an (N_d, N_r) array."""
        grid = np.asarray(grid)
        return cls(grid.ravel(), grid.shape[0], grid.shape[1])

    def grid(self) -> np.ndarray:
        return self.values.reshape(self.n_directions, self.n_receivers)

    def matches(self, setup: ScatteringSetup) -> bool:
        return self.n_directions == setup.n_directions and self.n_receivers == setup.n_receivers

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


# ---------------------------------------------------------------------------
# Quadrature and kernels
# ---------------------------------------------------------------------------


def kress_weights(n: int) -> np.ndarray:
    """R_m with  int_0^2pi ln(4 sin^2((t_i - s)/2)) f(s) ds ~ sum_j R_{i-j} f_j."""
    q = np.fft.fftfreq(n, 1 / n)
    lam = np.zeros(n)
    nz = q != 0
    lam[nz] = -1.0 / np.abs(q[nz])
    if n % 2 == 0:
        lam[n // 2] = -2.0 / n
    return 2 * np.pi * np.fft.ifft(lam).real


def _circulant(vec: np.ndarray) -> np.ndarray:
    n = vec.size
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return vec[idx]


@dataclass
class BoundaryOperators:
    """Nystrom matrices on one sampled curve at one frequency (ds included)."""

    sampled: SampledCurve
    k: float
    S: np.ndarray | None = None
    D: np.ndarray | None = None
    Sp: np.ndarray | None = None


def check_resolution(sampled: SampledCurve, k: float) -> None:
    n = sampled.n
    if n > MAX_DENSE_NODES:
        raise ResolutionError(f"{n} nodes exceeds the dense-solve limit of {MAX_DENSE_NODES}")
    ppw = n * 2 * np.pi / (k * sampled.length)
    if ppw < MIN_POINTS_PER_WAVELENGTH:
        raise ResolutionError(
            f"k={k:g} under-resolved: {ppw:.1f} points per wavelength with {n} nodes"
        )


def assemble(sampled: SampledCurve, k: float, which: tuple[str, ...] = ("S", "D")) -> BoundaryOperators:
    check_resolution(sampled, k)
    n = sampled.n
    x = sampled.nodes
    nu = sampled.normals
    speed = sampled.length / (2 * np.pi)
    w = 2 * np.pi / n

    dx = x[:, 0][:, None] - x[:, 0][None, :]
    dy = x[:, 1][:, None] - x[:, 1][None, :]
    r = np.hypot(dx, dy)
    diag = np.eye(n, dtype=bool)
    r[diag] = 1.0
    kr = k * r
    logsin = _circulant(np.log(4 * np.sin(np.pi * np.arange(n) / n) ** 2 + diag[0]))
    logsin[diag] = 0.0
    quad_r = _circulant(kress_weights(n))

    ops = BoundaryOperators(sampled=sampled, k=k)
    need_h1 = "D" in which or "Sp" in which
    pair = hankel01(kr)
    if "S" in which:
        j0 = pair.h0.real
        full = 0.25j * pair.h0
        k1 = -j0 / (4 * np.pi)
        k2 = full - k1 * logsin
        k1[diag] = -1 / (4 * np.pi)
        k2[diag] = 0.25j - (np.log(k * speed / 2) + EULER_GAMMA) / (2 * np.pi)
        ops.S = speed * (quad_r * k1 + w * k2)
    if need_h1:
        j1_over_r = special.j1(kr) / r
        h1_over_r = pair.h1 / r
        for name, sign, normal_index in (("D", 1.0, "y"), ("Sp", -1.0, "x")):
            if name not in which:
                continue
            if normal_index == "y":
                proj = dx * nu[:, 0][None, :] + dy * nu[:, 1][None, :]
            else:
                proj = dx * nu[:, 0][:, None] + dy * nu[:, 1][:, None]
            full = sign * 0.25j * k * h1_over_r * proj
            k1 = -sign * k / (4 * np.pi) * j1_over_r * proj
            k2 = full - k1 * logsin
            k1[diag] = 0.0
            k2[diag] = -sampled.curvature / (4 * np.pi)
            setattr(ops, name, speed * (quad_r * k1 + w * k2))
    return ops


def build_system(sampled: SampledCurve, k: float, ops: BoundaryOperators | None = None) -> np.ndarray:
    """Matrix of I/2 + D + ik S."""
    ops = ops if ops is not None and ops.S is not None and ops.D is not None else assemble(sampled, k)
    return 0.5 * np.eye(sampled.n) + ops.D + 1j * k * ops.S


def build_normal_system(sampled: SampledCurve, k: float, ops: BoundaryOperators | None = None) -> np.ndarray:
    """Matrix of I/2 + S' - ik S (for the total-field normal derivative)."""
    if ops is None or ops.S is None or ops.Sp is None:
        ops = assemble(sampled, k, ("S", "Sp"))
    return 0.5 * np.eye(sampled.n) + ops.Sp - 1j * k * ops.S


@dataclass(eq=False)
class SystemFactorization:
    """Dense LU of a Nystrom matrix; reused for every right-hand side."""

    lu: np.ndarray
    piv: np.ndarray
    sampled: SampledCurve | None = None
    k: float | None = None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return sla.lu_solve((self.lu, self.piv), rhs)

    @property
    def n(self) -> int:
        return self.lu.shape[0]

    def pivot_ratio(self) -> float:
        d = np.abs(np.diag(self.lu))
        top = d.max()
        return float(d.min() / top) if top > 0 else 0.0


def factorize(matrix: np.ndarray, sampled: SampledCurve | None = None, k: float | None = None) -> SystemFactorization:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise FactorizationError("matrix must be square")
    if not np.all(np.isfinite(matrix)):
        raise FactorizationError("matrix has non-finite entries")
    with warnings.catch_warnings():
        # exact singularity is reported below through the pivot check
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(matrix, check_finite=False)
    fact = SystemFactorization(lu=lu, piv=piv, sampled=sampled, k=k)
    if not fact.pivot_ratio() > 1e3 * np.finfo(float).eps:
        raise FactorizationError("numerically singular matrix")
    return fact


def incident_field(points: np.ndarray, k: float, directions: np.ndarray) -> np.ndarray:
    """exp(ik x.d), shape (n_points, n_directions)."""
    return np.exp(1j * k * points @ directions.T)


def _check_fact(fact: SystemFactorization, sampled: SampledCurve | None, k: float) -> None:
    if fact.k is not None and not math.isclose(fact.k, k, rel_tol=0, abs_tol=1e-14):
        raise ContractError(f"factorization built for k={fact.k}, used with k={k}")
    if sampled is not None and fact.sampled is not None and fact.sampled is not sampled:
        if fact.sampled.n != sampled.n or not np.array_equal(fact.sampled.nodes, sampled.nodes):
            raise ContractError("factorization built for a different curve")


def solve_densities(fact: SystemFactorization, setup: ScatteringSetup, amplitude: float = 1.0) -> np.ndarray:
    """Densities (N, N_d) for plane waves from every setup direction."""
    _check_fact(fact, None, setup.k)
    if fact.sampled is None:
        raise ContractError("factorization has no attached curve")
    rhs = -amplitude * incident_field(fact.sampled.nodes, setup.k, setup.directions)
    return fact.solve(rhs)


def evaluation_matrix(sampled: SampledCurve, points: np.ndarray, k: float) -> np.ndarray:
    """Trapezoidal discretization of D + ik S from the nodes to ``points``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    x = sampled.nodes
    nu = sampled.normals
    dx = points[:, 0][:, None] - x[:, 0][None, :]
    dy = points[:, 1][:, None] - x[:, 1][None, :]
    r = np.hypot(dx, dy)
    if r.min() < NEAR_FIELD_SPACINGS * sampled.spacing:
        raise NearFieldError(
            f"evaluation point within {NEAR_FIELD_SPACINGS} node spacings of the boundary"
        )
    pair = hankel01(k * r)
    proj = dx * nu[:, 0][None, :] + dy * nu[:, 1][None, :]
    kernel = 0.25j * k * pair.h1 * proj / r - 0.25 * k * pair.h0
    return sampled.spacing * kernel


def eval_scattered(sampled: SampledCurve, density: np.ndarray, points: np.ndarray, k: float) -> np.ndarray:
    """Evaluate (D + ik S)[density] at points well away from the boundary.

    ``density`` may be (N,) or (N, m); the result has matching trailing shape.
    """
    return evaluation_matrix(sampled, points, k) @ density


def total_field_normal_derivative(
    sampled: SampledCurve,
    k: float,
    directions: np.ndarray,
    fact_normal: SystemFactorization | None = None,
    ops: BoundaryOperators | None = None,
) -> np.ndarray:
    """d u_tot / d nu at the nodes, one column per incident direction."""
    if fact_normal is None:
        if ops is not None and ops.S is not None and ops.Sp is None:
            ops.Sp = assemble(sampled, k, ("Sp",)).Sp
        fact_normal = factorize(build_normal_system(sampled, k, ops), sampled, k)
    else:
        _check_fact(fact_normal, sampled, k)
    directions = np.atleast_2d(directions)
    uinc = incident_field(sampled.nodes, k, directions)
    dn = 1j * k * (sampled.normals @ directions.T) * uinc
    return fact_normal.solve(dn - 1j * k * uinc)


@dataclass(eq=False)
class ForwardSolution:
    """Everything a forward solve produces, kept for Jacobian reuse."""

    curve: FourierCurve
    sampled: SampledCurve
    setup: ScatteringSetup
    ops: BoundaryOperators
    fact: SystemFactorization
    densities: np.ndarray
    data: ScatteringData
    extra: dict = field(default_factory=dict)


def solve_forward(
    curve: FourierCurve,
    setup: ScatteringSetup,
    n_nodes: int | None = None,
    sampled: SampledCurve | None = None,
    with_normal_operator: bool = False,
) -> ForwardSolution:
    if sampled is None:
        n = node_count(curve.length, setup.k)
        if n_nodes is not None:
            n = max(n, n_nodes)
        sampled = sample_equispaced(curve, setup.k, n)
    if np.max(np.hypot(*sampled.nodes.T)) >= setup.radius:
        raise ValueError("receivers must lie outside the obstacle's bounding disk")
    which = ("S", "D", "Sp") if with_normal_operator else ("S", "D")
    ops = assemble(sampled, setup.k, which)
    fact = factorize(build_system(sampled, setup.k, ops), sampled, setup.k)
    dens = solve_densities(fact, setup)
    evaluator = evaluation_matrix(sampled, setup.receivers, setup.k)
    vals = evaluator @ dens  # (N_r, N_d)
    data = ScatteringData(vals.T.ravel(), setup.n_directions, setup.n_receivers)
    return ForwardSolution(curve, sampled, setup, ops, fact, dens, data, {"evaluator": evaluator})


def forward_map(curve: FourierCurve, setup: ScatteringSetup, n_nodes: int | None = None) -> ScatteringData:
    """Scattered field at all receivers for all directions (direction-major)."""
    return solve_forward(curve, setup, n_nodes=n_nodes).data


# ---------------------------------------------------------------------------
# Analytic disk solution (validation)
# ---------------------------------------------------------------------------


def circle_oracle(
    radius: float,
    setup: ScatteringSetup,
    center: tuple[float, float] = (0.0, 0.0),
    extra_terms: int = 0,
) -> ScatteringData:
    """Separation-of-variables field of a sound-soft disk at the receivers."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    k = setup.k
    n_max = int(math.ceil(k * radius)) + 40 + extra_terms
    n = np.arange(n_max + 1)
    ratio = special.jv(n, k * radius) / hankel1_sequence(n_max, k * radius)
    rec = setup.receivers - np.asarray(center)[None, :]
    rr = np.hypot(rec[:, 0], rec[:, 1])
    th = np.arctan2(rec[:, 1], rec[:, 0])
    out = np.empty((setup.n_directions, setup.n_receivers), dtype=complex)
    h_rec = np.array([hankel1_sequence(n_max, k * x) for x in rr])  # (N_r, n)
    coef = (1j ** n) * ratio
    coef[1:] *= 2
    phase = np.exp(1j * k * (np.asarray(center) @ setup.directions.T))
    for i, thd in enumerate(setup.direction_angles):
        cosn = np.cos(np.outer(th - thd, n))
        out[i] = -(h_rec * cosn) @ coef * phase[i]
    return ScatteringData.from_grid(out)


def circle_normal_derivative(radius: float, k: float, node_angles: np.ndarray, direction_angle: float) -> np.ndarray:
    """d u_tot/d r on a sound-soft disk: -(2i/(pi a)) sum_n i^n e^{in phi} / H_n(ka)."""
    n_max = int(math.ceil(k * radius)) + 40
    n = np.arange(n_max + 1)
    h = hankel1_sequence(n_max, k * radius)
    coef = (1j ** n) / h
    coef[1:] *= 2
    phi = np.asarray(node_angles) - direction_angle
    return -(2j / (np.pi * radius)) * (np.cos(np.outer(phi, n)) @ coef)
