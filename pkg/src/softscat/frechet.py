"""Jacobian of the forward map with respect to normal boundary perturbations.

Column l is the derivative of the receiver data when the boundary moves by
h_l(t) nu(t). It is the scattered field of the same exterior problem with
Dirichlet data -h_l d(u_tot)/d(nu), so the LU of the forward system serves
every column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curvekit import FourierCurve, apply_normal_update, is_admissible, perturbation_basis, sample_equispaced
from .forward import (
    ForwardSolution,
    ScatteringSetup,
    evaluation_matrix,
    forward_map,
    solve_forward,
    total_field_normal_derivative,
)


class OracleDegenerateError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class JacobianMatrix:
    """Complex (N_d N_r) x (2 N_h + 1) matrix; rows ordered like ScatteringData."""

    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.shape[1] % 2 == 0:
            raise ValueError("Jacobian column count must be odd")

    @property
    def n_h(self) -> int:
        return (self.matrix.shape[1] - 1) // 2

    def __matmul__(self, c):
        return self.matrix @ np.asarray(c, dtype=float)

    def stacked(self) -> np.ndarray:
        """Real matrix [Re J; Im J]."""
        return np.vstack([self.matrix.real, self.matrix.imag])


def n_h_rule(k: float) -> int:
    """Number of perturbation modes: max(10, floor(2k))."""
    return max(10, int(math.floor(2 * k)))


def jacobian(sol: ForwardSolution, n_h: int | None = None, normal_derivative: np.ndarray | None = None) -> JacobianMatrix:
    """Frechet Jacobian from a forward solution (its factorization is reused)."""
    setup = sol.setup
    k = setup.k
    sampled = sol.sampled
    n_h = n_h if n_h is not None else n_h_rule(k)
    if normal_derivative is None:
        normal_derivative = total_field_normal_derivative(sampled, k, setup.directions, ops=sol.ops)
    basis = perturbation_basis(sampled.t, sampled.length, n_h)  # (N, C)
    n_cols = basis.shape[1]
    out = np.empty((setup.n_directions, setup.n_receivers, n_cols), dtype=complex)
    evaluator = sol.extra.get("evaluator")
    if evaluator is None:
        evaluator = evaluation_matrix(sampled, setup.receivers, k)
    for col in range(n_cols):
        rhs = -basis[:, col][:, None] * normal_derivative  # (N, N_d)
        out[:, :, col] = (evaluator @ sol.fact.solve(rhs)).T
    return JacobianMatrix(out.reshape(setup.size, n_cols))


def fd_jacobian(curve: FourierCurve, setup: ScatteringSetup, n_h: int, delta: float = 1e-4, n_nodes: int | None = None) -> JacobianMatrix:
    """Central differences of the forward map along each h_l nu (test oracle)."""
    k = setup.k
    sampled = sample_equispaced(curve, k)
    n_cols = 2 * n_h + 1
    cols = []
    for col in range(n_cols):
        e = np.zeros(n_cols)
        e[col] = delta
        plus = apply_normal_update(curve, e, k, sampled)
        minus = apply_normal_update(curve, -e, k, sampled)
        for c in (plus, minus):
            if not is_admissible(c, k):
                raise OracleDegenerateError(f"perturbed curve inadmissible for column {col}")
        fp = forward_map(plus, setup, n_nodes).values
        fm = forward_map(minus, setup, n_nodes).values
        cols.append((fp - fm) / (2 * delta))
    return JacobianMatrix(np.column_stack(cols))


def jacobian_for(curve: FourierCurve, setup: ScatteringSetup, n_h: int | None = None) -> JacobianMatrix:
    sol = solve_forward(curve, setup, with_normal_operator=True)
    return jacobian(sol, n_h)
