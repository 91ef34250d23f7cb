"""Derivative of the coefficient-to-DtN map, its adjoint, and residuals.

For a coefficient field c with boundary-indicator solutions u_p (the solution
bank), the derivative in direction dc acts on boundary data pairs as

    <DF(dc) g, h> = omega^2 * sum_cells dc_cell * avg(u^g u^h) * h^2,

with products evaluated at nodes and averaged per cell. In matrix form
DF(dc) = omega^2 U^T diag(s) U with s the mass lumping of dc, so DF is exactly
the derivative of the assembled DtN matrix and the adjoint

    T(x) = omega^2 * sum_pq (w_minus R w_minus)_pq u_p(x) u_q(x)

is its exact transpose under the weighted Hilbert-Schmidt data product and the
cell-area field product: the dot-product test holds to rounding. One bank per
iterate suffices; it is a byproduct of the DtN assembly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import Grid, NodalField, PwcField, l2_norm, mass_scatter_matrix
from .errors import DiscretizationMismatchError
from .forward import (
    BoundaryWeights,
    DtnMatrix,
    build_boundary_weights,
    dtn_data_norm,
    dtn_difference,
    dtn_for_field,
)

__all__ = [
    "SolutionBank",
    "Residual",
    "residual_from",
    "bank_for_field",
    "apply_df",
    "apply_df_adjoint",
    "df_norm_probe",
    "lipschitz_df_probe",
    "indicator_probes",
]


@dataclass(frozen=True, eq=False)
class SolutionBank:
    """Cached boundary-indicator solutions for one field and frequency.

    solutions has shape (n_nodes, nb); column p solves the interior equation
    with the p-th boundary indicator as Dirichlet data.
    """

    grid: Grid
    omega2: float
    solutions: np.ndarray
    weights: BoundaryWeights
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        u = np.ascontiguousarray(self.solutions, dtype=float)
        if u.shape != (self.grid.n_nodes, self.grid.n_boundary):
            raise DiscretizationMismatchError(
                f"bank must be (n_nodes, nb) = ({self.grid.n_nodes}, {self.grid.n_boundary}), "
                f"got {u.shape}"
            )
        u.setflags(write=False)
        object.__setattr__(self, "solutions", u)

    def solution_for(self, g: np.ndarray) -> NodalField:
        """Solution with Dirichlet data g, as a linear combination of bank columns."""
        return NodalField(self.grid, self.solutions @ np.asarray(g, dtype=float))


@dataclass(frozen=True, eq=False)
class Residual:
    """DtN-space residual F(c) - y with its data norm attached."""

    matrix: np.ndarray
    weights: BoundaryWeights
    norm: float = None  # type: ignore[assignment]

    def __post_init__(self):
        mat = np.ascontiguousarray(self.matrix, dtype=float)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "norm", dtn_data_norm(mat, self.weights))


def residual_from(current: DtnMatrix, data: DtnMatrix) -> Residual:
    return Residual(matrix=dtn_difference(current, data), weights=current.weights)


def bank_for_field(c2inv: PwcField, omega2: float,
                   weights: BoundaryWeights | None = None,
                   guard_bounds: tuple[float, float] | None = None):
    """Assemble the DtN and its solution bank for one field (one factorization)."""
    weights = build_boundary_weights(c2inv.grid) if weights is None else weights
    dtn, solutions = dtn_for_field(c2inv, omega2, weights=weights,
                                   return_solutions=True, guard_bounds=guard_bounds)
    bank = SolutionBank(grid=c2inv.grid, omega2=omega2, solutions=solutions,
                        weights=weights, meta=dict(dtn.meta))
    return dtn, bank


def _delta_cells(bank: SolutionBank, delta) -> np.ndarray:
    if isinstance(delta, PwcField):
        if delta.grid.m != bank.grid.m:
            raise DiscretizationMismatchError("perturbation lives on a different grid")
        return delta.cell_values()
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (bank.grid.n_cells,):
        raise DiscretizationMismatchError(
            f"expected a PwcField or {bank.grid.n_cells} cell values, got shape {delta.shape}"
        )
    return delta


def apply_df(bank: SolutionBank, delta) -> np.ndarray:
    """Directional derivative of the DtN matrix; bilinear in the perturbation."""
    cells = _delta_cells(bank, delta)
    s = np.asarray(mass_scatter_matrix(bank.grid) @ cells)
    u = bank.solutions
    return bank.omega2 * ((u * s[:, None]).T @ u)


def apply_df_adjoint(bank: SolutionBank, residual: Residual | np.ndarray) -> NodalField:
    """Adjoint of the derivative under the data product: the descent direction field.

    The duality map of the Hilbert data space is the identity, so the input is
    the residual matrix itself.
    """
    if isinstance(residual, Residual):
        if not residual.weights.compatible(bank.weights):
            raise DiscretizationMismatchError("residual weights do not match the bank")
        mat = residual.matrix
    else:
        mat = np.asarray(residual, dtype=float)
        if mat.shape != (bank.weights.nb, bank.weights.nb):
            raise DiscretizationMismatchError(
                f"residual must be {bank.weights.nb} square, got {mat.shape}"
            )
    wm = bank.weights.w_minus
    pulled = wm @ mat @ wm
    u = bank.solutions
    values = bank.omega2 * np.einsum("np,pq,nq->n", u, pulled, u, optimize=True)
    return NodalField(bank.grid, values)


def indicator_probes(partition) -> list[PwcField]:
    """One-region indicator fields of a partition (unit coefficient on one region)."""
    probes = []
    for j in range(partition.n_regions):
        coeffs = np.zeros(partition.n_regions)
        coeffs[j] = 1.0
        probes.append(PwcField(partition, coeffs, (1e-12, 1.0)))
    return probes


def df_norm_probe(bank: SolutionBank, probes) -> float:
    """Largest ||DF(delta)||_Y / ||delta||_L2 over the probe directions."""
    best = 0.0
    for delta in probes:
        denom = l2_norm(delta) if isinstance(delta, PwcField) else float(
            np.sqrt(bank.grid.h ** 2 * np.sum(np.asarray(delta) ** 2)))
        if denom == 0:
            continue
        ratio = dtn_data_norm(apply_df(bank, delta), bank.weights) / denom
        best = max(best, ratio)
    return best


def lipschitz_df_probe(c1: PwcField, c2: PwcField, omega2: float,
                       weights: BoundaryWeights | None = None,
                       probes=None) -> float:
    """Estimate ||DF(c1) - DF(c2)|| by probing both derivatives.

    Probes default to the region indicators of c1's partition; the result is
    the largest Y-norm of the difference per unit perturbation norm. Used to
    calibrate the derivative Lipschitz coefficient (growth omega^4).
    """
    if c1.grid.m != c2.grid.m:
        raise DiscretizationMismatchError("fields live on different grids")
    weights = build_boundary_weights(c1.grid) if weights is None else weights
    _, bank1 = bank_for_field(c1, omega2, weights=weights)
    _, bank2 = bank_for_field(c2, omega2, weights=weights)
    if probes is None:
        probes = indicator_probes(c1.partition)
    best = 0.0
    for delta in probes:
        denom = l2_norm(delta)
        if denom == 0:
            continue
        diff = apply_df(bank1, delta) - apply_df(bank2, delta)
        best = max(best, dtn_data_norm(diff, weights) / denom)
    return best
