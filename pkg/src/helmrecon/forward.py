"""Five-point Helmholtz solver, DtN matrix assembly, and the frequency guard.

Discrete model on the unit square: at interior nodes the equation is the
lumped form  L u - omega^2 diag(d(c)) u = M f, where L is the grid graph
Laplacian (h^2 times the five-point -Delta_h), d(c) is the cell-to-node mass
lumping of the coefficient field c = c^-2, and M is the same lumping of 1.
Boundary nodes carry Dirichlet values along a single closed loop.

The DtN matrix maps boundary Dirichlet coefficients to variational Neumann
coefficients: column p is (minus) the residual of the full system applied to
the solution with the p-th boundary indicator as data, read off at boundary
rows. Defining the flux variationally (not by one-sided differences) makes the
interior-boundary product identity

    omega^2 * sum_cells (c1 - c2) * avg(u1 u2) * h^2  =  h^T (Lam1 - Lam2) g

hold to solver precision for any two coefficient fields, which the derivative
and stability layers rely on.

The data-space norm is a weighted Hilbert-Schmidt norm: boundary Sobolev
weight operators of orders +-1/2 are built from the spectral calculus of the
periodic boundary-loop Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import (
    Grid,
    NodalField,
    PwcField,
    boundary_loop,
    grid_laplacian,
    interior_nodes,
    mass_scatter_matrix,
    node_quad_weights,
)
from .errors import (
    AdmissibilityError,
    ConfigurationError,
    DiscretizationMismatchError,
    NearEigenfrequencyError,
)

__all__ = [
    "SpectrumWindow",
    "spectrum_guard",
    "unit_square_eigenvalues",
    "BoundaryWeights",
    "build_boundary_weights",
    "HelmholtzOperator",
    "DtnMatrix",
    "assemble_dtn",
    "dtn_data_norm",
    "dtn_difference",
    "dtn_for_field",
    "save_dtn",
    "load_dtn",
    "save_weights",
    "load_weights",
]

_PIVOT_RTOL = 1e-13
_SOLVE_RTOL = 1e-10


def unit_square_eigenvalues(upto: float) -> np.ndarray:
    """Distinct Dirichlet eigenvalues pi^2 (p^2 + q^2) of -Delta on the unit
    square, ascending, covering (0, upto] plus the first value above."""
    cap = max(2, int(np.ceil(upto / np.pi ** 2)) + 1)
    pmax = int(np.ceil(np.sqrt(cap))) + 1
    p = np.arange(1, pmax + 1)
    sums = np.unique((p[:, None] ** 2 + p[None, :] ** 2).ravel())
    lams = np.pi ** 2 * sums[sums <= cap + 1]
    above = lams[lams > upto]
    keep = lams[lams <= upto]
    if above.size == 0:
        # cap was generous; extend until one eigenvalue exceeds upto
        return unit_square_eigenvalues(upto * 1.5 + 10.0)
    return np.concatenate([keep, above[:1]])


@dataclass(frozen=True)
class SpectrumWindow:
    """Certificate that omega^2 avoids every forbidden band [lam_n/B2, lam_n/B1].

    kind 'low' means 0 < omega^2 < lam_1/B2 with window = (0, lam_1/B2);
    kind 'band' means lam_n/B1 < omega^2 < lam_{n+1}/B2 with that window and
    band_index = n (1-based). distance is to the nearest forbidden band.
    """

    kind: str
    window: tuple[float, float]
    distance: float
    band_index: int | None
    eigenvalues: np.ndarray


def spectrum_guard(omega2: float, b1: float, b2: float) -> SpectrumWindow:
    """Check omega^2 against the forbidden bands induced by the coefficient box.

    For any admissible field the n-th Dirichlet eigenvalue of the weighted
    problem lies in [lam_n/B2, lam_n/B1], so omega^2 outside every such band is
    safe for the whole box. Band membership (closed bands) raises
    AdmissibilityError naming the band.
    """
    if not (0 < b1 <= b2):
        raise ConfigurationError(f"bounds must satisfy 0 < b1 <= b2, got ({b1}, {b2})")
    if omega2 <= 0:
        raise AdmissibilityError(f"omega^2 must be positive, got {omega2}")
    lams = unit_square_eigenvalues(omega2 * b2)
    lo = lams / b2
    hi = lams / b1
    inside = (lo <= omega2) & (omega2 <= hi)
    if inside.any():
        n = int(np.nonzero(inside)[0][0]) + 1
        raise AdmissibilityError(
            f"omega^2 = {omega2} lies in forbidden band {n}: "
            f"[{lo[n - 1]}, {hi[n - 1]}] (eigenvalue {lams[n - 1]}, bounds ({b1}, {b2}))"
        )
    if omega2 < lo[0]:
        return SpectrumWindow(
            kind="low",
            window=(0.0, float(lo[0])),
            distance=float(lo[0] - omega2),
            band_index=None,
            eigenvalues=lams,
        )
    below = np.nonzero(hi < omega2)[0]
    n = int(below[-1])
    if n + 1 >= lams.size or omega2 >= lo[n + 1]:
        # should be unreachable: the eigenvalue list extends past omega2*b2
        raise AdmissibilityError(f"omega^2 = {omega2} could not be certified against the spectrum")
    return SpectrumWindow(
        kind="band",
        window=(float(hi[n]), float(lo[n + 1])),
        distance=float(min(omega2 - hi[n], lo[n + 1] - omega2)),
        band_index=n + 1,
        eigenvalues=lams,
    )


@dataclass(frozen=True, eq=False)
class BoundaryWeights:
    """SPD weight operators realizing the boundary Sobolev norms of order +-1/2.

    With L_b = V M V^T the periodic boundary-loop Laplacian (spacing h_b),
       w_plus  = V (I+M)^{+1/2} V^T h_b,
       w_minus = V (I+M)^{-1/2} V^T h_b,
    so w_plus w_minus = h_b^2 I. w_minus_half is the symmetric square root of
    w_minus used by the data norm.
    """

    grid: Grid
    h_b: float
    w_plus: np.ndarray
    w_minus: np.ndarray
    w_minus_half: np.ndarray

    @property
    def nb(self) -> int:
        return self.w_plus.shape[0]

    def compatible(self, other: "BoundaryWeights") -> bool:
        return self.nb == other.nb and self.h_b == other.h_b


def build_boundary_weights(grid: Grid) -> BoundaryWeights:
    nb = grid.n_boundary
    hb = grid.h
    lb = np.zeros((nb, nb))
    idx = np.arange(nb)
    lb[idx, idx] = 2.0
    lb[idx, (idx + 1) % nb] = -1.0
    lb[idx, (idx - 1) % nb] = -1.0
    lb /= hb ** 2
    mu, v = np.linalg.eigh(lb)
    mu = np.clip(mu, 0.0, None)

    def calculus(power, scale):
        w = (v * (1.0 + mu) ** power) @ v.T * scale
        return 0.5 * (w + w.T)

    return BoundaryWeights(
        grid=grid,
        h_b=hb,
        w_plus=calculus(0.5, hb),
        w_minus=calculus(-0.5, hb),
        w_minus_half=calculus(-0.25, np.sqrt(hb)),
    )


class HelmholtzOperator:
    """Assembled interior system for one coefficient field and frequency.

    Runs the spectrum guard for the field's coefficient box at construction,
    factors the interior block once, and reuses the factorization for every
    Dirichlet solve (all DtN columns share it).
    """

    def __init__(self, c2inv: PwcField, omega2: float,
                 guard_bounds: tuple[float, float] | None = None):
        if omega2 <= 0:
            raise AdmissibilityError(f"omega^2 must be positive, got {omega2}")
        b1, b2 = guard_bounds if guard_bounds is not None else c2inv.bounds
        self.window = spectrum_guard(omega2, b1, b2)
        self.grid = c2inv.grid
        self.c2inv = c2inv
        self.omega2 = float(omega2)
        self.mass_diag = np.asarray(mass_scatter_matrix(self.grid) @ c2inv.cell_values())
        self.matrix = (grid_laplacian(self.grid)
                       - self.omega2 * sp.diags(self.mass_diag)).tocsr()
        self.interior = interior_nodes(self.grid)
        self.loop = boundary_loop(self.grid)
        k_ii = self.matrix[self.interior][:, self.interior].tocsc()
        self._k_ib = self.matrix[self.interior][:, self.loop].tocsr()
        self._k_bi = self.matrix[self.loop][:, self.interior].tocsr()
        self._k_bb = self.matrix[self.loop][:, self.loop].toarray()
        try:
            self.lu = spla.splu(k_ii)
        except RuntimeError as exc:
            raise NearEigenfrequencyError(
                f"interior system is singular at omega^2 = {omega2}: {exc}",
                smallest_pivot=0.0,
            ) from exc
        pivots = np.abs(self.lu.U.diagonal())
        self.smallest_pivot = float(pivots.min())
        if self.smallest_pivot < _PIVOT_RTOL * float(pivots.max()):
            raise NearEigenfrequencyError(
                f"omega^2 = {omega2} is numerically at an eigenfrequency of the "
                f"discrete operator (smallest pivot {self.smallest_pivot:.3e})",
                smallest_pivot=self.smallest_pivot,
            )

    def _check_residual(self, rhs: np.ndarray, sol: np.ndarray, k_ii=None) -> None:
        k_ii = self.matrix[self.interior][:, self.interior] if k_ii is None else k_ii
        res = np.linalg.norm(k_ii @ sol - rhs)
        scale = np.linalg.norm(rhs)
        if scale > 0 and res > _SOLVE_RTOL * scale:
            raise NearEigenfrequencyError(
                f"linear solve residual {res / scale:.3e} exceeds {_SOLVE_RTOL} "
                f"(omega^2 = {self.omega2} too close to an eigenfrequency)",
                smallest_pivot=self.smallest_pivot,
            )

    def solve(self, g: np.ndarray | None = None, f: NodalField | np.ndarray | None = None) -> NodalField:
        """Solve with Dirichlet data g (boundary-loop order) and volume source f."""
        nb = self.grid.n_boundary
        g = np.zeros(nb) if g is None else np.asarray(g, dtype=float)
        if g.shape != (nb,):
            raise DiscretizationMismatchError(f"expected {nb} boundary values, got {g.shape}")
        rhs = -(self._k_ib @ g)
        if f is not None:
            fv = f.values if isinstance(f, NodalField) else np.asarray(f, dtype=float)
            rhs = rhs + (node_quad_weights(self.grid) * fv)[self.interior]
        u_i = self.lu.solve(rhs)
        self._check_residual(rhs, u_i)
        u = np.zeros(self.grid.n_nodes)
        u[self.loop] = g
        u[self.interior] = u_i
        return NodalField(self.grid, u)


@dataclass(frozen=True, eq=False)
class DtnMatrix:
    """Discrete DtN operator with the boundary weights defining its data norm.

    lam[q, p] is the variational Neumann coefficient at boundary node q of the
    solution with the p-th boundary indicator as Dirichlet data; symmetric to
    solver precision. meta records the coefficient provenance.
    """

    lam: np.ndarray
    weights: BoundaryWeights
    omega2: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lam = np.ascontiguousarray(self.lam, dtype=float)
        nb = self.weights.nb
        if lam.shape != (nb, nb):
            raise DiscretizationMismatchError(f"DtN must be {nb} x {nb}, got {lam.shape}")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)

    def symmetry_defect(self) -> float:
        scale = np.linalg.norm(self.lam)
        if scale == 0:
            return 0.0
        return float(np.linalg.norm(self.lam - self.lam.T) / scale)


def _one_sided_inward(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Inward neighbor of each boundary-loop node and the 1/distance factor."""
    m = grid.m
    loop = boundary_loop(grid)
    i, j = np.divmod(loop, m)
    ii = i + (i == 0) - (i == m - 1)
    jj = j + (j == 0) - (j == m - 1)
    inward = ii * m + jj
    diag = ((i == 0) | (i == m - 1)) & ((j == 0) | (j == m - 1))
    factor = np.where(diag, 1.0 / np.sqrt(2.0), 1.0)
    return inward, factor


def assemble_dtn(op: HelmholtzOperator, weights: BoundaryWeights | None = None,
                 variant: str = "variational", return_solutions: bool = False):
    """Assemble the DtN matrix; optionally return the full solution bank.

    The bank is the (n_nodes, nb) array of solutions, one column per boundary
    indicator; boundary rows form the identity. variant='one_sided' replaces
    the variational flux with an inward finite difference (for degradation
    experiments only).
    """
    grid = op.grid
    weights = build_boundary_weights(grid) if weights is None else weights
    if weights.grid.m != grid.m:
        raise DiscretizationMismatchError("weights were built for a different grid")
    rhs = -op._k_ib.toarray()
    u_i = op.lu.solve(rhs)
    # residual audit on the whole block
    k_ii = op.matrix[op.interior][:, op.interior]
    block_res = np.linalg.norm(k_ii @ u_i - rhs)
    block_scale = np.linalg.norm(rhs)
    if block_scale > 0 and block_res > _SOLVE_RTOL * block_scale:
        raise NearEigenfrequencyError(
            f"DtN assembly residual {block_res / block_scale:.3e} exceeds {_SOLVE_RTOL}",
            smallest_pivot=op.smallest_pivot,
        )
    nb = grid.n_boundary
    if variant == "variational":
        lam = -(op._k_bb + op._k_bi @ u_i)
    elif variant == "one_sided":
        u_full = np.zeros((grid.n_nodes, nb))
        u_full[op.loop] = np.eye(nb)
        u_full[op.interior] = u_i
        inward, factor = _one_sided_inward(grid)
        lam = (u_full[inward] - u_full[op.loop]) * factor[:, None]
    else:
        raise ConfigurationError(f"unknown DtN variant {variant!r}")
    meta = {
        "n_regions": op.c2inv.partition.n_regions,
        "level": op.c2inv.partition.level,
        "bounds": op.c2inv.bounds,
        "variant": variant,
    }
    dtn = DtnMatrix(lam=lam, weights=weights, omega2=op.omega2, meta=meta)
    if not return_solutions:
        return dtn
    u_full = np.zeros((grid.n_nodes, nb))
    u_full[op.loop] = np.eye(nb)
    u_full[op.interior] = u_i
    return dtn, u_full


def dtn_data_norm(mat: np.ndarray, weights: BoundaryWeights, kind: str = "hs") -> float:
    """Data-space norm of a DtN difference: || W^{1/2} A W^{1/2} || with W the
    order -1/2 weight. kind='hs' (default, the Y norm) or 'op' (largest
    singular value of the same weighted matrix, diagnostic)."""
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (weights.nb, weights.nb):
        raise DiscretizationMismatchError(
            f"matrix shape {mat.shape} does not match weights ({weights.nb})"
        )
    weighted = weights.w_minus_half @ mat @ weights.w_minus_half
    if kind == "hs":
        return float(np.linalg.norm(weighted, "fro"))
    if kind == "op":
        return float(np.linalg.norm(weighted, 2))
    raise ConfigurationError(f"unknown norm kind {kind!r}")


def dtn_difference(a: DtnMatrix, b: DtnMatrix) -> np.ndarray:
    if not a.weights.compatible(b.weights):
        raise DiscretizationMismatchError("DtN matrices carry incompatible weights")
    if a.omega2 != b.omega2:
        raise DiscretizationMismatchError(
            f"DtN matrices taken at different frequencies: {a.omega2} vs {b.omega2}"
        )
    return a.lam - b.lam


def dtn_for_field(c2inv: PwcField, omega2: float, weights: BoundaryWeights | None = None,
                  return_solutions: bool = False, variant: str = "variational",
                  guard_bounds: tuple[float, float] | None = None):
    """One-call forward map: guard, assemble, factor, and build the DtN."""
    op = HelmholtzOperator(c2inv, omega2, guard_bounds=guard_bounds)
    return assemble_dtn(op, weights=weights, variant=variant,
                        return_solutions=return_solutions)


def save_dtn(path, dtn: DtnMatrix) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"dtn {dtn.weights.nb} {float(dtn.omega2)!r}\n")
        for row in dtn.lam:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_dtn(path, weights: BoundaryWeights) -> DtnMatrix:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "dtn":
            raise ConfigurationError(f"{path}: expected 'dtn <nb> <omega2>' header")
        nb, omega2 = int(header[1]), float(header[2])
        if nb != weights.nb:
            raise DiscretizationMismatchError(f"{path}: file nb={nb}, weights nb={weights.nb}")
        lam = np.array([[float(tok) for tok in fh.readline().split()] for _ in range(nb)])
    return DtnMatrix(lam=lam, weights=weights, omega2=omega2, meta={"source": str(path)})


def save_weights(path, weights: BoundaryWeights) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for name, mat in (("wplus", weights.w_plus), ("wminus", weights.w_minus)):
            fh.write(f"{name} {weights.nb}\n")
            for row in mat:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_weights(path, grid: Grid) -> BoundaryWeights:
    expected = grid.n_boundary
    mats = {}
    with open(path, encoding="utf-8") as fh:
        for name in ("wplus", "wminus"):
            header = fh.readline().split()
            if len(header) != 2 or header[0] != name:
                raise ConfigurationError(f"{path}: expected '{name} <nb>' header")
            nb = int(header[1])
            if nb != expected:
                raise DiscretizationMismatchError(f"{path}: file nb={nb}, grid nb={expected}")
            mats[name] = np.array(
                [[float(tok) for tok in fh.readline().split()] for _ in range(nb)]
            )
    w_minus = mats["wminus"]
    mu, v = np.linalg.eigh(w_minus)
    w_minus_half = (v * np.sqrt(np.clip(mu, 0.0, None))) @ v.T
    return BoundaryWeights(
        grid=grid,
        h_b=grid.h,
        w_plus=mats["wplus"],
        w_minus=w_minus,
        w_minus_half=0.5 * (w_minus_half + w_minus_half.T),
    )
