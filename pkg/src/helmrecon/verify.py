"""Independent oracles: identity audits, derivative checks, stability sampling.

These deliberately avoid the code paths they audit where possible: the
interior side of the identity audit is assembled from raw solution banks, the
gradient check differences full forward maps, and the stability sampler works
from pairs of fields and their data distance only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Grid, PwcField, l2_dist, make_uniform_partition, mass_scatter_matrix
from .derivative import apply_df, bank_for_field
from .errors import AdmissibilityError, ConfigurationError
from .forward import build_boundary_weights, dtn_data_norm, dtn_for_field

__all__ = [
    "StabilitySample",
    "LipschitzReport",
    "GradientCheckRow",
    "audit_alessandrini",
    "gradient_check",
    "estimate_lipschitz_constant",
    "write_lipschitz_report",
]


def audit_alessandrini(c1: PwcField, c2: PwcField, omega2: float, trials: int = 50,
                       seed: int = 0, variant: str = "variational",
                       weights=None) -> float:
    """Max relative defect of the interior-boundary product identity.

    For random boundary pairs (g, h), compares
        omega^2 * sum_cells (c1 - c2) * avg(u1 u2) * h^2
    against h^T (Lam1 - Lam2) g, where u1 solves at c1 with data g and u2 at
    c2 with data h. Exactly zero for identical fields.
    """
    if c1.grid.m != c2.grid.m:
        raise ConfigurationError("fields live on different grids")
    grid = c1.grid
    weights = build_boundary_weights(grid) if weights is None else weights
    dcells = c1.cell_values() - c2.cell_values()
    if np.all(dcells == 0):
        return 0.0
    dtn1, u1 = dtn_for_field(c1, omega2, weights=weights, return_solutions=True,
                             variant=variant)
    dtn2, u2 = dtn_for_field(c2, omega2, weights=weights, return_solutions=True,
                             variant=variant)
    s = np.asarray(mass_scatter_matrix(grid) @ dcells)
    rng = np.random.default_rng(seed)
    nb = grid.n_boundary
    worst = 0.0
    for _ in range(trials):
        g = rng.standard_normal(nb)
        h = rng.standard_normal(nb)
        sol1 = u1 @ g
        sol2 = u2 @ h
        lhs = omega2 * float(np.sum(s * sol1 * sol2))
        rhs = float(h @ ((dtn1.lam - dtn2.lam) @ g))
        scale = max(abs(lhs), abs(rhs))
        if scale == 0.0:
            continue
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


@dataclass(frozen=True)
class GradientCheckRow:
    """Per-direction finite-difference report."""

    slope: float
    rel_err_smallest_t: float
    t_values: np.ndarray
    errors: np.ndarray
    passed: bool


def gradient_check(c: PwcField, omega2: float, deltas, t_values=(1e-1, 1e-2, 1e-3),
                   weights=None, slope_min: float = 1.8,
                   rel_tol: float = 1e-5) -> list[GradientCheckRow]:
    """Central-difference audit of the derivative along given directions.

    Per direction, reports the log-log slope of || (F(c+t d) - F(c-t d))/(2t)
    - DF(d) ||_Y against t (central differencing gives slope 2) and the
    relative error at the smallest t. Perturbed solves run the frequency guard
    at bounds widened to cover the perturbed coefficients; t shrinks
    automatically if a perturbation lands in a forbidden band.
    """
    grid = c.grid
    weights = build_boundary_weights(grid) if weights is None else weights
    _, bank = bank_for_field(c, omega2, weights=weights)
    rows = []
    for delta in deltas:
        exact = apply_df(bank, delta)
        scale = dtn_data_norm(exact, weights)
        dvals = delta.cell_values() if isinstance(delta, PwcField) else np.asarray(delta)
        dfield = delta if isinstance(delta, PwcField) else None
        ts, errs = [], []
        for t in sorted(t_values, reverse=True):
            t_use = float(t)
            for _ in range(60):
                try:
                    coeffs_p = c.coeffs + t_use * (dfield.coeffs if dfield is not None else 0)
                    if dfield is None:
                        raise ConfigurationError("gradient_check needs PwcField directions")
                    coeffs_m = c.coeffs - t_use * dfield.coeffs
                    lo = min(coeffs_p.min(), coeffs_m.min(), c.bounds[0])
                    hi = max(coeffs_p.max(), coeffs_m.max(), c.bounds[1])
                    if lo <= 0:
                        raise AdmissibilityError("perturbation makes the field nonpositive")
                    box = (lo, hi)
                    plus = PwcField(c.partition, coeffs_p, box)
                    minus = PwcField(c.partition, coeffs_m, box)
                    dtn_p = dtn_for_field(plus, omega2, weights=weights)
                    dtn_m = dtn_for_field(minus, omega2, weights=weights)
                    break
                except AdmissibilityError:
                    t_use *= 0.5
            else:
                raise AdmissibilityError("could not find an admissible perturbation size")
            diff = (dtn_p.lam - dtn_m.lam) / (2.0 * t_use)
            errs.append(dtn_data_norm(diff - exact, weights))
            ts.append(t_use)
        ts = np.asarray(ts)
        errs = np.asarray(errs)
        positive = errs > 0
        if positive.sum() >= 2:
            slope = float(np.polyfit(np.log(ts[positive]), np.log(errs[positive]), 1)[0])
        else:
            slope = np.inf  # differences at rounding level: better than any slope
        rel = float(errs[-1] / scale) if scale > 0 else 0.0
        rows.append(GradientCheckRow(
            slope=slope,
            rel_err_smallest_t=rel,
            t_values=ts,
            errors=errs,
            passed=bool(slope >= slope_min and rel <= rel_tol),
        ))
    return rows


@dataclass(frozen=True)
class StabilitySample:
    """One sampled pair: field distance over data distance at region count N."""

    big_n: int
    ratio: float
    ratio_op: float
    kind: str


@dataclass(frozen=True)
class LipschitzReport:
    """Stability-ratio growth across region counts with fitted exponents.

    khat_fit is the regression slope of log(max_ratio * omega^2) against
    (1 + omega^2*B2) * N^e; khat_bound is the largest implied per-sample
    exponent (so the bound with khat_bound dominates every sample).
    Ratios are reported under the Hilbert-Schmidt data norm, with the
    operator-norm variant alongside.
    """

    big_ns: list
    max_ratios: list
    max_ratios_op: list
    khat_fit: float
    khat_bound: float
    fit_residual: float
    omega2: float
    b2: float
    n_exponent: float
    samples: list


def _stability_pairs(grid: Grid, big_n: int, b1: float, b2: float, samples: int, rng):
    """Adversarial pair first (deep-interior single-region bump), then random pairs."""
    k = int(round(np.sqrt(big_n)))
    if k * k != big_n:
        raise ConfigurationError(f"region count {big_n} is not a square")
    part = make_uniform_partition(grid, k)
    mid = 0.5 * (b1 + b2)
    pairs = []
    base = np.full(big_n, mid)
    bumped = base.copy()
    center = (k // 2) * k + k // 2 if k > 1 else 0
    bumped[center] = b2
    pairs.append((PwcField(part, base, (b1, b2)), PwcField(part, bumped, (b1, b2)), "adversarial"))
    if k > 2:
        inner = (k // 2) * k + (k // 2 - 1)
        bumped2 = base.copy()
        bumped2[inner] = b1
        pairs.append((PwcField(part, base, (b1, b2)), PwcField(part, bumped2, (b1, b2)),
                      "adversarial"))
    while len(pairs) < samples:
        c1 = PwcField(part, rng.uniform(b1, b2, big_n), (b1, b2))
        c2 = PwcField(part, rng.uniform(b1, b2, big_n), (b1, b2))
        if l2_dist(c1, c2) == 0:
            continue
        pairs.append((c1, c2, "random"))
    return pairs


def estimate_lipschitz_constant(grid: Grid, omega2: float, b1: float, b2: float,
                                big_ns=(1, 4, 16, 64), samples_per_n: int = 6,
                                seed: int = 0, n_exponent: float = 4.0 / 7.0) -> LipschitzReport:
    """Sample worst stability ratios ||c1-c2|| / ||Lam1-Lam2||_Y per region count.

    Deterministic under the seed; degenerate pairs are skipped.
    """
    rng = np.random.default_rng(seed)
    weights = build_boundary_weights(grid)
    all_samples: list[StabilitySample] = []
    max_ratios, max_ratios_op = [], []
    for big_n in big_ns:
        k = int(round(np.sqrt(big_n)))
        if k * k != big_n or grid.cells_per_side % k != 0:
            raise ConfigurationError(f"region count {big_n} does not tile grid m={grid.m}")
        best = best_op = 0.0
        for c1, c2, kind in _stability_pairs(grid, big_n, b1, b2, samples_per_n, rng):
            dist = l2_dist(c1, c2)
            dtn1 = dtn_for_field(c1, omega2, weights=weights)
            dtn2 = dtn_for_field(c2, omega2, weights=weights)
            diff = dtn1.lam - dtn2.lam
            data_dist = dtn_data_norm(diff, weights)
            data_dist_op = dtn_data_norm(diff, weights, kind="op")
            if data_dist == 0:
                continue
            ratio = dist / data_dist
            ratio_op = dist / data_dist_op
            all_samples.append(StabilitySample(big_n=big_n, ratio=ratio,
                                               ratio_op=ratio_op, kind=kind))
            best = max(best, ratio)
            best_op = max(best_op, ratio_op)
        max_ratios.append(best)
        max_ratios_op.append(best_op)
    xs = np.array([(1.0 + omega2 * b2) * n ** n_exponent for n in big_ns])
    ys = np.log(np.array(max_ratios) * omega2)
    if len(big_ns) >= 2:
        coef = np.polyfit(xs, ys, 1)
        khat_fit = float(coef[0])
        fit_residual = float(np.sqrt(np.mean((np.polyval(coef, xs) - ys) ** 2)))
    else:
        khat_fit = float(ys[0] / xs[0])
        fit_residual = 0.0
    implied = [np.log(s.ratio * omega2) / ((1.0 + omega2 * b2) * s.big_n ** n_exponent)
               for s in all_samples]
    khat_bound = float(max(implied))
    return LipschitzReport(
        big_ns=list(big_ns),
        max_ratios=max_ratios,
        max_ratios_op=max_ratios_op,
        khat_fit=khat_fit,
        khat_bound=khat_bound,
        fit_residual=fit_residual,
        omega2=omega2,
        b2=b2,
        n_exponent=n_exponent,
        samples=all_samples,
    )


def write_lipschitz_report(path, report: LipschitzReport) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("N,max_ratio_hs,max_ratio_op\n")
        for n, r, ro in zip(report.big_ns, report.max_ratios, report.max_ratios_op):
            fh.write(f"{n},{r:.17g},{ro:.17g}\n")
        fh.write(f"# khat_fit,{report.khat_fit:.17g}\n")
        fh.write(f"# khat_bound,{report.khat_bound:.17g}\n")
