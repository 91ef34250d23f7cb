"""Stability-constant calculus: level constants, refinement conditions, N_max.

A ConstantsBundle holds the a-priori data. For a partition with N regions the
derived level constants are

    df_bound  = df_bound0 * omega^2            (derivative norm bound)
    df_lip    = df_lip0   * omega^4            (derivative Lipschitz bound)
    stab      = omega^-2 * exp(stab_k*(1 + omega^2*B2) * N^e)   (stability)
    curvature = df_lip * stab^2
    eta       = df_bound0 * omega^2 * phi(N)   (approximation error model)

with e the stability exponent (default 4/7, kept verbatim from the 3D
estimate; configurable). The convergence radius of the projected descent is

    rho = 1/2 * (2*curvature*df_bound)^-2 * (1 + sqrt(1 - 8*curvature*eta)
                                               - 4*eta*curvature)^2.

Refinement from N_n to N_{n+1} regions is allowed when

    8*curvature_{n+1}*eta_{n+1} < 1,
    (3+eps)*eta_n + eta_{n+1} <= 2^{-5/2} / (df_bound_{n+1}*stab_{n+1}*curvature_{n+1}),

and the frequency-explicit forms of the same conditions are

    phi(N_{n+1}) - 1/8 * omega^-2 (df_lip0*df_bound0)^-1 * exp(-2*E_{n+1}) < 0,
    (3+eps)*phi(N_n) + phi(N_{n+1})
        - 2^{-5/2} * omega^-2 (df_bound0^2*df_lip0)^-1 * exp(-3*E_{n+1}) <= 0,

where E_{n+1} = stab_k*(1 + omega^2*B2)*N_{n+1}^e. Under the model equality
eta = df_bound0*omega^2*phi(N) each frequency-explicit condition is equivalent
to the corresponding level condition, which in turn implies the classical
single-inequality criterion. The largest sustainable N solves

    (4+eps)*phi(N) - 2^{-5/2} omega^-2 (df_bound0^2 df_lip0)^-1 exp(-3*E) = 0;

if the left side stays negative the refinement is unbounded.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError, ConfigurationError, LevelConditionError
from .forward import spectrum_guard

__all__ = [
    "CompressionModel",
    "ConstantsBundle",
    "LevelConstants",
    "TransitionDecision",
    "OmegaDecision",
    "NMaxResult",
    "RhoPoint",
    "derive_level",
    "compute_rho",
    "check_level_transition",
    "check_omega_conditions",
    "solve_n_max",
    "calibrate",
    "rho_vs_omega",
    "find_omega_for_rho",
    "save_bundle",
    "load_bundle",
    "write_rho_table",
]

_EXP_CAP = 700.0  # largest exponent fed to exp() anywhere in the calculus
DEFAULT_EXPONENT = 4.0 / 7.0


@dataclass(frozen=True)
class CompressionModel:
    """Monotone-decreasing bound phi(N) on the best-approximation error.

    Power-law form phi(N) = c * N^-beta (c = 0 gives the exact-representability
    model phi = 0), or a finite table interpolated linearly in log N.
    """

    kind: str = "power"
    c: float = 0.0
    beta: float = 1.0
    table_n: np.ndarray | None = None
    table_v: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "power":
            if self.c < 0:
                raise ConfigurationError(f"compression prefactor must be >= 0, got {self.c}")
            if self.c > 0 and self.beta <= 0:
                raise ConfigurationError(
                    "a nonzero compression model must decrease in N (beta > 0); "
                    f"got beta = {self.beta}"
                )
        elif self.kind == "table":
            n = np.asarray(self.table_n, dtype=float)
            v = np.asarray(self.table_v, dtype=float)
            if n.ndim != 1 or n.shape != v.shape or n.size < 2:
                raise ConfigurationError("table model needs matching N and value arrays (>= 2 entries)")
            if (np.diff(n) <= 0).any():
                raise ConfigurationError("table N values must be strictly increasing")
            if (v < 0).any() or (np.diff(v) > 0).any():
                raise ConfigurationError("table values must be nonnegative and non-increasing")
            if v[0] > 0 and not v[-1] < v[0]:
                raise ConfigurationError("a nonzero table model must decrease in N")
            object.__setattr__(self, "table_n", n)
            object.__setattr__(self, "table_v", v)
        else:
            raise ConfigurationError(f"unknown compression model kind {self.kind!r}")

    @classmethod
    def power_law(cls, c: float, beta: float) -> "CompressionModel":
        return cls(kind="power", c=c, beta=beta)

    @classmethod
    def zero(cls) -> "CompressionModel":
        return cls(kind="power", c=0.0, beta=1.0)

    @classmethod
    def from_table(cls, n_values, values) -> "CompressionModel":
        return cls(kind="table", table_n=np.asarray(n_values, dtype=float),
                   table_v=np.asarray(values, dtype=float))

    @property
    def max_n(self) -> float:
        return np.inf if self.kind == "power" else float(self.table_n[-1])

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        if (n < 1).any():
            raise ConfigurationError("phi is defined for N >= 1")
        if self.kind == "power":
            out = self.c * n ** (-self.beta)
        else:
            if (n > self.table_n[-1]).any():
                raise ConfigurationError(
                    f"table compression model is only defined up to N = {self.table_n[-1]:g}"
                )
            out = np.interp(np.log(np.maximum(n, self.table_n[0])),
                            np.log(self.table_n), self.table_v)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ConstantsBundle:
    """A-priori data of the calculus.

    df_bound0 scales the derivative bound (growth omega^2), df_lip0 the
    derivative Lipschitz bound (growth omega^4), stab_k the stability exponent
    coefficient. eps is the discrepancy tolerance, phi the compression model,
    n_exponent the stability exponent on N. calibration records provenance.
    """

    df_bound0: float
    df_lip0: float
    stab_k: float
    b1: float
    b2: float
    omega2: float
    eps: float
    phi: CompressionModel
    n_exponent: float = DEFAULT_EXPONENT
    calibration: str = "analytic"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("df_bound0", "df_lip0", "stab_k", "eps"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be strictly positive")
        if not (0 < self.b1 <= self.b2):
            raise ConfigurationError(f"bounds must satisfy 0 < b1 <= b2, got ({self.b1}, {self.b2})")
        if not (0 < self.n_exponent <= 1):
            raise ConfigurationError(f"stability exponent must lie in (0, 1], got {self.n_exponent}")
        spectrum_guard(self.omega2, self.b1, self.b2)

    def stability_exponent(self, big_n: float) -> float:
        return self.stab_k * (1.0 + self.omega2 * self.b2) * float(big_n) ** self.n_exponent


@dataclass(frozen=True)
class LevelConstants:
    """Constants of one partition level, all derived from the bundle at N regions."""

    bundle: ConstantsBundle
    big_n: int
    df_bound: float
    df_lip: float
    stab: float
    curvature: float
    eta: float
    rho: float | None

    @property
    def omega2(self) -> float:
        return self.bundle.omega2


def compute_rho(curvature: float, df_bound: float, eta: float) -> float:
    """Convergence radius of the projected descent at one level.

    Defined while 8*curvature*eta <= 1 (the square root's domain); beyond that
    the level is inadmissible.
    """
    x = curvature * eta
    if 8.0 * x > 1.0:
        raise LevelConditionError(
            f"level inadmissible: 8 * curvature * eta = {8 * x:.6g} > 1"
        )
    inner = 1.0 + np.sqrt(max(1.0 - 8.0 * x, 0.0)) - 4.0 * x
    return float(0.5 * (2.0 * curvature * df_bound) ** (-2) * inner ** 2)


def derive_level(bundle: ConstantsBundle, big_n: int) -> LevelConstants:
    """Evaluate every level constant at N = big_n regions."""
    if big_n < 1:
        raise ConfigurationError(f"N must be >= 1, got {big_n}")
    if big_n > bundle.phi.max_n:
        raise ConfigurationError(
            f"compression table does not reach N = {big_n}"
        )
    expo = bundle.stability_exponent(big_n)
    if 2.0 * expo > _EXP_CAP:
        raise ConfigurationError(
            f"stability exponent {expo:.3g} overflows exp(); reduce stab_k, omega^2, or N "
            f"(stab_k={bundle.stab_k}, omega2={bundle.omega2}, N={big_n})"
        )
    omega2 = bundle.omega2
    df_bound = bundle.df_bound0 * omega2
    df_lip = bundle.df_lip0 * omega2 ** 2
    stab = np.exp(expo) / omega2
    curvature = bundle.df_lip0 * np.exp(2.0 * expo)  # df_lip * stab^2, overflow-safe form
    eta = bundle.df_bound0 * omega2 * bundle.phi(big_n)
    rho = None
    if 8.0 * curvature * eta <= 1.0:
        rho = compute_rho(curvature, df_bound, eta)
    return LevelConstants(
        bundle=bundle,
        big_n=int(big_n),
        df_bound=float(df_bound),
        df_lip=float(df_lip),
        stab=float(stab),
        curvature=float(curvature),
        eta=float(eta),
        rho=rho,
    )


@dataclass(frozen=True)
class TransitionDecision:
    """Outcome of the direct level-to-level refinement check."""

    passed: bool
    contraction_ok: bool           # 8 * curvature_{n+1} * eta_{n+1} < 1
    contraction_value: float
    budget_ok: bool                # (3+eps) eta_n + eta_{n+1} <= budget
    budget_lhs: float
    budget_rhs: float
    classical_ok: bool | None      # the single-inequality criterion, when defined
    classical_lhs: float | None
    classical_rhs: float | None

    def violated(self) -> str | None:
        if self.passed:
            return None
        if not self.contraction_ok:
            return (f"8*curvature*eta = {self.contraction_value:.6g} >= 1 at the finer level")
        return (f"(3+eps)*eta_n + eta_next = {self.budget_lhs:.6g} exceeds the budget "
                f"{self.budget_rhs:.6g}")


def check_level_transition(cur: LevelConstants, nxt: LevelConstants) -> TransitionDecision:
    """Direct refinement conditions between two derived levels (same bundle)."""
    if cur.bundle is not nxt.bundle and cur.bundle != nxt.bundle:
        raise ConfigurationError("level constants come from different bundles")
    eps = cur.bundle.eps
    contraction = 8.0 * nxt.curvature * nxt.eta
    ok1 = contraction < 1.0
    lhs2 = (3.0 + eps) * cur.eta + nxt.eta
    rhs2 = 2.0 ** (-2.5) / (nxt.df_bound * nxt.stab * nxt.curvature)
    ok2 = lhs2 <= rhs2
    passed = ok1 and ok2
    classical_ok = classical_lhs = classical_rhs = None
    if ok1:
        root = np.sqrt(1.0 - contraction)
        classical_lhs = (3.0 + eps) * cur.eta
        classical_rhs = (
            2.0 ** (-0.5) / (nxt.df_bound * nxt.stab)
            * ((1.0 + root) / (2.0 * nxt.curvature) - 2.0 * nxt.eta)
            - nxt.eta
        )
        classical_ok = classical_lhs < classical_rhs
        # the pair of conditions implies the classical criterion (up to rounding)
        assert not passed or classical_ok or np.isclose(classical_lhs, classical_rhs, rtol=1e-12), (
            "refinement conditions passed but the classical criterion failed"
        )
    return TransitionDecision(
        passed=passed,
        contraction_ok=ok1,
        contraction_value=float(contraction),
        budget_ok=ok2,
        budget_lhs=float(lhs2),
        budget_rhs=float(rhs2),
        classical_ok=classical_ok,
        classical_lhs=None if classical_lhs is None else float(classical_lhs),
        classical_rhs=None if classical_rhs is None else float(classical_rhs),
    )


@dataclass(frozen=True)
class OmegaDecision:
    """Outcome of the frequency-explicit refinement conditions."""

    passed: bool
    first_ok: bool
    first_lhs: float
    second_ok: bool
    second_lhs: float

    def violated(self) -> str | None:
        if self.passed:
            return None
        if not self.first_ok:
            return (f"frequency condition 1 fails: phi(N_next) term = {self.first_lhs:.6g} >= 0")
        return (f"frequency condition 2 fails: budget term = {self.second_lhs:.6g} > 0")


def check_omega_conditions(bundle: ConstantsBundle, n_cur: int, n_next: int) -> OmegaDecision:
    """Frequency-explicit refinement conditions for N_cur -> N_next regions.

    These imply the direct level conditions (checked here under the model
    equality eta = df_bound0 * omega^2 * phi(N)).
    """
    if n_next < n_cur:
        raise ConfigurationError(f"refinement must not shrink N: {n_cur} -> {n_next}")
    expo = bundle.stability_exponent(n_next)
    om2 = bundle.omega2
    first_lhs = bundle.phi(n_next) - (
        0.125 / om2 / (bundle.df_lip0 * bundle.df_bound0) * np.exp(-2.0 * expo)
    )
    second_lhs = (3.0 + bundle.eps) * bundle.phi(n_cur) + bundle.phi(n_next) - (
        2.0 ** (-2.5) / om2 / (bundle.df_bound0 ** 2 * bundle.df_lip0) * np.exp(-3.0 * expo)
    )
    first_ok = first_lhs < 0.0
    second_ok = second_lhs <= 0.0
    decision = OmegaDecision(
        passed=first_ok and second_ok,
        first_ok=first_ok,
        first_lhs=float(first_lhs),
        second_ok=second_ok,
        second_lhs=float(second_lhs),
    )
    if decision.passed and 2.0 * expo <= _EXP_CAP:
        direct = check_level_transition(derive_level(bundle, n_cur), derive_level(bundle, n_next))
        assert direct.passed or _borderline(direct), (
            "frequency conditions passed but the direct level conditions failed"
        )
    return decision


def _borderline(direct: TransitionDecision) -> bool:
    # 1-ulp disagreements between the two equivalent formulations
    close1 = np.isclose(direct.contraction_value, 1.0, rtol=1e-12)
    close2 = np.isclose(direct.budget_lhs, direct.budget_rhs, rtol=1e-12)
    return (direct.contraction_ok or close1) and (direct.budget_ok or close2)


@dataclass(frozen=True)
class NMaxResult:
    """Largest sustainable region count.

    status: 'bounded' (n_max holds the largest N with a nonpositive defining
    left side), 'unbounded' (still sustainable at the scan cap), or 'none'
    (positive throughout: no sustainable size at all).
    """

    status: str
    n_max: int | None
    crossing: float | None
    cap: float


def _nmax_lhs(bundle: ConstantsBundle, n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    expo = bundle.stab_k * (1.0 + bundle.omega2 * bundle.b2) * n ** bundle.n_exponent
    gain = (2.0 ** (-2.5) / bundle.omega2 / (bundle.df_bound0 ** 2 * bundle.df_lip0)
            * np.exp(-3.0 * np.minimum(expo, _EXP_CAP)))
    return (4.0 + bundle.eps) * bundle.phi(n) - gain


def solve_n_max(bundle: ConstantsBundle, cap: float = 1e9, scan_points: int = 4096) -> NMaxResult:
    """Locate the fixed point of the refinement budget by pre-scan and bisection."""
    cap = float(min(cap, bundle.phi.max_n))
    if cap < 1:
        raise ConfigurationError("scan cap must be at least 1")
    grid = np.unique(np.concatenate([
        np.arange(1, min(int(cap), 1024) + 1, dtype=float),
        np.geomspace(1.0, cap, scan_points),
    ]))
    vals = _nmax_lhs(bundle, grid)
    ok = vals <= 0.0
    if not ok.any():
        return NMaxResult(status="none", n_max=None, crossing=None, cap=cap)
    last = int(np.nonzero(ok)[0][-1])
    if last == grid.size - 1:
        return NMaxResult(status="unbounded", n_max=None, crossing=None, cap=cap)
    lo, hi = grid[last], grid[last + 1]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _nmax_lhs(bundle, mid) <= 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 0.25:
            break
    n_max = int(np.floor(lo))
    while n_max > 1 and _nmax_lhs(bundle, n_max) > 0:
        n_max -= 1
    return NMaxResult(status="bounded", n_max=n_max, crossing=float(lo), cap=cap)


@dataclass(frozen=True)
class RhoPoint:
    omega2: float
    rho: float | None
    rho_floor: float | None
    note: str


def rho_vs_omega(bundle: ConstantsBundle, big_n: int, omega2_grid) -> list[RhoPoint]:
    """Tabulate the convergence radius against frequency at fixed N.

    Inadmissible frequencies and levels are skipped with an annotation.
    rho_floor is 1/8 (curvature*df_bound)^-2, the mechanism's lower bound once
    the contraction condition holds.
    """
    rows: list[RhoPoint] = []
    for w2 in omega2_grid:
        try:
            variant = dataclasses.replace(bundle, omega2=float(w2))
        except Exception as exc:  # guard failure
            rows.append(RhoPoint(float(w2), None, None, f"skipped: {exc}"))
            continue
        try:
            lc = derive_level(variant, big_n)
        except ConfigurationError as exc:
            rows.append(RhoPoint(float(w2), None, None, f"skipped: {exc}"))
            continue
        if lc.rho is None:
            rows.append(RhoPoint(float(w2), None, None,
                                 "skipped: contraction condition fails (8*curvature*eta > 1)"))
            continue
        floor = 0.125 / (lc.curvature * lc.df_bound) ** 2
        rows.append(RhoPoint(float(w2), float(lc.rho), float(floor), ""))
    return rows


def find_omega_for_rho(bundle: ConstantsBundle, big_n: int, target: float,
                       start: float | None = None, max_halvings: int = 200):
    """Halve omega^2 from start until the radius reaches the target; returns (omega2, rho)."""
    w2 = bundle.omega2 if start is None else float(start)
    for _ in range(max_halvings):
        rows = rho_vs_omega(bundle, big_n, [w2])
        rho = rows[0].rho
        if rho is not None and rho >= target:
            return w2, rho
        w2 *= 0.5
    raise CalibrationError(
        f"no omega^2 with radius >= {target} found within {max_halvings} halvings"
    )


def calibrate(grid, omega2: float, b1: float, b2: float, *, phi: CompressionModel,
              eps: float, mode: str = "empirical", df_bound0: float | None = None,
              df_lip0: float | None = None, stab_k: float | None = None,
              n_values=(1, 4, 16), samples: int = 12, seed: int = 0,
              n_exponent: float = DEFAULT_EXPONENT) -> ConstantsBundle:
    """Produce a ConstantsBundle, either echoing analytic inputs or fitting
    the three coefficients from forward/derivative probes.

    Empirical mode measures df_bound0 from derivative-norm probes over omega^2,
    df_lip0 from derivative-difference probes over omega^4, and stab_k from the
    largest implied exponent of sampled stability ratios across region counts.
    Deterministic under the seed.
    """
    if mode == "analytic":
        if df_bound0 is None or df_lip0 is None or stab_k is None:
            raise CalibrationError("analytic calibration needs df_bound0, df_lip0, and stab_k")
        return ConstantsBundle(df_bound0=df_bound0, df_lip0=df_lip0, stab_k=stab_k,
                               b1=b1, b2=b2, omega2=omega2, eps=eps, phi=phi,
                               n_exponent=n_exponent, calibration="analytic")
    if mode != "empirical":
        raise CalibrationError(f"unknown calibration mode {mode!r}")
    if samples < 10:
        raise CalibrationError(f"empirical calibration needs at least 10 sample pairs, got {samples}")

    from .domain import PwcField, l2_dist, make_uniform_partition
    from .derivative import bank_for_field, df_norm_probe, indicator_probes, lipschitz_df_probe
    from .forward import build_boundary_weights
    from .verify import estimate_lipschitz_constant

    rng = np.random.default_rng(seed)
    weights = build_boundary_weights(grid)
    k_side = 2 if grid.cells_per_side % 2 == 0 else 1
    part = make_uniform_partition(grid, k_side)

    def random_field():
        return PwcField(part, rng.uniform(b1, b2, size=part.n_regions), (b1, b2))

    probes = indicator_probes(part)
    best_bound = 0.0
    fields = [random_field() for _ in range(max(3, samples // 4))]
    fields.append(PwcField(part, np.full(part.n_regions, 0.5 * (b1 + b2)), (b1, b2)))
    for c in fields:
        _, bank = bank_for_field(c, omega2, weights=weights)
        best_bound = max(best_bound, df_norm_probe(bank, probes))
    fitted_bound = best_bound / omega2

    best_lip = 0.0
    for _ in range(samples):
        c1, c2 = random_field(), random_field()
        dist = l2_dist(c1, c2)
        if dist == 0:
            continue
        ratio = lipschitz_df_probe(c1, c2, omega2, weights=weights, probes=probes)
        best_lip = max(best_lip, ratio / (omega2 ** 2 * dist))
    fitted_lip = best_lip

    feasible_n = [n for n in n_values
                  if int(round(np.sqrt(n))) ** 2 == n
                  and grid.cells_per_side % int(round(np.sqrt(n))) == 0]
    if not feasible_n:
        raise CalibrationError(f"no region count in {n_values} fits grid m={grid.m}")
    report = estimate_lipschitz_constant(grid, omega2, b1, b2, big_ns=feasible_n,
                                         samples_per_n=max(4, samples // len(feasible_n)),
                                         seed=seed, n_exponent=n_exponent)
    fitted_k = max(report.khat_bound, 1e-6)

    if fitted_bound <= 0 or fitted_lip <= 0:
        raise CalibrationError(
            f"calibration produced nonpositive constants (df_bound0={fitted_bound}, "
            f"df_lip0={fitted_lip}); widen the sample set"
        )
    meta = {
        "seed": seed,
        "samples": samples,
        "n_values": list(feasible_n),
        "khat_fit": report.khat_fit,
        "khat_bound": report.khat_bound,
        "norm_kind": "hs",
        "fit_residual": report.fit_residual,
    }
    return ConstantsBundle(df_bound0=fitted_bound, df_lip0=fitted_lip, stab_k=fitted_k,
                           b1=b1, b2=b2, omega2=omega2, eps=eps, phi=phi,
                           n_exponent=n_exponent, calibration="empirical", meta=meta)


def save_bundle(path, bundle: ConstantsBundle) -> None:
    """Persist a bundle as a flat key-value file (power-law models only)."""
    if bundle.phi.kind != "power":
        raise ConfigurationError("only power-law compression models are persisted")
    lines = [
        f"df_bound0 = {float(bundle.df_bound0)!r}",
        f"df_lip0 = {float(bundle.df_lip0)!r}",
        f"stab_k = {float(bundle.stab_k)!r}",
        f"b1 = {float(bundle.b1)!r}",
        f"b2 = {float(bundle.b2)!r}",
        f"omega2 = {float(bundle.omega2)!r}",
        f"eps = {float(bundle.eps)!r}",
        f"phi_c = {float(bundle.phi.c)!r}",
        f"phi_beta = {float(bundle.phi.beta)!r}",
        f"n_exponent = {float(bundle.n_exponent)!r}",
        f"calibration = {bundle.calibration}",
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_bundle(path) -> ConstantsBundle:
    kv = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            kv[key.strip()] = value.strip()
    try:
        return ConstantsBundle(
            df_bound0=float(kv["df_bound0"]),
            df_lip0=float(kv["df_lip0"]),
            stab_k=float(kv["stab_k"]),
            b1=float(kv["b1"]),
            b2=float(kv["b2"]),
            omega2=float(kv["omega2"]),
            eps=float(kv["eps"]),
            phi=CompressionModel.power_law(float(kv["phi_c"]), float(kv["phi_beta"])),
            n_exponent=float(kv.get("n_exponent", DEFAULT_EXPONENT)),
            calibration=kv.get("calibration", "analytic"),
        )
    except KeyError as exc:
        raise ConfigurationError(f"{path}: missing bundle key {exc}") from exc


def write_rho_table(path, rows: list[RhoPoint]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("omega2,rho,rho_floor,note\n")
        for r in rows:
            rho = "" if r.rho is None else f"{r.rho:.17g}"
            floor = "" if r.rho_floor is None else f"{r.rho_floor:.17g}"
            fh.write(f"{r.omega2:.17g},{rho},{floor},{r.note}\n")
