"""Experiment configuration: INI-style sections of flat key-value pairs.

Schema (sections and keys; * marks required):

    [grid]      m*
    [problem]   omega2*, b1*, b2*
    [truth]     k (cells per side of the truth partition) and values
                (region coefficients, row-major), or file (a pwc field file)
    [schedule]  levels* (space-separated region counts, each a square number)
    [bundle]    mode (analytic|calibrate), lhat0/l0/k for analytic mode,
                phi_c, phi_beta (power-law compression), eps*,
                n_exponent (optional), seed/samples for calibrate mode
    [run]       max_iter, seed, out, eta_override, discrepancy_threshold,
                trials (verify), target_rho (constants)

Unknown keys are rejected so typos fail loudly. Validation happens before any
solve: the frequency guard, partition divisibility, and compression model
monotonicity are all checked at parse time.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .constants import CompressionModel, ConstantsBundle, calibrate
from .domain import Grid, PwcField, load_pwc_field, make_uniform_partition
from .errors import ConfigurationError
from .forward import spectrum_guard

__all__ = ["ExperimentConfig", "load_config"]

_KNOWN_KEYS = {
    "grid": {"m"},
    "problem": {"omega2", "b1", "b2"},
    "truth": {"k", "values", "file"},
    "schedule": {"levels"},
    "bundle": {"mode", "lhat0", "l0", "k", "phi_c", "phi_beta", "eps", "n_exponent",
               "seed", "samples"},
    "run": {"max_iter", "seed", "out", "eta_override", "discrepancy_threshold",
            "trials", "target_rho"},
}


@dataclass
class ExperimentConfig:
    """Parsed and validated experiment description."""

    grid: Grid
    omega2: float
    b1: float
    b2: float
    truth_k: int | None
    truth_values: np.ndarray | None
    truth_file: str | None
    schedule_n: list[int]
    bundle_mode: str
    bundle_lhat0: float | None
    bundle_l0: float | None
    bundle_k: float | None
    phi: CompressionModel
    eps: float
    n_exponent: float
    bundle_seed: int
    bundle_samples: int
    max_iter: int
    seed: int
    out: str | None
    eta_override: float | None
    discrepancy_threshold: float | None
    trials: int
    target_rho: float
    raw_text: str = field(repr=False, default="")

    def truth_field(self) -> PwcField:
        if self.truth_file is not None:
            # the file header pins N; rebuild the matching uniform partition
            with open(self.truth_file, encoding="utf-8") as fh:
                header = fh.readline().split()
            if len(header) != 3 or header[0] != "pwc":
                raise ConfigurationError(f"{self.truth_file}: not a pwc field file")
            n = int(header[1])
            k = int(round(np.sqrt(n)))
            part = make_uniform_partition(self.grid, k, level=int(header[2]))
            return load_pwc_field(self.truth_file, part, (self.b1, self.b2))
        if self.truth_k is None or self.truth_values is None:
            raise ConfigurationError("config has no [truth] section with k/values or file")
        part = make_uniform_partition(self.grid, self.truth_k)
        return PwcField(part, self.truth_values, (self.b1, self.b2))

    def schedule_partitions(self) -> list:
        parts = []
        for n in self.schedule_n:
            k = int(round(np.sqrt(n)))
            parts.append(make_uniform_partition(self.grid, k, level=len(parts)))
        return parts

    def bundle(self) -> ConstantsBundle:
        if self.bundle_mode == "analytic":
            return calibrate(self.grid, self.omega2, self.b1, self.b2, phi=self.phi,
                             eps=self.eps, mode="analytic", df_bound0=self.bundle_lhat0,
                             df_lip0=self.bundle_l0, stab_k=self.bundle_k,
                             n_exponent=self.n_exponent)
        return calibrate(self.grid, self.omega2, self.b1, self.b2, phi=self.phi,
                         eps=self.eps, mode="empirical", seed=self.bundle_seed,
                         samples=self.bundle_samples, n_exponent=self.n_exponent)


def _reject_unknown(parser: configparser.ConfigParser) -> None:
    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigurationError(f"unknown config section [{section}]")
        unknown = set(parser[section]) - _KNOWN_KEYS[section]
        if unknown:
            raise ConfigurationError(
                f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}"
            )


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    parser.read_string(text)
    _reject_unknown(parser)
    try:
        m = parser.getint("grid", "m")
        omega2 = parser.getfloat("problem", "omega2")
        b1 = parser.getfloat("problem", "b1")
        b2 = parser.getfloat("problem", "b2")
    except (configparser.Error, ValueError) as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    grid = Grid(m)
    spectrum_guard(omega2, b1, b2)

    truth_k = truth_values = truth_file = None
    if parser.has_section("truth"):
        if parser.has_option("truth", "file"):
            truth_file = parser.get("truth", "file")
        else:
            truth_k = parser.getint("truth", "k")
            truth_values = np.array(
                [float(tok) for tok in parser.get("truth", "values").split()]
            )
            if truth_values.size != truth_k ** 2:
                raise ConfigurationError(
                    f"[truth] expects {truth_k ** 2} values for k={truth_k}, "
                    f"got {truth_values.size}"
                )
            make_uniform_partition(grid, truth_k)  # divisibility check

    if not parser.has_option("schedule", "levels"):
        raise ConfigurationError("config needs [schedule] levels")
    schedule_n = [int(tok) for tok in parser.get("schedule", "levels").split()]
    if not schedule_n:
        raise ConfigurationError("[schedule] levels must not be empty")
    for n in schedule_n:
        k = int(round(np.sqrt(n)))
        if k * k != n:
            raise ConfigurationError(f"schedule entry {n} is not a square region count")
        make_uniform_partition(grid, k)
    if any(b < a for a, b in zip(schedule_n, schedule_n[1:])):
        raise ConfigurationError("schedule region counts must be nondecreasing")

    get_b = lambda key, fallback=None: (
        parser.getfloat("bundle", key) if parser.has_option("bundle", key) else fallback
    )
    mode = parser.get("bundle", "mode", fallback="analytic")
    if mode not in ("analytic", "calibrate"):
        raise ConfigurationError(f"bundle mode must be analytic or calibrate, got {mode!r}")
    eps = get_b("eps")
    if eps is None:
        raise ConfigurationError("config needs [bundle] eps")
    phi = CompressionModel.power_law(get_b("phi_c", 0.0), get_b("phi_beta", 1.0))

    get_r = lambda key, fallback=None: (
        parser.getfloat("run", key) if parser.has_option("run", key) else fallback
    )
    out = parser.get("run", "out", fallback=None)

    return ExperimentConfig(
        grid=grid,
        omega2=omega2,
        b1=b1,
        b2=b2,
        truth_k=truth_k,
        truth_values=truth_values,
        truth_file=truth_file,
        schedule_n=schedule_n,
        bundle_mode=mode,
        bundle_lhat0=get_b("lhat0"),
        bundle_l0=get_b("l0"),
        bundle_k=get_b("k"),
        phi=phi,
        eps=eps,
        n_exponent=get_b("n_exponent", 4.0 / 7.0),
        bundle_seed=int(get_b("seed", 0)),
        bundle_samples=int(get_b("samples", 12)),
        max_iter=int(get_r("max_iter", 500)),
        seed=int(get_r("seed", 0)),
        out=out,
        eta_override=get_r("eta_override"),
        discrepancy_threshold=get_r("discrepancy_threshold"),
        trials=int(get_r("trials", 20)),
        target_rho=get_r("target_rho", 1e3),
        raw_text=text,
    )
