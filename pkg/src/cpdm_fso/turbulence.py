"""Gamma-Gamma scintillation: Rytov variance, shape parameters, density and
irradiance sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from cpdm_fso._bessel import log_bessel_k

# Reference value for Bangladesh (m^-2/3).
DEFAULT_CN2 = 1.7e-14
DEFAULT_WAVELENGTH_M = 1550e-9


@dataclass(frozen=True)
class TurbulenceEnv:
    cn2: float
    wavelength_m: float
    distance_m: float

    def __post_init__(self):
        if not (math.isfinite(self.cn2) and self.cn2 >= 0):
            raise ValueError(f"cn2 must be finite and >= 0, got {self.cn2!r}")
        for name in ("wavelength_m", "distance_m"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class GGParams:
    rytov_var: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.rytov_var >= 0 and self.alpha > 0 and self.beta > 0):
            raise ValueError(f"invalid Gamma-Gamma parameters {self!r}")

    @property
    def scintillation_index(self) -> float:
        """Normalized irradiance variance, 1/a + 1/b + 1/(a*b)."""
        a, b = self.alpha, self.beta
        return 1.0 / a + 1.0 / b + 1.0 / (a * b)


@dataclass(frozen=True)
class NoTurbulence:
    """Degenerate channel with zero Rytov variance: irradiance is identically 1."""

    rytov_var: float = 0.0
    scintillation_index: float = 0.0


NO_TURBULENCE = NoTurbulence()


def rytov_variance(env: TurbulenceEnv) -> float:
    """Plane-wave Rytov variance 1.23 * Cn2 * k^(7/6) * D^(11/6)."""
    k = 2.0 * math.pi / env.wavelength_m
    return 1.23 * env.cn2 * k ** (7.0 / 6.0) * env.distance_m ** (11.0 / 6.0)


def gg_shape_params(rytov_var: float) -> GGParams | NoTurbulence:
    """Large- and small-scale shape parameters for a given Rytov variance."""
    if not (math.isfinite(rytov_var) and rytov_var >= 0):
        raise ValueError(f"Rytov variance must be finite and >= 0, got {rytov_var!r}")
    if rytov_var == 0:
        return NO_TURBULENCE
    s = rytov_var
    s65 = s ** 1.2  # delta^(12/5) with delta^2 = s
    alpha = 1.0 / math.expm1(0.49 * s / (1.0 + 1.11 * s65) ** (7.0 / 6.0))
    beta = 1.0 / math.expm1(0.51 * s / (1.0 + 0.69 * s65) ** (5.0 / 6.0))
    return GGParams(rytov_var=s, alpha=alpha, beta=beta)


def gg_log_pdf(i, p: GGParams):
    i = np.asarray(i, dtype=float)
    if np.any(~(i > 0)):
        raise ValueError("irradiance must be > 0")
    a, b = p.alpha, p.beta
    half = 0.5 * (a + b)
    log_norm = math.log(2.0) + half * math.log(a * b) - gammaln(a) - gammaln(b)
    log_k = log_bessel_k(a - b, 2.0 * np.sqrt(a * b * i))
    return log_norm + (half - 1.0) * np.log(i) + log_k


def gg_pdf(i, p: GGParams):
    """Gamma-Gamma irradiance density at ``i`` (scalar or array, i > 0)."""
    if isinstance(p, NoTurbulence):
        raise ValueError("no-turbulence channel has a point mass at I = 1, not a density")
    out = np.exp(gg_log_pdf(i, p))
    return float(out) if np.ndim(out) == 0 else out


def sample_irradiance(p: GGParams | NoTurbulence, rng: np.random.Generator, size=None):
    """Draw unit-mean irradiances as the product of two unit-mean Gamma variates."""
    if isinstance(p, NoTurbulence):
        return 1.0 if size is None else np.ones(size)
    x = rng.gamma(p.alpha, 1.0 / p.alpha, size)
    y = rng.gamma(p.beta, 1.0 / p.beta, size)
    return x * y


def read_golden_table(path: str | Path) -> np.ndarray:
    """Load a whitespace-separated (I, alpha, beta, pdf_value) table."""
    table = np.loadtxt(path, comments="#", ndmin=2)
    if table.shape[1] != 4:
        raise ValueError(f"{path}: expected 4 columns, found {table.shape[1]}")
    return table


def write_golden_table(path: str | Path, rows) -> None:
    with open(path, "w") as fh:
        fh.write("# I alpha beta pdf_value\n")
        for row in rows:
            fh.write(" ".join(f"{float(v):.14e}" for v in row) + "\n")
