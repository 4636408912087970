"""
First hop statistics: ground station to HAP.

The instantaneous SNR is gamma = gamma_bar * h**r1 with h = h_p1 * h_a1 * h_g1,
the product of path loss, Gamma-Gamma turbulence and Rayleigh-jitter pointing
loss. Its CDF is a single Meijer G-function.
"""

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from models.scenario import LinkOneParams
from utils.errors import DomainError, NumericalError
from utils.specfun import DEFAULT_CONTOUR, FoxHSpec, log_bessel_k, log_gamma, meijer_g

CDF_BOUND_TOL = 1e-9


@dataclass(frozen=True)
class SnrValue:
    """A linear SNR value; build from decibels with `SnrValue.from_db`."""

    value: float

    def __post_init__(self) -> None:
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise DomainError(f"SNR must be finite and >= 0, got {self.value}")

    @classmethod
    def from_db(cls, db: float) -> "SnrValue":
        return cls(10.0 ** (db / 10.0))

    @property
    def db(self) -> float:
        return -math.inf if self.value == 0 else 10.0 * math.log10(self.value)

    def __float__(self) -> float:
        return self.value


SnrLike = Union[SnrValue, float]


def linear(snr: SnrLike) -> float:
    """Plain float from an SnrValue or a linear number."""
    value = float(snr)
    if not value >= 0:
        raise DomainError(f"SNR must be >= 0, got {value}")
    return value


def positive_snr(snr: SnrLike, name: str = "gamma_bar") -> float:
    value = linear(snr)
    if value <= 0:
        raise DomainError(f"{name} must be > 0, got {value}")
    return value


def checked_probability(value: float, label: str) -> float:
    """Clip to [0, 1] when within tolerance of the bounds, raise otherwise."""
    if not math.isfinite(value) or value < -CDF_BOUND_TOL or value > 1.0 + CDF_BOUND_TOL:
        raise NumericalError(f"{label} = {value!r} lies outside [0, 1]")
    return min(max(value, 0.0), 1.0)


def ha_pdf(h, gg):
    """
    Gamma-Gamma irradiance density with unit mean.

    f(h) = 2 (ab)^((a+b)/2) / (G(a) G(b)) h^((a+b)/2 - 1) K_{a-b}(2 sqrt(ab h))
    """
    h_arr = np.asarray(h, dtype=float)
    if np.any(h_arr <= 0):
        raise DomainError("ha_pdf requires h > 0")
    a, b = gg.alpha, gg.beta
    ab = a * b
    log_pdf = (math.log(2.0) + 0.5 * (a + b) * math.log(ab) - log_gamma(a) - log_gamma(b)
               + (0.5 * (a + b) - 1.0) * np.log(h_arr)
               + log_bessel_k(a - b, 2.0 * np.sqrt(ab * h_arr)))
    result = np.exp(log_pdf)
    return float(result) if np.ndim(result) == 0 else result


def hg1_pdf(h, eta_s2: float, a0: float):
    """Pointing-loss density (eta^2/A0)(h/A0)^(eta^2 - 1) on (0, A0]."""
    if not (eta_s2 > 0 and 0 < a0 <= 1):
        raise DomainError(f"invalid pointing parameters eta_s2={eta_s2}, A0={a0}")
    h_arr = np.asarray(h, dtype=float)
    if np.any(h_arr <= 0) or np.any(h_arr > a0):
        raise DomainError(f"hg1_pdf support is (0, {a0}]")
    result = (eta_s2 / a0) * (h_arr / a0) ** (eta_s2 - 1.0)
    return float(result) if np.ndim(result) == 0 else result


def _cdf_kernel(params: LinkOneParams) -> FoxHSpec:
    gg = params.gg
    return FoxHSpec.meijer(4, 0, [1.0 + params.eta_s2, 1.0], [0.0, params.eta_s2, gg.alpha, gg.beta])


def residue_offset(params: LinkOneParams) -> float:
    """Contour abscissa just left of the u = 0 pole and right of every other pole."""
    gg = params.gg
    return -0.5 * min(1.0, params.eta_s2, gg.alpha, gg.beta)


def cdf_argument(gamma: float, params: LinkOneParams, gamma_bar: float) -> float:
    return params.scale * (gamma / gamma_bar) ** (1.0 / params.r1)


def snr_cdf(gamma: SnrLike, params: LinkOneParams, gamma_bar: SnrLike, method: str = "split") -> float:
    """
    P(gamma_H1 <= gamma).

    method="direct" evaluates 1 - (eta^2/(G(a)G(b))) G^{4,0}_{2,4} on the standard
    contour. method="split" moves the contour past the u = 0 pole; the removed
    residue is exactly the leading 1, so small probabilities come out without
    cancellation.
    """
    g = linear(gamma)
    gbar = positive_snr(gamma_bar)
    if g == 0:
        return 0.0
    z = cdf_argument(g, params, gbar)
    kernel = _cdf_kernel(params)
    log_pref = math.log(params.eta_s2) - log_gamma(params.gg.alpha) - log_gamma(params.gg.beta)
    if method == "direct":
        value = 1.0 - meijer_g(kernel, z, DEFAULT_CONTOUR, log_pref)
    elif method == "split":
        value = -meijer_g(kernel, z, DEFAULT_CONTOUR.explicit(residue_offset(params)), log_pref)
    else:
        raise DomainError(f"unknown CDF method {method!r}")
    logging.debug(f"[LinkOne] CDF({g:.4g}; gamma_bar={gbar:.4g}) = {value:.6e}")
    return checked_probability(value, "hop-1 CDF")


def snr_pdf(gamma: SnrLike, params: LinkOneParams, gamma_bar: SnrLike, step: float = 1e-3) -> float:
    """Density of gamma_H1 by a central difference of `snr_cdf` in log(gamma)."""
    g = linear(gamma)
    if g <= 0:
        raise DomainError("snr_pdf requires gamma > 0")
    upper = snr_cdf(g * math.exp(step), params, gamma_bar)
    lower = snr_cdf(g * math.exp(-step), params, gamma_bar)
    return max(upper - lower, 0.0) / (2.0 * step * g)
