"""
End-to-end statistics of the fixed-gain amplify-and-forward relay.

The end-to-end SNR gamma = gamma_1 gamma_2 / (gamma_2 + C) couples the two hop
kernels through a single Gamma(u - v) factor, so every exact metric is a
k-series of bivariate Fox-H functions. All k-terms of one evaluation share one
contour grid (see `fox_h_bivariate_series`).

Residue split: the "1 -" (CDF) and "1/2 -" (BER) leading constants are the
residues at u = v and v = 0. Moving the contours past those poles leaves a
bivariate remainder D' and a univariate remainder S' whose sum is the tail
probability itself.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from models import link_hap_user, link_ogs_hap
from models.link_hap_user import ModulationScheme, SeriesTermWeight, clamp_ber, series_weights
from models.link_ogs_hap import SnrLike, SnrValue, checked_probability, linear, positive_snr
from models.scenario import LinkOneParams, LinkTwoParams
from utils.errors import DegenerateExponentError, DomainError, EmptySampleError, NumericalError, PoleError
from utils.specfun import (
    BIVARIATE_CONTOUR,
    DEFAULT_CONTOUR,
    ContourConfig,
    FoxHSpec,
    JointGammaFactor,
    fox_h,
    fox_h_bivariate_series,
    log_gamma,
    separate_parameters,
    signed_log_gamma,
)

# Gamma(u - v)
JOINT = (JointGammaFactor(shift=1.0, scale1=-1.0, scale2=1.0),)


@dataclass(frozen=True)
class RelayConfig:
    """Fixed relay gain constant C and the two per-hop average SNRs (linear)."""

    gain: float
    gamma_bar_1: float
    gamma_bar_2: float
    lock_equal: bool = False

    def __post_init__(self) -> None:
        if not self.gain > 0:
            raise DomainError(f"relay gain C must be > 0, got {self.gain}")
        object.__setattr__(self, "gamma_bar_1", positive_snr(self.gamma_bar_1, "gamma_bar_1"))
        object.__setattr__(self, "gamma_bar_2", positive_snr(self.gamma_bar_2, "gamma_bar_2"))
        if self.lock_equal and self.gamma_bar_1 != self.gamma_bar_2:
            raise DomainError("lock_equal requires gamma_bar_1 == gamma_bar_2")

    @classmethod
    def locked(cls, gain: float, gamma_bar: SnrLike) -> "RelayConfig":
        value = positive_snr(gamma_bar)
        return cls(gain, value, value, lock_equal=True)

    def with_gamma_bar(self, gamma_bar: SnrLike) -> "RelayConfig":
        """Same gain, both averages set to gamma_bar (the figure sweeps)."""
        return RelayConfig.locked(self.gain, gamma_bar)


@dataclass(frozen=True)
class DiversityReport:
    candidates: Dict[str, float]
    order: float
    label: str


@dataclass
class AsymptoticBreakdown:
    """Labeled high-SNR terms (each already carrying the series prefactor) and their sum."""

    terms: Dict[str, float]
    total: float
    exponents: Dict[str, float] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)


def combine_snr(gamma_1, gamma_2, gain: float):
    """gamma_1 gamma_2 / (gamma_2 + C); works element-wise on arrays."""
    if not gain > 0:
        raise DomainError(f"relay gain C must be > 0, got {gain}")
    if isinstance(gamma_1, SnrValue) or isinstance(gamma_2, SnrValue):
        g1, g2 = float(gamma_1), float(gamma_2)
        if math.isinf(g2):
            return SnrValue(g1)
        return SnrValue(g1 * g2 / (g2 + gain))
    g1 = np.asarray(gamma_1, dtype=float)
    g2 = np.asarray(gamma_2, dtype=float)
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(g2), g1, g1 * g2 / (g2 + gain))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def _hop_one_factors(p1: LinkOneParams, variant: str) -> Tuple[list, list]:
    r1 = float(p1.r1)
    lower = [(p1.eta_s2, r1), (p1.gg.alpha, r1), (p1.gg.beta, r1)]
    # 1/Gamma(1 + u) for tail kernels, 1/Gamma(u) after differentiation
    upper_den = [(1.0 + p1.eta_s2, r1), (0.0 if variant == "pdf" else 1.0, 1.0)]
    return lower, upper_den


def _hop_one_kernel(p1: LinkOneParams, variant: str, p_b: float = 0.5) -> FoxHSpec:
    lower, upper_den = _hop_one_factors(p1, variant)
    if variant in ("cdf", "pdf"):
        return FoxHSpec.build(3, 0, upper_den, lower)
    if variant == "ber":
        return FoxHSpec.build(3, 1, [(1.0 - p_b, 1.0)] + upper_den, lower)
    if variant == "capacity":
        return FoxHSpec.build(4, 1, [(0.0, 1.0)] + upper_den, lower + [(0.0, 1.0)])
    raise DomainError(f"unknown kernel variant {variant!r}")


def _hop_two_lower(p2: LinkTwoParams, k: int) -> Tuple[list, list]:
    n = 2 * k + 1
    r2 = float(p2.r2)
    a = p2.exponent
    lower = [(p2.gg.alpha, r2), (p2.gg.beta, r2), (0.0, 1.0)] + [(a, r2)] * n
    return lower, [(a + 1.0, r2)] * n


def _hop_two_kernel(p2: LinkTwoParams, k: int) -> FoxHSpec:
    lower, upper = _hop_two_lower(p2, k)
    return FoxHSpec.build(len(lower), 0, upper, lower)


def _merged_kernel(p1: LinkOneParams, p2: LinkTwoParams, k: int, variant: str, p_b: float = 0.5) -> FoxHSpec:
    """Both hop kernels on one variable; what remains after the u = v residue."""
    lower1, upper1 = _hop_one_factors(p1, variant)
    lower2, upper2 = _hop_two_lower(p2, k)
    lower = lower1 + lower2
    if variant == "ber":
        return FoxHSpec.build(len(lower), 1, [(1.0 - p_b, 1.0)] + upper1 + upper2, lower)
    return FoxHSpec.build(len(lower), 0, upper1 + upper2, lower)


def _log_prefactor(p1: LinkOneParams, p2: LinkTwoParams) -> float:
    """log of eta^2 varpi N / (Gamma(a1) Gamma(b1) Gamma(a2) Gamma(b2))."""
    return (math.log(p1.eta_s2) + math.log(p2.varpi) + math.log(p2.norm_n)
            - log_gamma(p1.gg.alpha) - log_gamma(p1.gg.beta)
            - log_gamma(p2.gg.alpha) - log_gamma(p2.gg.beta))


def _hop_one_scale(p1: LinkOneParams) -> float:
    return p1.scale ** p1.r1


def _hop_two_argument(p2: LinkTwoParams, relay: RelayConfig) -> float:
    return p2.scale ** p2.r2 * relay.gain / relay.gamma_bar_2


def _split_contours(p1: LinkOneParams, p2: LinkTwoParams) -> Tuple[ContourConfig, ContourConfig]:
    r1, r2 = float(p1.r1), float(p2.r2)
    hop1 = min(p1.eta_s2, p1.gg.alpha, p1.gg.beta) / r1
    hop2 = min(p2.gg.alpha, p2.gg.beta, p2.exponent) / r2
    rho = min(1.0, hop1)
    bivariate = BIVARIATE_CONTOUR.explicit(-0.25 * rho, 0.25 * rho)
    univariate = DEFAULT_CONTOUR.explicit(-0.5 * min(1.0, hop1, hop2))
    return bivariate, univariate


def _active(p2: LinkTwoParams) -> List[SeriesTermWeight]:
    return [w for w in series_weights(p2) if w.weight > 0.0]


def _series(p1: LinkOneParams, p2: LinkTwoParams, variant: str, z1: float, z2: float,
            method: str, p_b: float = 0.5, log_extra: float = 0.0) -> np.ndarray:
    """
    Per-k values K * w_k * (kernel integral), for the direct contour or for the
    residue-split pieces D' + S'.
    """
    weights = _active(p2)
    kernel1 = _hop_one_kernel(p1, variant, p_b)
    kernels2 = [_hop_two_kernel(p2, w.k) for w in weights]
    base = _log_prefactor(p1, p2) + log_extra
    log_w = np.array([w.log_weight for w in weights])
    if method == "direct":
        values = fox_h_bivariate_series(JOINT, kernel1, kernels2, z1, z2, BIVARIATE_CONTOUR, base)
        return values * np.exp(log_w)
    if method != "split":
        raise DomainError(f"unknown method {method!r}")
    bivariate_cfg, univariate_cfg = _split_contours(p1, p2)
    remainder = fox_h_bivariate_series(JOINT, kernel1, kernels2, z1, z2, bivariate_cfg, base)
    merged = np.array([
        fox_h(_merged_kernel(p1, p2, w.k, variant, p_b), z1 * z2, univariate_cfg, base)
        for w in weights
    ])
    return (remainder + merged) * np.exp(log_w)


# ---------------------------------------------------------------------------
# Exact statistics
# ---------------------------------------------------------------------------

def e2e_cdf_terms(gamma: SnrLike, p1: LinkOneParams, p2: LinkTwoParams, relay: RelayConfig,
                  method: str = "split") -> np.ndarray:
    """Per-k contributions; with "split" they sum to the CDF, with "direct" to 1 - CDF."""
    g = linear(gamma)
    if g == 0:
        return np.zeros(len(_active(p2)))
    z1 = _hop_one_scale(p1) * g / relay.gamma_bar_1
    z2 = _hop_two_argument(p2, relay)
    values = _series(p1, p2, "cdf", z1, z2, method)
    return -values if method == "split" else values


def e2e_cdf(gamma: SnrLike, p1: LinkOneParams, p2: LinkTwoParams, relay: RelayConfig,
            method: str = "split") -> float:
    """P(gamma_e2e <= gamma); the outage probability at threshold gamma."""
    g = linear(gamma)
    if g == 0:
        return 0.0
    terms = e2e_cdf_terms(g, p1, p2, relay, method)
    value = float(terms.sum()) if method == "split" else 1.0 - float(terms.sum())
    logging.debug(f"[E2E] CDF({g:.4g}) = {value:.6e} ({method})")
    return checked_probability(value, "end-to-end CDF")


def e2e_pdf(gamma: SnrLike, p1: LinkOneParams, p2: LinkTwoParams, relay: RelayConfig) -> float:
    """Density of the end-to-end SNR; no residue to remove, so the standard contour is used."""
    g = linear(gamma)
    if g <= 0:
        raise DomainError("e2e_pdf requires gamma > 0")
    z1 = _hop_one_scale(p1) * g / relay.gamma_bar_1
    z2 = _hop_two_argument(p2, relay)
    value = float(_series(p1, p2, "pdf", z1, z2, "direct").sum()) / g
    if value < -1e-12:
        raise NumericalError(f"negative end-to-end density {value!r}")
    return max(value, 0.0)


def e2e_ber_integral(p_b: float, q_b: float, p1: LinkOneParams, p2: LinkTwoParams, relay: RelayConfig,
                     method: str = "split") -> float:
    """I(p, q) = E[Gamma(p, q gamma)] / (2 Gamma(p)) over the end-to-end SNR."""
    if not (p_b > 0 and q_b > 0):
        raise DomainError(f"BER parameters must be positive, got p={p_b}, q={q_b}")
    z1 = _hop_one_scale(p1) / (relay.gamma_bar_1 * q_b)
    z2 = _hop_two_argument(p2, relay)
    log_extra = -math.log(2.0) - log_gamma(p_b)
    total = float(_series(p1, p2, "ber", z1, z2, method, p_b, log_extra).sum())
    return -total if method == "split" else 0.5 - total


def _for_modulation(p1: LinkOneParams, p2: LinkTwoParams,
                    mod: ModulationScheme) -> Tuple[LinkOneParams, LinkTwoParams]:
    if p1.r1 != mod.detection or p2.r2 != mod.detection:
        logging.debug(f"[E2E] {mod.label}: switching both hops to r={mod.detection}")
    return p1.with_detection(mod.detection), p2.with_detection(mod.detection)


def e2e_avg_ber(mod: ModulationScheme, p1: LinkOneParams, p2: LinkTwoParams, relay: RelayConfig,
                method: str = "split") -> float:
    p1, p2 = _for_modulation(p1, p2, mod)
    total = sum(e2e_ber_integral(mod.p, q_b, p1, p2, relay, method) for q_b in mod.q_values)
    return clamp_ber(mod.delta * total, f"end-to-end {mod.label} BER")


def e2e_capacity(p1: LinkOneParams, p2: LinkTwoParams, relay: RelayConfig, c0: float) -> float:
    """Ergodic capacity E[ln(1 + c0 gamma)] in nats per channel use."""
    if not c0 > 0:
        raise DomainError(f"c0 must be > 0, got {c0}")
    z1 = _hop_one_scale(p1) / (relay.gamma_bar_1 * c0)
    z2 = _hop_two_argument(p2, relay)
    value = float(_series(p1, p2, "capacity", z1, z2, "direct").sum())
    if value < -1e-12:
        raise NumericalError(f"negative ergodic capacity {value!r}")
    return max(value, 0.0)


def _hop_one_moment(s: float, p1: LinkOneParams, gamma_bar_1: float) -> float:
    t = p1.r1 * s
    alpha, beta, eta2 = p1.gg.alpha, p1.gg.beta, p1.eta_s2
    if min(alpha + t, beta + t, eta2 + t) <= 0:
        raise DomainError(f"moment order s={s} puts a hop-1 gamma argument at or below zero")
    log_value = (math.log(eta2) - math.log(eta2 + t)
                 + log_gamma(alpha + t) + log_gamma(beta + t) - log_gamma(alpha) - log_gamma(beta)
                 + t * math.log(p1.a01 * p1.h_p1 / (alpha * beta)) + s * math.log(gamma_bar_1))
    return math.exp(log_value)


def _relay_factor_kernel(p2: LinkTwoParams, k: int, s: float) -> FoxHSpec:
    lower, upper = _hop_two_lower(p2, k)
    return FoxHSpec.build(len(lower), 1, [(1.0 - s, 1.0)] + upper, lower)


def e2e_moment(s: float, p1: LinkOneParams, p2: LinkTwoParams, relay: RelayConfig) -> float:
    """
    E[gamma^s] = E[gamma_1^s] * E[(1 + C/gamma_2)^(-s)].

    The second factor is 1 plus a Fox-H series whose contour sits left of the
    xi = 0 pole; for s -> 0 the series vanishes through 1/Gamma(s).
    """
    if not s > 0:
        raise DomainError(f"moment order must be > 0, got {s}")
    first = _hop_one_moment(s, p1, relay.gamma_bar_1)
    r2 = float(p2.r2)
    offset = 0.5 * max(-1.0, -p2.gg.alpha / r2, -p2.gg.beta / r2, -p2.exponent / r2)
    cfg = DEFAULT_CONTOUR.explicit(offset)
    z2 = _hop_two_argument(p2, relay)
    base = (math.log(p2.varpi) + math.log(p2.norm_n) - log_gamma(p2.gg.alpha) - log_gamma(p2.gg.beta)
            - log_gamma(s))
    correction = sum(fox_h(_relay_factor_kernel(p2, w.k, s), z2, cfg, base + w.log_weight)
                     for w in _active(p2))
    relay_factor = 1.0 + correction
    if not -1e-9 < relay_factor <= 1.0 + 1e-9:
        raise NumericalError(f"relay attenuation factor {relay_factor!r} lies outside (0, 1]")
    return first * min(relay_factor, 1.0)


def df_outage_reference(gamma_th: SnrLike, p1: LinkOneParams, p2: LinkTwoParams,
                        gamma_bar_1: SnrLike, gamma_bar_2: SnrLike) -> float:
    """Decode-and-forward outage: the link is up only when both hops are."""
    f1 = link_ogs_hap.snr_cdf(gamma_th, p1, gamma_bar_1)
    f2 = link_hap_user.snr_cdf(gamma_th, p2, gamma_bar_2)
    return 1.0 - (1.0 - f1) * (1.0 - f2)


# ---------------------------------------------------------------------------
# High-SNR behaviour
# ---------------------------------------------------------------------------

def diversity_order(p1: LinkOneParams, p2: LinkTwoParams) -> DiversityReport:
    r1, r2 = float(p1.r1), float(p2.r2)
    candidates = {
        "alpha1/r1": p1.gg.alpha / r1,
        "beta1/r1": p1.gg.beta / r1,
        "eta2/r1": p1.eta_s2 / r1,
        "alpha2/r2": p2.gg.alpha / r2,
        "beta2/r2": p2.gg.beta / r2,
        "gml/r2": p2.exponent / r2,
    }
    label = min(candidates, key=candidates.get)
    return DiversityReport(candidates=candidates, order=candidates[label], label=label)


class _SignedLog:
    """Product of real factors kept as sign and log-magnitude."""

    def __init__(self, log_value: float = 0.0):
        self.sign = 1.0
        self.log = log_value

    def gamma(self, x: float) -> "_SignedLog":
        try:
            sign, log_abs = signed_log_gamma(x)
        except PoleError as exc:
            raise DegenerateExponentError(f"asymptotic term hits a gamma pole at {x}") from exc
        self.sign *= sign
        self.log += log_abs
        return self

    def times(self, x: float, power: int = 1) -> "_SignedLog":
        if x == 0:
            raise DegenerateExponentError("asymptotic term has a vanishing factor")
        if x < 0 and power % 2:
            self.sign = -self.sign
        self.log += power * math.log(abs(x))
        return self

    def over(self, x: float, power: int = 1) -> "_SignedLog":
        return self.times(x, -power)

    def scaled(self, log_arg: float, exponent: float) -> float:
        return self.sign * math.exp(self.log + exponent * log_arg)


_NAMES = ("eta2", "alpha1", "beta1", "a", "alpha2", "beta2")


def _exponent_values(p1: LinkOneParams, p2: LinkTwoParams, perturb: bool) -> Tuple[Dict[str, float], List[str]]:
    """
    Exponent parameters with integer-spaced pairs pulled apart. Pairs are
    compared in hop-1 units, in hop-2 units and as given, since the asymptotic
    terms mix all three.
    """
    ratio = p1.r1 / p2.r2
    values = {"eta2": p1.eta_s2, "alpha1": p1.gg.alpha, "beta1": p1.gg.beta,
              "a": p2.exponent, "alpha2": p2.gg.alpha, "beta2": p2.gg.beta}
    hop = {"eta2": 1, "alpha1": 1, "beta1": 1, "a": 2, "alpha2": 2, "beta2": 2}
    notes: List[str] = []

    def to_units(name: str, unit: int) -> float:
        if unit == 0 or hop[name] == unit:
            return values[name]
        return values[name] * ratio if unit == 1 else values[name] / ratio

    def from_units(name: str, unit: int, x: float) -> float:
        if unit == 0 or hop[name] == unit:
            return x
        return x / ratio if unit == 1 else x * ratio

    for _ in range(20):
        changed = False
        for i, first in enumerate(_NAMES):
            for second in _NAMES[i + 1:]:
                for unit in (1, 2, 0):
                    x, y, note = separate_parameters(to_units(first, unit), to_units(second, unit), "integer")
                    if note is None:
                        continue
                    if not perturb:
                        raise DegenerateExponentError(f"{first} and {second} differ by an integer")
                    values[first] = from_units(first, unit, x)
                    values[second] = from_units(second, unit, y)
                    notes.append(f"{first}/{second}: {note}")
                    changed = True
                    break
                if changed:
                    break
            if changed:
                break
        if not changed:
            return values, notes
    raise DegenerateExponentError("could not separate the asymptotic exponents")


def _cross_terms(v: Dict[str, float], n: int, ratio: float, p_b: Optional[float], r2: float
                 ) -> List[Tuple[str, _SignedLog, float]]:
    """The three hop-2 pole terms and the gml term; exponents are in the cross argument."""
    e, a1, b1, big_a, a2, b2 = (v[name] for name in _NAMES)
    terms = []
    gml = (_SignedLog().times(n).gamma(a1 - ratio * big_a).gamma(b1 - ratio * big_a)
           .gamma(a2 - big_a).gamma(b2 - big_a).over(e - ratio * big_a).over(big_a))
    terms.append(("gml-cross", gml, big_a / r2))
    for label, this, other in (("alpha2-cross", a2, b2), ("beta2-cross", b2, a2)):
        term = (_SignedLog().gamma(e - ratio * this).gamma(a1 - ratio * this).gamma(b1 - ratio * this)
                .gamma(other - this).over(this).over(e - this).over(big_a - this, n))
        terms.append((label, term, this / r2))
    if p_b is not None:
        for _, term, exponent in terms:
            term.gamma(p_b + exponent)
    return terms


def _collect(parts: Dict[str, List[float]], exponents: Dict[str, float], notes: List[str]) -> AsymptoticBreakdown:
    terms = {label: float(sum(vals)) for label, vals in parts.items()}
    total = 0.0
    for label in sorted(terms, key=lambda name: exponents[name], reverse=True):
        total += terms[label]
    return AsymptoticBreakdown(terms=terms, total=total, exponents=exponents, notes=notes)


def asymptotic_cdf_breakdown(gamma: SnrLike, p1: LinkOneParams, p2: LinkTwoParams, relay: RelayConfig,
                             perturb: bool = True) -> AsymptoticBreakdown:
    """
    High-SNR expansion of the end-to-end CDF: six elementary terms per k.

    The two single-hop terms scale with z1 = B1 gamma / gamma_bar_1; the four
    cross terms with z1 * z2, z2 = B2 C / gamma_bar_2. Terms are accumulated
    smallest-magnitude first (largest exponent first, since the arguments are small).
    """
    g = positive_snr(gamma, "gamma")
    v, notes = _exponent_values(p1, p2, perturb)
    r1, r2 = float(p1.r1), float(p2.r2)
    ratio = r1 / r2
    e, a1, b1, big_a, a2, b2 = (v[name] for name in _NAMES)
    log_z1 = math.log(_hop_one_scale(p1) * g / relay.gamma_bar_1)
    log_x = log_z1 + math.log(_hop_two_argument(p2, relay))
    base = _log_prefactor(p1, p2)

    parts: Dict[str, List[float]] = {}
    exponents: Dict[str, float] = {}
    for w in _active(p2):
        n = 2 * w.k + 1
        pref = base + w.log_weight
        single = [
            ("eta2", _SignedLog(pref).gamma(a1 - e).gamma(b1 - e).gamma(a2).gamma(b2).over(e).over(big_a, n), e / r1),
            ("beta1", _SignedLog(pref).gamma(a1 - b1).gamma(a2).gamma(b2).over(b1).over(e - b1).over(big_a, n), b1 / r1),
        ]
        cross = [
            ("beta1-cross", _SignedLog(pref).gamma(e - b1).gamma(a1 - b1).gamma(a2 - b1 / ratio)
             .gamma(b2 - b1 / ratio).over(b1).over(e - b1).over(big_a - b1 / ratio, n), b1 / r1),
        ]
        for label, term, exponent in _cross_terms(v, n, ratio, None, r2):
            term.log += pref
            cross.append((label, term, exponent))
        for label, term, exponent in single:
            parts.setdefault(label, []).append(term.scaled(log_z1, exponent))
            exponents[label] = exponent
        for label, term, exponent in cross:
            parts.setdefault(label, []).append(term.scaled(log_x, exponent))
            exponents[label] = exponent
    return _collect(parts, exponents, notes)


def e2e_cdf_asymptotic(gamma: SnrLike, p1: LinkOneParams, p2: LinkTwoParams, relay: RelayConfig,
                       perturb: bool = True) -> float:
    return asymptotic_cdf_breakdown(gamma, p1, p2, relay, perturb).total


def asymptotic_ber_breakdown(mod: ModulationScheme, p1: LinkOneParams, p2: LinkTwoParams, relay: RelayConfig,
                             perturb: bool = True) -> AsymptoticBreakdown:
    """High-SNR expansion of the end-to-end average BER, summed over the modulation's q values."""
    p1, p2 = _for_modulation(p1, p2, mod)
    v, notes = _exponent_values(p1, p2, perturb)
    r1, r2 = float(p1.r1), float(p2.r2)
    ratio = r1 / r2
    e, a1, b1, big_a, a2, b2 = (v[name] for name in _NAMES)
    p_b = mod.p
    base = _log_prefactor(p1, p2) - math.log(2.0) - log_gamma(p_b) + math.log(mod.delta)
    log_z2 = math.log(_hop_two_argument(p2, relay))

    parts: Dict[str, List[float]] = {}
    exponents: Dict[str, float] = {}
    for q_b in mod.q_values:
        log_y1 = math.log(_hop_one_scale(p1) / (q_b * relay.gamma_bar_1))
        log_x = log_y1 + log_z2
        for w in _active(p2):
            n = 2 * w.k + 1
            pref = base + w.log_weight
            single = [
                ("eta2", _SignedLog(pref).gamma(a1 - e).gamma(b1 - e).gamma(a2).gamma(b2).gamma(p_b + e / r1)
                 .over(e).over(big_a, n), e / r1),
                ("alpha1", _SignedLog(pref).gamma(b1 - a1).gamma(a2).gamma(b2).gamma(p_b + a1 / r1)
                 .over(a1).over(e - a1).over(big_a, n), a1 / r1),
                ("beta1", _SignedLog(pref).gamma(a1 - b1).gamma(a2).gamma(b2).gamma(p_b + b1 / r1)
                 .over(b1).over(e - b1).over(big_a, n), b1 / r1),
            ]
            for label, term, exponent in single:
                parts.setdefault(label, []).append(term.scaled(log_y1, exponent))
                exponents[label] = exponent
            for label, term, exponent in _cross_terms(v, n, ratio, p_b, r2):
                term.log += pref
                parts.setdefault(label, []).append(term.scaled(log_x, exponent))
                exponents[label] = exponent
    return _collect(parts, exponents, notes)


def e2e_avg_ber_asymptotic(mod: ModulationScheme, p1: LinkOneParams, p2: LinkTwoParams, relay: RelayConfig,
                           perturb: bool = True) -> float:
    return asymptotic_ber_breakdown(mod, p1, p2, relay, perturb).total


# ---------------------------------------------------------------------------
# Relay gain calibration
# ---------------------------------------------------------------------------

def calibrate_relay_gain(p1: LinkOneParams, p2: LinkTwoParams, gamma_th: SnrLike,
                         gamma_bars: Sequence[float], reference_ops: Sequence[float],
                         bounds: Tuple[float, float] = (1e-3, 1e3)) -> Tuple[float, float]:
    """
    Fit the relay gain C so the analytic outage matches reference (simulated)
    outage values in the least-squares log sense.

    Returns:
        (C, mean squared log10 error at C)
    """
    pairs = [(gb, op) for gb, op in zip(gamma_bars, reference_ops) if op > 0]
    if not pairs:
        raise EmptySampleError("no positive reference outage values to calibrate against")
    lo, hi = bounds
    if not 0 < lo < hi:
        raise DomainError(f"invalid gain bounds {bounds}")

    def loss(log_gain: float) -> float:
        gain = 10.0 ** log_gain
        error = 0.0
        for gb, op in pairs:
            analytic = e2e_cdf(gamma_th, p1, p2, RelayConfig.locked(gain, gb))
            error += (math.log10(max(analytic, 1e-300)) - math.log10(op)) ** 2
        return error / len(pairs)

    result = minimize_scalar(loss, bounds=(math.log10(lo), math.log10(hi)), method="bounded",
                             options={"xatol": 1e-3})
    gain = 10.0 ** float(result.x)
    logging.info(f"[E2E] calibrated relay gain C={gain:.4g} (mse={float(result.fun):.3e})")
    return gain, float(result.fun)
