"""
Second hop statistics: HAP to user through the optical reflector.

The geometric and misalignment loss follows a Hoyt-type radial model whose
density carries a Bessel I0 factor. Expanding I0 into an even-power series
turns every statistic into a finite sum of Meijer-G or Fox-H terms indexed by
k = 0..N_k. Each term is evaluated in log-space with its series weight folded
into the scale, then summed in k order.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from models.link_ogs_hap import SnrLike, checked_probability, linear, positive_snr
from models.scenario import HETERODYNE, IMDD, LinkTwoParams
from utils.errors import DomainError, NumericalError
from utils.specfun import DEFAULT_CONTOUR, FoxHSpec, fox_h, log_bessel_i0, log_gamma, meijer_g

BER_CLAMP_WARN = 1e-6
CDF_TOL = 1e-9


# ---------------------------------------------------------------------------
# Modulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModulationScheme:
    """
    Unified BER parameters: P_e = delta * sum_m I2(p, q_m).

    kind is "OOK", "QAM" (square constellations only) or "PSK". OOK is detected
    with IM/DD, the coherent schemes with heterodyne detection.
    """

    kind: str
    order: int = 2

    def __post_init__(self) -> None:
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        if kind == "OOK":
            object.__setattr__(self, "order", 2)
            return
        if kind not in ("QAM", "PSK"):
            raise DomainError(f"unknown modulation {self.kind!r}")
        m = self.order
        if m < 4 or m & (m - 1):
            raise DomainError(f"{kind} order must be a power of two >= 4, got {m}")
        if kind == "QAM" and int(math.log2(m)) % 2:
            raise DomainError(f"only square QAM is supported, got M={m}")

    @classmethod
    def ook(cls) -> "ModulationScheme":
        return cls("OOK")

    @classmethod
    def qam(cls, order: int) -> "ModulationScheme":
        return cls("QAM", order)

    @classmethod
    def psk(cls, order: int) -> "ModulationScheme":
        return cls("PSK", order)

    @classmethod
    def from_name(cls, name: str) -> "ModulationScheme":
        """Parse "OOK", "16-QAM", "8PSK" and similar labels."""
        text = name.strip().upper().replace("-", "").replace("_", "")
        if text == "OOK":
            return cls.ook()
        for kind in ("QAM", "PSK"):
            if text.endswith(kind) and text[: -len(kind)].isdigit():
                return cls(kind, int(text[: -len(kind)]))
        raise DomainError(f"cannot parse modulation {name!r}")

    @property
    def label(self) -> str:
        return "OOK" if self.kind == "OOK" else f"{self.order}-{self.kind}"

    @property
    def bits(self) -> int:
        return int(math.log2(self.order))

    @property
    def detection(self) -> int:
        return IMDD if self.kind == "OOK" else HETERODYNE

    @property
    def delta(self) -> float:
        if self.kind == "OOK":
            return 1.0
        if self.kind == "QAM":
            return 4.0 / self.bits * (1.0 - 1.0 / math.sqrt(self.order))
        return 2.0 / max(self.bits, 2)

    @property
    def p(self) -> float:
        return 0.5

    @property
    def n_terms(self) -> int:
        if self.kind == "OOK":
            return 1
        if self.kind == "QAM":
            return int(round(math.sqrt(self.order))) // 2
        return max(self.order // 4, 1)

    @property
    def q_values(self) -> Tuple[float, ...]:
        if self.kind == "OOK":
            return (0.5,)
        m = self.order
        if self.kind == "QAM":
            return tuple(3.0 * (2 * k - 1) ** 2 / (2.0 * (m - 1)) * self.bits for k in range(1, self.n_terms + 1))
        return tuple(math.sin((2 * k - 1) * math.pi / m) ** 2 * self.bits for k in range(1, self.n_terms + 1))


# ---------------------------------------------------------------------------
# Series weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeriesTermWeight:
    """k-th weight (2k)!/(k!)^2 * c^(2k) of the log-series, kept in log form too."""

    k: int
    weight: float
    log_weight: float


def series_weights(p: LinkTwoParams, n_k: Optional[int] = None) -> List[SeriesTermWeight]:
    """Weights for k = 0..n_k; zero-weight terms (q_g = 1, k >= 1) are kept with log_weight -inf."""
    count = p.n_k if n_k is None else n_k
    if count < 0:
        raise DomainError(f"n_k must be >= 0, got {count}")
    c = p.log_coefficient
    weights = []
    for k in range(count + 1):
        if k == 0:
            weights.append(SeriesTermWeight(0, 1.0, 0.0))
        elif c == 0.0:
            weights.append(SeriesTermWeight(k, 0.0, -math.inf))
        else:
            log_w = math.log(math.comb(2 * k, k)) + 2 * k * math.log(c)
            weights.append(SeriesTermWeight(k, math.exp(log_w), log_w))
    return weights


def _resolve(p: LinkTwoParams, n_k: Optional[int]) -> LinkTwoParams:
    if n_k is None or n_k == p.n_k:
        return p
    return p.with_n_k(n_k)


def _log_prefactor(p: LinkTwoParams) -> float:
    """log of varpi * N / (Gamma(alpha) Gamma(beta))."""
    return math.log(p.varpi) + math.log(p.norm_n) - log_gamma(p.gg.alpha) - log_gamma(p.gg.beta)


# ---------------------------------------------------------------------------
# Channel densities
# ---------------------------------------------------------------------------

def _check_support(h, a02: float) -> np.ndarray:
    h_arr = np.asarray(h, dtype=float)
    if np.any(h_arr <= 0) or np.any(h_arr > a02 * (1.0 + 1e-15)):
        raise DomainError(f"GML density support is (0, {a02}]")
    return h_arr


def _scalar(result):
    return float(result) if np.ndim(result) == 0 else result


def gml_pdf_exact(h, p: LinkTwoParams):
    """Hoyt-type GML density (varpi/A)(h/A)^(a-1) I0(2c * -ln(h/A))."""
    h_arr = _check_support(h, p.a02)
    log_ratio = np.minimum(np.log(h_arr / p.a02), 0.0)
    log_pdf = (math.log(p.varpi / p.a02) + (p.exponent - 1.0) * log_ratio
               + log_bessel_i0(-2.0 * p.log_coefficient * log_ratio))
    return _scalar(np.exp(log_pdf))


def gml_pdf_approx(h, p: LinkTwoParams, n_k: Optional[int] = None):
    """Truncated even-power series of the exact density, rescaled to unit mass by N."""
    p = _resolve(p, n_k)
    h_arr = _check_support(h, p.a02)
    log_l = -np.minimum(np.log(h_arr / p.a02), 0.0)
    total = np.zeros_like(log_l)
    for term in series_weights(p):
        if term.weight == 0.0:
            continue
        total = total + term.weight * log_l ** (2 * term.k) / math.factorial(2 * term.k)
    base = p.norm_n * (p.varpi / p.a02) * (h_arr / p.a02) ** (p.exponent - 1.0)
    return _scalar(base * total)


def _pdf_kernel(p: LinkTwoParams, k: int) -> FoxHSpec:
    n = 2 * k + 1
    a = p.exponent
    return FoxHSpec.meijer(n + 2, 0, [a + 1.0] * n, [p.gg.alpha, p.gg.beta] + [a] * n)


def _cdf_kernel(p: LinkTwoParams, k: int) -> FoxHSpec:
    n = 2 * k + 1
    a = p.exponent
    return FoxHSpec.meijer(n + 3, 0, [1.0] + [a + 1.0] * n, [0.0, p.gg.alpha, p.gg.beta] + [a] * n)


def composite_pdf_h2(h, p: LinkTwoParams, n_k: Optional[int] = None) -> float:
    """Density of h_p2 * h_a2 * h_g2 under the approximate GML model."""
    p = _resolve(p, n_k)
    h = float(h)
    if h <= 0:
        raise DomainError("composite_pdf_h2 requires h > 0")
    z = p.scale * h
    base = _log_prefactor(p) - math.log(h)
    total = 0.0
    for term in series_weights(p):
        if term.weight == 0.0:
            continue
        total += meijer_g(_pdf_kernel(p, term.k), z, DEFAULT_CONTOUR, base + term.log_weight)
    return total


# ---------------------------------------------------------------------------
# SNR statistics
# ---------------------------------------------------------------------------

def _channel_level(gamma: float, p: LinkTwoParams, gamma_bar: float) -> float:
    return (gamma / gamma_bar) ** (1.0 / p.r2)


def residue_offset(p: LinkTwoParams) -> float:
    return -0.5 * min(1.0, p.gg.alpha, p.gg.beta, p.exponent)


def cdf_terms(gamma: SnrLike, p: LinkTwoParams, gamma_bar: SnrLike, method: str = "split",
              n_k: Optional[int] = None) -> np.ndarray:
    """
    Per-k contributions to the CDF of gamma_H2.

    With method="split" the contributions sum to the CDF itself (the u = 0
    residues, which add up to exactly 1, are removed analytically). With
    method="direct" they sum to the complementary CDF.
    """
    p = _resolve(p, n_k)
    g = linear(gamma)
    gbar = positive_snr(gamma_bar)
    weights = series_weights(p)
    if g == 0:
        return np.zeros(len(weights))
    if method == "split":
        cfg, sign = DEFAULT_CONTOUR.explicit(residue_offset(p)), -1.0
    elif method == "direct":
        cfg, sign = DEFAULT_CONTOUR, 1.0
    else:
        raise DomainError(f"unknown CDF method {method!r}")
    z = p.scale * _channel_level(g, p, gbar)
    base = _log_prefactor(p)
    out = np.zeros(len(weights))
    for i, term in enumerate(weights):
        if term.weight == 0.0:
            continue
        out[i] = sign * meijer_g(_cdf_kernel(p, term.k), z, cfg, base + term.log_weight)
    return out


def snr_cdf(gamma: SnrLike, p: LinkTwoParams, gamma_bar: SnrLike, method: str = "split",
            n_k: Optional[int] = None) -> float:
    """P(gamma_H2 <= gamma); also the outage probability at threshold gamma."""
    terms = cdf_terms(gamma, p, gamma_bar, method, n_k)
    if linear(gamma) == 0:
        return 0.0
    value = float(terms.sum()) if method == "split" else 1.0 - float(terms.sum())
    logging.debug(f"[LinkTwo] CDF terms {np.array2string(terms, precision=3)}")
    return checked_probability(value, "hop-2 CDF")


def outage_probability(gamma_th: SnrLike, p: LinkTwoParams, gamma_bar: SnrLike,
                       n_k: Optional[int] = None) -> float:
    return snr_cdf(gamma_th, p, gamma_bar, n_k=n_k)


def snr_pdf(gamma: SnrLike, p: LinkTwoParams, gamma_bar: SnrLike, n_k: Optional[int] = None) -> float:
    """Density of gamma_H2: (K/(r gamma)) sum_k w_k G^{2k+3,0}_{2k+1,2k+3}[b x]."""
    p = _resolve(p, n_k)
    g = linear(gamma)
    gbar = positive_snr(gamma_bar)
    if g <= 0:
        raise DomainError("snr_pdf requires gamma > 0")
    z = p.scale * _channel_level(g, p, gbar)
    base = _log_prefactor(p) - math.log(p.r2 * g)
    total = 0.0
    for term in series_weights(p):
        if term.weight == 0.0:
            continue
        total += meijer_g(_pdf_kernel(p, term.k), z, DEFAULT_CONTOUR, base + term.log_weight)
    return total


# ---------------------------------------------------------------------------
# Performance metrics
# ---------------------------------------------------------------------------

def _ber_kernel(p: LinkTwoParams, k: int, p_b: float) -> FoxHSpec:
    n = 2 * k + 1
    r = float(p.r2)
    a = p.exponent
    lower = [(0.0, r), (p.gg.alpha, r), (p.gg.beta, r)] + [(a, r)] * n
    upper = [(1.0 - p_b, 1.0), (1.0, r)] + [(a + 1.0, r)] * n
    return FoxHSpec.build(n + 3, 1, upper, lower)


def ber_integral(p_b: float, q_b: float, p: LinkTwoParams, gamma_bar: SnrLike,
                 n_k: Optional[int] = None) -> float:
    """
    I2(p, q) = q^p / (2 Gamma(p)) * int x^(p-1) exp(-q x) F(x) dx, i.e. the
    average of Gamma(p, q gamma) / (2 Gamma(p)) over the hop-2 SNR.
    """
    if not (p_b > 0 and q_b > 0):
        raise DomainError(f"BER parameters must be positive, got p={p_b}, q={q_b}")
    p = _resolve(p, n_k)
    gbar = positive_snr(gamma_bar)
    z = p.scale ** p.r2 / (gbar * q_b)
    cfg = DEFAULT_CONTOUR.explicit(residue_offset(p) / p.r2)
    base = _log_prefactor(p) + math.log(p.r2) - math.log(2.0) - log_gamma(p_b)
    total = 0.0
    for term in series_weights(p):
        if term.weight == 0.0:
            continue
        total -= fox_h(_ber_kernel(p, term.k, p_b), z, cfg, base + term.log_weight)
    return total


def clamp_ber(value: float, label: str) -> float:
    if not math.isfinite(value) or value < -CDF_TOL:
        raise NumericalError(f"{label} = {value!r} is not a valid error rate")
    if value > 0.5:
        if value > 0.5 + BER_CLAMP_WARN:
            logging.warning(f"[LinkTwo] {label} = {value:.9f} exceeds 1/2, clamping")
        return 0.5
    return max(value, 0.0)


def avg_ber(mod: ModulationScheme, p: LinkTwoParams, gamma_bar: SnrLike, n_k: Optional[int] = None) -> float:
    """Average BER of the hop; the bundle is switched to the detection the modulation uses."""
    if p.r2 != mod.detection:
        logging.debug(f"[LinkTwo] {mod.label} uses r2={mod.detection}, overriding r2={p.r2}")
        p = p.with_detection(mod.detection)
    total = sum(ber_integral(mod.p, q_b, p, gamma_bar, n_k) for q_b in mod.q_values)
    return clamp_ber(mod.delta * total, f"{mod.label} BER")


def _capacity_kernel(p: LinkTwoParams, k: int) -> FoxHSpec:
    n = 2 * k + 1
    r = float(p.r2)
    a = p.exponent
    lower = [(0.0, r), (p.gg.alpha, r), (p.gg.beta, r), (0.0, 1.0)] + [(a, r)] * n
    upper = [(0.0, 1.0), (1.0, r)] + [(a + 1.0, r)] * n
    return FoxHSpec.build(n + 4, 1, upper, lower)


def capacity(p: LinkTwoParams, gamma_bar: SnrLike, c0: float, n_k: Optional[int] = None) -> float:
    """Ergodic capacity E[ln(1 + c0 gamma)] in nats per channel use."""
    if not c0 > 0:
        raise DomainError(f"c0 must be > 0, got {c0}")
    p = _resolve(p, n_k)
    gbar = positive_snr(gamma_bar)
    z = p.scale ** p.r2 / (gbar * c0)
    base = _log_prefactor(p) + math.log(p.r2)
    total = 0.0
    for term in series_weights(p):
        if term.weight == 0.0:
            continue
        total += fox_h(_capacity_kernel(p, term.k), z, DEFAULT_CONTOUR, base + term.log_weight)
    if total < -1e-12:
        raise NumericalError(f"negative ergodic capacity {total!r}")
    return max(total, 0.0)


def moment(s: float, p: LinkTwoParams, gamma_bar: SnrLike, n_k: Optional[int] = None) -> float:
    """E[gamma_H2^s] in closed form."""
    p = _resolve(p, n_k)
    gbar = positive_snr(gamma_bar)
    t = p.r2 * s
    alpha, beta, a = p.gg.alpha, p.gg.beta, p.exponent
    if min(alpha + t, beta + t, a + t) <= 0:
        raise DomainError(f"moment order s={s} puts a gamma argument at or below zero")
    log_scale = t * (math.log(p.a02 * p.h_p2 / (alpha * beta)) + math.log(gbar) / p.r2)
    log_common = (_log_prefactor(p) + log_gamma(alpha + t) + log_gamma(beta + t) + log_scale)
    total = 0.0
    for term in series_weights(p):
        if term.weight == 0.0:
            continue
        total += math.exp(log_common + term.log_weight - (2 * term.k + 1) * math.log(a + t))
    return total


def gml_approx_error(p: LinkTwoParams, n_k: int, points: int = 50) -> float:
    """Root-mean-square gap between the truncated and exact GML densities on a uniform support grid."""
    h = p.a02 * np.arange(1, points + 1) / points
    gap = np.asarray(gml_pdf_approx(h, p, n_k)) - np.asarray(gml_pdf_exact(h, p))
    return float(np.sqrt(np.mean(gap * gap)))
