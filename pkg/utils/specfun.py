"""
Special functions and Mellin-Barnes contour evaluation.

The elementary special functions are thin wrappers over scipy.special that add
the pole and domain checks the link statistics rely on:

- complex log-gamma (scipy.special.loggamma)
- modified Bessel functions K_nu and I_0, in log form from the exponentially
  scaled kve / i0e so large arguments do not overflow
- erf / erfc
- upper incomplete gamma, gammaincc(p, x) * Gamma(p)

Meijer-G, Fox-H and bivariate Fox-H functions are evaluated here as
vertical-contour integrals of gamma-function kernels, using composite
Gauss-Legendre panels.

Convention for the univariate Fox-H function (argument z, integration variable u):

    H = (1/2 pi i) * integral Theta(u) z^(-u) du
    Theta(u) = prod_{j<m} G(b_j + B_j u) prod_{i<n} G(1 - a_i - A_i u)
               / [prod_{j>=m} G(1 - b_j - B_j u) prod_{i>=n} G(a_i + A_i u)]

The bivariate function uses the same orientation in both variables, with the
joint factors G(1 - a - alpha u - A v) in the numerator.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special

from utils.errors import (
    ContourSeparationError,
    ConvergenceError,
    DomainError,
    NumericalError,
    PoleError,
)

ComplexValue = complex
ArrayLike = Union[float, complex, np.ndarray]

_POLE_TOL = 1e-12
_IMAG_DISCARD = 1e-9
_IMAG_FAIL = 1e-6


def _unwrap(out: np.ndarray, like: np.ndarray) -> ArrayLike:
    return out.item() if like.ndim == 0 else out.reshape(like.shape)


# ---------------------------------------------------------------------------
# Gamma function family
# ---------------------------------------------------------------------------

def _check_poles(z: np.ndarray) -> None:
    re = z.real
    near_axis = np.abs(z.imag) < _POLE_TOL
    near_int = np.abs(re - np.round(re)) < _POLE_TOL
    bad = near_axis & near_int & (np.round(re) <= 0)
    if np.any(bad):
        first = complex(z[bad][0])
        raise PoleError(f"log-gamma evaluated at pole z = {first}")


def complex_log_gamma(z: ArrayLike) -> ArrayLike:
    """
    Principal branch of ln Gamma(z) for complex scalars or arrays.

    Raises:
        PoleError: when z lies within 1e-12 of a non-positive integer.
    """
    arr = np.asarray(z, dtype=complex)
    flat = np.atleast_1d(arr)
    _check_poles(flat)
    out = special.loggamma(flat)
    if not np.all(np.isfinite(out)):
        raise NumericalError("log-gamma produced a non-finite value")
    return complex(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def log_gamma(x: float) -> float:
    """ln Gamma(x) for real x > 0."""
    if x <= 0:
        raise DomainError(f"log_gamma requires x > 0, got {x}")
    return float(special.gammaln(x))


def signed_log_gamma(x: float) -> Tuple[float, float]:
    """Return (sign, ln|Gamma(x)|) for real x off the poles."""
    _check_poles(np.atleast_1d(np.asarray(x, dtype=complex)))
    return float(special.gammasgn(x)), float(special.gammaln(x))


def gamma_fn(x: float) -> float:
    sign, log_abs = signed_log_gamma(x)
    return sign * math.exp(log_abs)


# ---------------------------------------------------------------------------
# Bessel functions
# ---------------------------------------------------------------------------

def log_bessel_k(order: float, x: ArrayLike) -> ArrayLike:
    """ln K_nu(x) for x > 0, as ln kve(nu, x) - x."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("bessel_k requires x > 0")
    scaled = special.kve(order, arr)
    if np.any(~np.isfinite(scaled) | (scaled <= 0)):
        raise NumericalError(f"K_{order} out of floating-point range")
    return _unwrap(np.log(scaled) - arr, arr)


def bessel_k(order: float, x: ArrayLike) -> ArrayLike:
    """Modified Bessel function of the second kind K_nu(x), x > 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("bessel_k requires x > 0")
    return _unwrap(special.kv(order, arr), arr)


def log_bessel_i0(x: ArrayLike) -> ArrayLike:
    arr = np.abs(np.asarray(x, dtype=float))
    return _unwrap(np.log(special.i0e(arr)) + arr, arr)


def bessel_i0(x: ArrayLike) -> ArrayLike:
    """Modified Bessel function of the first kind, order zero."""
    arr = np.asarray(x, dtype=float)
    return _unwrap(special.i0(arr), arr)


# ---------------------------------------------------------------------------
# Error functions and incomplete gamma
# ---------------------------------------------------------------------------

def erfc(x: ArrayLike) -> ArrayLike:
    arr = np.asarray(x, dtype=float)
    return _unwrap(special.erfc(arr), arr)


def erf(x: ArrayLike) -> ArrayLike:
    arr = np.asarray(x, dtype=float)
    return _unwrap(special.erf(arr), arr)


def upper_incomplete_gamma(p: float, x: ArrayLike) -> ArrayLike:
    """Gamma(p, x) = integral_x^inf t^(p-1) e^(-t) dt for p > 0, x >= 0."""
    if not p > 0:
        raise DomainError(f"upper_incomplete_gamma requires p > 0, got {p}")
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise DomainError("upper_incomplete_gamma requires finite x >= 0")
    regularized = special.gammaincc(p, arr)
    with np.errstate(divide="ignore"):
        out = np.where(regularized > 0, np.exp(np.log(regularized) + special.gammaln(p)), 0.0)
    return _unwrap(out, arr)


# ---------------------------------------------------------------------------
# Mellin-Barnes kernel descriptions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaFactor:
    """Gamma(shift + scale*u) or its mirrored form, placed by `location`."""

    shift: float
    scale: float = 1.0
    location: str = "numerator"

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise DomainError(f"gamma factor scale must be > 0, got {self.scale}")
        if self.location not in ("numerator", "denominator"):
            raise DomainError(f"unknown gamma factor location {self.location!r}")


@dataclass(frozen=True)
class FoxHSpec:
    """Parameters of H^{m,n}_{p,q}[z | (a_i, A_i); (b_j, B_j)]."""

    m: int
    n: int
    upper: Tuple[GammaFactor, ...] = ()
    lower: Tuple[GammaFactor, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= self.m <= len(self.lower):
            raise DomainError(f"need 0 <= m <= q, got m={self.m}, q={len(self.lower)}")
        if not 0 <= self.n <= len(self.upper):
            raise DomainError(f"need 0 <= n <= p, got n={self.n}, p={len(self.upper)}")
        for i, factor in enumerate(self.upper):
            expected = "numerator" if i < self.n else "denominator"
            if factor.location != expected:
                raise DomainError(f"upper factor {i} must be a {expected} factor")
        for j, factor in enumerate(self.lower):
            expected = "numerator" if j < self.m else "denominator"
            if factor.location != expected:
                raise DomainError(f"lower factor {j} must be a {expected} factor")

    @property
    def p(self) -> int:
        return len(self.upper)

    @property
    def q(self) -> int:
        return len(self.lower)

    @property
    def is_meijer(self) -> bool:
        return all(f.scale == 1.0 for f in self.upper + self.lower)

    @classmethod
    def build(cls, m: int, n: int,
              upper: Sequence[Tuple[float, float]],
              lower: Sequence[Tuple[float, float]]) -> "FoxHSpec":
        """Create a spec from (shift, scale) pairs; locations follow m and n."""
        up = tuple(GammaFactor(float(a), float(A), "numerator" if i < n else "denominator")
                   for i, (a, A) in enumerate(upper))
        lo = tuple(GammaFactor(float(b), float(B), "numerator" if j < m else "denominator")
                   for j, (b, B) in enumerate(lower))
        return cls(m=m, n=n, upper=up, lower=lo)

    @classmethod
    def meijer(cls, m: int, n: int, a: Sequence[float], b: Sequence[float]) -> "FoxHSpec":
        return cls.build(m, n, [(x, 1.0) for x in a], [(x, 1.0) for x in b])


@dataclass(frozen=True)
class JointGammaFactor:
    """Mixed factor Gamma(1 - shift - scale1*u - scale2*v) (numerator) or
    Gamma(shift + scale1*u + scale2*v) (denominator)."""

    shift: float
    scale1: float
    scale2: float
    location: str = "numerator"


@dataclass(frozen=True)
class BivariateFoxHSpec:
    joint: Tuple[JointGammaFactor, ...]
    kernel1: FoxHSpec
    kernel2: FoxHSpec


@dataclass(frozen=True)
class ContourConfig:
    offset_mode: str = "auto"
    offset: Optional[float] = None
    offset2: Optional[float] = None
    half_height: float = 40.0
    nodes: int = 32
    rel_tol: float = 1e-10
    max_refinements: int = 4

    def __post_init__(self) -> None:
        if self.offset_mode not in ("auto", "explicit"):
            raise DomainError(f"offset_mode must be auto or explicit, got {self.offset_mode!r}")
        if self.offset_mode == "explicit" and self.offset is None:
            raise DomainError("explicit offset_mode needs an offset")
        if not self.half_height > 0:
            raise DomainError("half_height must be > 0")
        if self.nodes < 32:
            raise DomainError("nodes must be >= 32")
        if not 0 < self.rel_tol < 1:
            raise DomainError("rel_tol must lie in (0, 1)")
        if self.max_refinements < 1:
            raise DomainError("max_refinements must be positive")

    def explicit(self, offset: float, offset2: Optional[float] = None) -> "ContourConfig":
        return ContourConfig("explicit", offset, offset2, self.half_height,
                             self.nodes, self.rel_tol, self.max_refinements)


DEFAULT_CONTOUR = ContourConfig()
BIVARIATE_CONTOUR = ContourConfig(half_height=20.0, nodes=32, rel_tol=1e-6, max_refinements=2)


# ---------------------------------------------------------------------------
# Kernel algebra: every factor is Gamma(c0 + c1*u + c2*v) ** power
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Term:
    c0: float
    c1: float
    c2: float
    power: int


def _merge(raw: Sequence[Tuple[float, float, float, int]]) -> List[_Term]:
    counts: Counter = Counter()
    for c0, c1, c2, power in raw:
        counts[(float(c0), float(c1), float(c2))] += power
    return [_Term(c0, c1, c2, power) for (c0, c1, c2), power in counts.items() if power != 0]


def _raw_terms(spec: FoxHSpec, axis: int) -> List[Tuple[float, float, float, int]]:
    raw = []

    def put(c0: float, coeff: float, power: int) -> None:
        if axis == 1:
            raw.append((c0, coeff, 0.0, power))
        else:
            raw.append((c0, 0.0, coeff, power))

    for j, f in enumerate(spec.lower):
        if j < spec.m:
            put(f.shift, f.scale, 1)
        else:
            put(1.0 - f.shift, -f.scale, -1)
    for i, f in enumerate(spec.upper):
        if i < spec.n:
            put(1.0 - f.shift, -f.scale, 1)
        else:
            put(f.shift, f.scale, -1)
    return raw


def _joint_terms(joint: Sequence[JointGammaFactor]) -> List[Tuple[float, float, float, int]]:
    raw = []
    for f in joint:
        if f.location == "numerator":
            raw.append((1.0 - f.shift, -f.scale1, -f.scale2, 1))
        else:
            raw.append((f.shift, f.scale1, f.scale2, -1))
    return raw


def _log_kernel(terms: Sequence[_Term], u: np.ndarray, v: Optional[np.ndarray] = None,
                cache: Optional[Dict] = None) -> np.ndarray:
    total = np.zeros(np.broadcast(u, v).shape if v is not None else np.shape(u), dtype=complex)
    for t in terms:
        key = (t.c0, t.c1, t.c2)
        if cache is not None and key in cache:
            lg = cache[key]
        else:
            arg = t.c0 + t.c1 * u
            if v is not None and t.c2 != 0.0:
                arg = arg + t.c2 * v
            lg = complex_log_gamma(np.asarray(arg, dtype=complex))
            if cache is not None:
                cache[key] = lg
        total = total + t.power * lg
    return total


def _separation(terms: Sequence[_Term], axis: int) -> Tuple[float, float]:
    """(max left-pole start, min right-pole start) along one variable."""
    left, right = -math.inf, math.inf
    for t in terms:
        coeff = t.c1 if axis == 1 else t.c2
        other = t.c2 if axis == 1 else t.c1
        if t.power <= 0 or coeff == 0.0 or other != 0.0:
            continue
        start = -t.c0 / coeff
        if coeff > 0:
            left = max(left, start)
        else:
            right = min(right, start)
    return left, right


def _midpoint(lo: float, hi: float) -> float:
    if lo >= hi:
        raise ContourSeparationError(f"no vertical line separates the pole families ({lo} >= {hi})")
    if math.isinf(lo) and math.isinf(hi):
        return 0.0
    if math.isinf(hi):
        return lo + 0.5
    if math.isinf(lo):
        return hi - 0.5
    return 0.5 * (lo + hi)


def _arg_pole_distance(arg: float) -> float:
    if arg > 0:
        return arg
    return min(arg - math.floor(arg), math.ceil(arg) - arg)


def _pole_distance(terms: Sequence[_Term], c1_val: float, c2_val: float, axis: int) -> float:
    best = math.inf
    for t in terms:
        if t.power <= 0:
            continue
        coeff = t.c1 if axis == 1 else t.c2
        if coeff == 0.0:
            continue
        arg = t.c0 + t.c1 * c1_val + t.c2 * c2_val
        best = min(best, _arg_pole_distance(arg) / abs(coeff))
    return best


def _check_explicit(terms: Sequence[_Term], c1_val: float, c2_val: float) -> None:
    for t in terms:
        if t.power <= 0:
            continue
        arg = t.c0 + t.c1 * c1_val + t.c2 * c2_val
        if arg <= 0 and _arg_pole_distance(arg) < 1e-9:
            raise ContourSeparationError(f"contour passes through a pole (argument {arg})")


@lru_cache(maxsize=16)
def _legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return leggauss(n)


def _panel_nodes(height: float, nodes: int, fine: float, coarse: float) -> Tuple[np.ndarray, np.ndarray]:
    """Symmetric composite Gauss-Legendre nodes on [-height, height], finest at 0."""
    x, w = _legendre(nodes)
    edges = [0.0]
    width = min(fine, coarse)
    while edges[-1] < height:
        edges.append(edges[-1] + width)
        width = min(2.0 * width, coarse)
    a = np.array(edges[:-1])
    b = np.array(edges[1:])
    half = 0.5 * (b - a)
    pos = (a[:, None] + half[:, None] * (x[None, :] + 1.0)).ravel()
    wpos = (half[:, None] * w[None, :]).ravel()
    y = np.concatenate([-pos[::-1], pos])
    wt = np.concatenate([wpos[::-1], wpos])
    return y, wt


def _coarse_width(log_z: float) -> float:
    return float(np.clip(10.0 / max(abs(log_z), 1e-12), 0.25, 2.0))


_DECAY_SAMPLES = (0.0, 1.0, 2.5, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0, 1280.0)


def _decay_height(terms: Sequence[_Term], c: float, axis: int, rel_tol: float) -> float:
    """Smallest sampled height where the kernel magnitude has dropped far below its peak."""
    y = np.array(_DECAY_SAMPLES)
    s = c + 1j * y
    if axis == 1:
        mags = _log_kernel([t for t in terms if t.c2 == 0.0], s).real
    else:
        mags = _log_kernel([t for t in terms if t.c1 == 0.0], np.zeros_like(s), s).real
    threshold = math.log(rel_tol) - 12.0
    for k in range(1, len(y)):
        if mags[k] < mags[: k + 1].max() + threshold:
            return float(y[k])
    raise ConvergenceError("Mellin-Barnes kernel does not decay along the contour")


def _finish(value: complex, label: str) -> float:
    re, im = value.real, value.imag
    if not (math.isfinite(re) and math.isfinite(im)):
        raise NumericalError(f"{label} produced a non-finite value")
    scale = max(abs(re), 1e-300)
    if abs(im) > _IMAG_FAIL * scale and abs(im) > 1e-280:
        raise NumericalError(f"{label}: imaginary residue {im:.3e} is not negligible against {re:.3e}")
    if abs(im) > _IMAG_DISCARD * scale and abs(im) > 1e-280:
        logging.warning(f"[Specfun] {label}: discarding imaginary residue {im:.3e} (value {re:.3e})")
    return float(re)


# ---------------------------------------------------------------------------
# Univariate contour integrals
# ---------------------------------------------------------------------------

def _contour_offset(terms: Sequence[_Term], cfg: ContourConfig) -> float:
    if cfg.offset_mode == "explicit":
        _check_explicit(terms, cfg.offset, 0.0)
        return float(cfg.offset)
    left, right = _separation(terms, 1)
    return _midpoint(left, right)


def _univariate(spec: FoxHSpec, z: float, cfg: ContourConfig, log_scale: float, label: str) -> float:
    if not z > 0:
        raise DomainError(f"{label} requires z > 0, got {z}")
    terms = _merge(_raw_terms(spec, 1))
    c = _contour_offset(terms, cfg)
    log_z = math.log(z)
    fine = float(np.clip(2.0 * _pole_distance(terms, c, 0.0, 1), 0.02, 2.0))
    coarse = _coarse_width(log_z)
    height0 = max(cfg.half_height, _decay_height(terms, c, 1, cfg.rel_tol))

    previous = None
    reference = None
    height = height0
    for level in range(cfg.max_refinements + 1):
        y, w = _panel_nodes(height, cfg.nodes * 2 ** level, fine, coarse)
        s = c + 1j * y
        log_f = _log_kernel(terms, s) - s * log_z
        if reference is None:
            reference = float(log_f.real.max())
        f = np.exp(log_f - reference)
        total = complex(np.dot(w, f)) / (2.0 * math.pi)
        tail = float(np.abs(f[[0, -1]]).max()) / (2.0 * math.pi)
        if previous is not None:
            scale = abs(total)
            if abs(total - previous) <= cfg.rel_tol * scale and tail <= cfg.rel_tol * scale:
                logging.debug(f"[Specfun] {label} converged at level {level} (c={c:.4f}, T={height:.1f})")
                return _finish(total * math.exp(reference + log_scale), label)
        if tail > cfg.rel_tol * abs(total):
            height *= 2.0
        previous = total
    raise ConvergenceError(f"{label} did not converge after {cfg.max_refinements} refinements")


def meijer_g(spec: FoxHSpec, z: float, cfg: ContourConfig = DEFAULT_CONTOUR,
             log_scale: float = 0.0) -> float:
    """
    Meijer G-function G^{m,n}_{p,q}(z) by contour quadrature.

    Args:
        spec: kernel with unit scales
        z: positive argument
        cfg: contour settings
        log_scale: the returned value is multiplied by exp(log_scale) before
            leaving log-space, which keeps huge gamma products representable

    Raises:
        ContourSeparationError, ConvergenceError
    """
    if not spec.is_meijer:
        raise DomainError("meijer_g requires unit scales; use fox_h")
    return _univariate(spec, z, cfg, log_scale, "meijer_g")


def fox_h(spec: FoxHSpec, z: float, cfg: ContourConfig = DEFAULT_CONTOUR,
          log_scale: float = 0.0) -> float:
    """Fox H-function H^{m,n}_{p,q}(z) by contour quadrature (see meijer_g)."""
    return _univariate(spec, z, cfg, log_scale, "fox_h")


# ---------------------------------------------------------------------------
# Bivariate contour integrals
# ---------------------------------------------------------------------------

def _bivariate_offsets(k1: List[_Term], k2: List[_Term], joint: List[_Term],
                       cfg: ContourConfig) -> Tuple[float, float]:
    everything = k1 + k2 + joint
    if cfg.offset_mode == "explicit":
        if cfg.offset2 is None:
            raise DomainError("bivariate explicit contour needs offset and offset2")
        _check_explicit(everything, cfg.offset, cfg.offset2)
        return float(cfg.offset), float(cfg.offset2)

    lo1, hi1 = _separation(k1, 1)
    lo2, hi2 = _separation(k2, 2)
    numerators = [t for t in joint if t.power > 0]
    for t in numerators:
        # feasibility of c0 + c1*u + c2*v > 0 together with lo1 < u < hi1
        bound = hi1 if t.c1 > 0 else lo1
        if t.c1 == 0.0:
            if t.c2 > 0:
                lo2 = max(lo2, -t.c0 / t.c2)
            elif t.c2 < 0:
                hi2 = min(hi2, -t.c0 / t.c2)
            continue
        if math.isinf(bound) or t.c2 == 0.0:
            continue
        limit = -(t.c0 + t.c1 * bound) / t.c2
        if t.c2 < 0:
            hi2 = min(hi2, limit)
        else:
            lo2 = max(lo2, limit)
    c2 = _midpoint(lo2, hi2)
    for t in numerators:
        if t.c1 == 0.0:
            continue
        edge = -(t.c0 + t.c2 * c2) / t.c1
        if t.c1 > 0:
            lo1 = max(lo1, edge)
        else:
            hi1 = min(hi1, edge)
    c1 = _midpoint(lo1, hi1)
    return c1, c2


def fox_h_bivariate_series(joint: Sequence[JointGammaFactor], kernel1: FoxHSpec,
                           kernels2: Sequence[FoxHSpec], z1: float, z2: float,
                           cfg: ContourConfig = BIVARIATE_CONTOUR,
                           log_scale: float = 0.0) -> np.ndarray:
    """
    Evaluate several bivariate Fox-H functions that share the joint factors and
    the first kernel, on one tensor-product contour grid.

    The double integral factorizes as X^T J Y_k with X, Y_k the one-variable
    kernels along each contour and J the joint factor matrix, so only J needs
    a two-dimensional gamma evaluation.

    Returns:
        array of values, one per entry of `kernels2`
    """
    if not (z1 > 0 and z2 > 0):
        raise DomainError(f"bivariate Fox-H requires positive arguments, got {z1}, {z2}")
    t1 = _merge(_raw_terms(kernel1, 1))
    t2_list = [_merge(_raw_terms(k, 2)) for k in kernels2]
    tj = _merge(_joint_terms(joint))
    union2 = _merge([(t.c0, t.c1, t.c2, 1) for terms in t2_list for t in terms if t.power > 0])
    c1, c2 = _bivariate_offsets(t1, union2, tj, cfg)

    log_x, log_y = math.log(z1), math.log(z2)
    fine1 = float(np.clip(2.0 * min(_pole_distance(t1, c1, c2, 1), _pole_distance(tj, c1, c2, 1)), 0.02, 2.0))
    fine2 = float(np.clip(2.0 * min(_pole_distance(union2, c1, c2, 2), _pole_distance(tj, c1, c2, 2)), 0.02, 2.0))
    height1 = max(cfg.half_height, _decay_height(t1, c1, 1, cfg.rel_tol))
    height2 = max(cfg.half_height, max(_decay_height(t, c2, 2, cfg.rel_tol) for t in t2_list))

    previous = None
    for level in range(cfg.max_refinements + 1):
        nodes = cfg.nodes * 2 ** level
        y1, w1 = _panel_nodes(height1, nodes, fine1, _coarse_width(log_x))
        y2, w2 = _panel_nodes(height2, nodes, fine2, _coarse_width(log_y))
        u = c1 + 1j * y1
        v = c2 + 1j * y2

        log_x_line = _log_kernel(t1, u) - u * log_x
        px = float(log_x_line.real.max())
        xw = w1 * np.exp(log_x_line - px)

        cache: Dict = {}
        log_y_lines = np.array([_log_kernel(terms, np.zeros_like(v), v, cache) - v * log_y
                                for terms in t2_list])
        peaks = log_y_lines.real.max(axis=1)
        y_mat = w2[None, :] * np.exp(log_y_lines - peaks[:, None])

        # joint factor streamed in row blocks with a running rescale
        row_sum = np.zeros(len(v), dtype=complex)
        pj = -math.inf
        chunk = max(1, 1_000_000 // len(v))
        edge_rows = []
        edge_cols = []
        for start in range(0, len(u), chunk):
            log_j = _log_kernel(tj, u[start:start + chunk, None], v[None, :])
            block_peak = float(log_j.real.max())
            if block_peak > pj:
                row_sum *= math.exp(pj - block_peak) if math.isfinite(pj) else 0.0
                pj = block_peak
            row_sum += xw[start:start + chunk] @ np.exp(log_j - pj)
            if start == 0:
                edge_rows.append(log_j[0].real)
            if start + chunk >= len(u):
                edge_rows.append(log_j[-1].real)
            edge_cols.append(log_j[:, [0, -1]].real)

        totals = (y_mat @ row_sum) / (4.0 * math.pi ** 2)
        values = totals * np.exp(peaks + px + pj + log_scale)

        # integrand magnitude on the boundary of the grid
        lx = log_x_line.real
        ly = log_y_lines.real
        tail_rows = max(float((lx[e] + row[None, :] + ly).max()) for e, row in zip((0, -1), edge_rows))
        cols = np.concatenate(edge_cols, axis=0)
        tail_cols = max(float((lx + cols[:, k]).max() + ly[:, e].max()) for k, e in ((0, 0), (1, -1)))
        tail = math.exp(max(tail_rows, tail_cols) + log_scale) / (4.0 * math.pi ** 2)

        if previous is not None:
            scale = float(np.abs(values).sum())
            delta = float(np.abs(values - previous).sum())
            if delta <= cfg.rel_tol * scale and tail <= cfg.rel_tol * scale:
                logging.debug(f"[Specfun] bivariate Fox-H converged at level {level} "
                              f"(c=({c1:.3f}, {c2:.3f}), grid {len(u)}x{len(v)})")
                return np.array([_finish(complex(val), "fox_h_bivariate") for val in values])
        if tail > cfg.rel_tol * float(np.abs(values).sum()):
            height1 *= 2.0
            height2 *= 2.0
        previous = values
    raise ConvergenceError(f"bivariate Fox-H did not converge after {cfg.max_refinements} refinements")


def fox_h_bivariate(spec: BivariateFoxHSpec, z1: float, z2: float,
                    cfg: ContourConfig = BIVARIATE_CONTOUR, log_scale: float = 0.0) -> float:
    """Bivariate Fox-H function by nested double contour quadrature."""
    return float(fox_h_bivariate_series(spec.joint, spec.kernel1, [spec.kernel2],
                                        z1, z2, cfg, log_scale)[0])


# ---------------------------------------------------------------------------
# Degenerate parameters
# ---------------------------------------------------------------------------

def separate_parameters(first: float, second: float, mode: str = "equal",
                        tol: float = 1e-6, step: float = 1e-4) -> Tuple[float, float, Optional[str]]:
    """
    Nudge the smaller of two parameters when they are (nearly) equal, or when
    their difference is (nearly) an integer for mode="integer".

    Returns:
        (first, second, note) where note is None when nothing changed
    """
    gap = first - second
    if mode == "integer":
        degenerate = abs(gap - round(gap)) < tol
    else:
        degenerate = abs(gap) < tol
    if not degenerate:
        return first, second, None
    if first <= second:
        first += step
    else:
        second += step
    note = f"perturbed {mode}-degenerate pair by {step:g}"
    logging.warning(f"[Specfun] {note} ({first:.6g}, {second:.6g})")
    return first, second, note
