"""
Turbulence and propagation physics for the optical hops.

Covers the Hufnagel-Valley Cn2 profile, uplink and two-segment downlink
Rytov variances, the large/small-scale log variances, Gamma-Gamma shape
parameters, Beer-Lambert attenuation and the Gaussian-beam radius helpers
used by the reflector geometry.

All public functions take SI units (meters, radians). Beer-Lambert converts to
the km / nm units of the empirical visibility law internally.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from utils.errors import DomainError, NoSolutionError, NumericalError

UPLINK = "uplink"
DOWNLINK = "downlink"


@dataclass(frozen=True)
class TurbulenceProfile:
    """
    Hufnagel-Valley Cn2 profile parameters.

    Setting cn2_ground, wind_rms and background to zero gives a turbulence-free
    atmosphere (every Rytov integral vanishes).
    """

    cn2_ground: float = 1.7e-13
    wind_rms: float = 30.0
    background: float = 2.7e-16
    ground_scale: float = 100.0

    def __post_init__(self) -> None:
        if self.cn2_ground < 0:
            raise DomainError(f"cn2_ground must be >= 0, got {self.cn2_ground}")
        if self.wind_rms < 0:
            raise DomainError(f"wind_rms must be >= 0, got {self.wind_rms}")
        if self.background < 0:
            raise DomainError(f"background must be >= 0, got {self.background}")
        if not self.ground_scale > 0:
            raise DomainError(f"ground_scale must be > 0, got {self.ground_scale}")

    @classmethod
    def turbulence_free(cls) -> "TurbulenceProfile":
        return cls(cn2_ground=0.0, wind_rms=0.0, background=0.0)


@dataclass(frozen=True)
class BeamState:
    """Gaussian beam at the transmitter plus its propagation distance.

    curvature0 of None means a collimated beam (F0 = infinity, Theta0 = 1).
    """

    waist0: float
    wavelength: float
    distance: float
    curvature0: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.waist0 > 0:
            raise DomainError(f"waist0 must be > 0, got {self.waist0}")
        if not self.wavelength > 0:
            raise DomainError(f"wavelength must be > 0, got {self.wavelength}")
        if not self.distance > 0:
            raise DomainError(f"distance must be > 0, got {self.distance}")
        if self.curvature0 is not None and self.curvature0 == 0:
            raise DomainError("curvature0 must be non-zero (use None for a collimated beam)")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def fresnel0(self) -> float:
        """Lambda0 = 2 d / (k w0^2)."""
        return 2.0 * self.distance / (self.wavenumber * self.waist0 ** 2)

    @property
    def curvature_param0(self) -> float:
        """Theta0 = 1 - d / F0."""
        if self.curvature0 is None:
            return 1.0
        return 1.0 - self.distance / self.curvature0

    @property
    def fresnel(self) -> float:
        lam0, th0 = self.fresnel0, self.curvature_param0
        return lam0 / (lam0 ** 2 + th0 ** 2)

    @property
    def curvature_param(self) -> float:
        lam0, th0 = self.fresnel0, self.curvature_param0
        return th0 / (th0 ** 2 + lam0 ** 2)

    @property
    def curvature_param_bar(self) -> float:
        return 1.0 - self.curvature_param


@dataclass(frozen=True)
class RytovResult:
    sigma_b2: float
    link_kind: str
    segments: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.sigma_b2 < 0:
            raise NumericalError(f"Rytov variance came out negative: {self.sigma_b2}")
        if self.link_kind not in (UPLINK, DOWNLINK):
            raise DomainError(f"unknown link kind {self.link_kind!r}")


@dataclass(frozen=True)
class GGParams:
    """Gamma-Gamma shape parameters (alpha: large scale, beta: small scale)."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        for name, value in (("alpha", self.alpha), ("beta", self.beta)):
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"Gamma-Gamma {name} must be positive and finite, got {value}")


def cn2(altitude: float, profile: TurbulenceProfile) -> float:
    """Hufnagel-Valley refractive-index structure constant at an altitude in meters."""
    if altitude < 0:
        raise DomainError(f"altitude must be >= 0, got {altitude}")
    l = float(altitude)
    tropopause = 0.00594 * (profile.wind_rms / 27.0) ** 2 * (1e-5 * l) ** 10 * math.exp(-l / 1000.0)
    background = profile.background * math.exp(-l / 1500.0)
    ground = profile.cn2_ground * math.exp(-l / profile.ground_scale)
    return tropopause + background + ground


def _breakpoints(low: float, high: float, profile: TurbulenceProfile) -> list:
    marks = (profile.ground_scale, 5.0 * profile.ground_scale, 1500.0, 5000.0, 10_000.0)
    return sorted({m for m in marks if low < m < high})


def _check_zenith(zenith: float, label: str) -> None:
    if not 0.0 <= zenith < 0.5 * math.pi:
        raise DomainError(f"{label} must lie in [0, pi/2), got {zenith}")


def rytov_uplink(h_o: float, h_h: float, zenith: float, beam: BeamState,
                 profile: TurbulenceProfile, rel_tol: float = 1e-8) -> RytovResult:
    """
    Beam-wave Rytov variance of the ground-to-HAP uplink.

    The complex integrand is integrated component-wise and the real part is
    taken from the completed integral.
    """
    _check_zenith(zenith, "uplink zenith")
    if not h_h > h_o >= 0:
        raise DomainError(f"uplink needs h_h > h_o >= 0, got h_o={h_o}, h_h={h_h}")

    lam = beam.fresnel
    theta_bar = beam.curvature_param_bar
    span = h_o - h_h

    def bracket(l: float) -> complex:
        xi = (l - h_h) / span
        return (lam * xi * xi + 1j * xi * (1.0 - theta_bar * xi)) ** (5.0 / 6.0) - lam ** (5.0 / 6.0) * xi ** (5.0 / 3.0)

    points = _breakpoints(h_o, h_h, profile)
    real, _ = quad(lambda l: cn2(l, profile) * bracket(l).real, h_o, h_h,
                   epsabs=0.0, epsrel=rel_tol, limit=400, points=points or None)
    imag, _ = quad(lambda l: cn2(l, profile) * bracket(l).imag, h_o, h_h,
                   epsabs=0.0, epsrel=rel_tol, limit=400, points=points or None)
    k = beam.wavenumber
    prefactor = 8.7 * k ** (7.0 / 6.0) * (h_h - h_o) ** (5.0 / 6.0) / math.cos(zenith) ** (11.0 / 6.0)
    value = prefactor * complex(real, imag).real
    # quadrature noise around a zero integrand
    if -1e-15 < value < 0:
        value = 0.0
    logging.debug(f"[Atmosphere] uplink Rytov variance {value:.6e} (zenith={math.degrees(zenith):.2f} deg)")
    return RytovResult(sigma_b2=value, link_kind=UPLINK, segments=(value,))


def _downlink_segment(h_top: float, h_low: float, zenith: float, wavelength: float,
                      profile: TurbulenceProfile, rel_tol: float) -> float:
    if h_top == h_low:
        return 0.0
    span = h_top - h_low
    points = _breakpoints(h_low, h_top, profile)
    integral, _ = quad(lambda l: cn2(l, profile) * ((l - h_low) / span) ** (5.0 / 6.0), h_low, h_top,
                       epsabs=0.0, epsrel=rel_tol, limit=400, points=points or None)
    k = 2.0 * math.pi / wavelength
    return 2.25 * k ** (7.0 / 6.0) * span ** (5.0 / 6.0) / math.cos(zenith) ** (11.0 / 6.0) * integral


def rytov_downlink_two_segment(h_h: float, h_i: float, h_u: float, zenith2: float, zenith3: float,
                               wavelength: float, profile: TurbulenceProfile,
                               rel_tol: float = 1e-8) -> RytovResult:
    """Downlink Rytov variance HAP -> reflector -> user as a sum of two slant segments."""
    _check_zenith(zenith2, "HAP-reflector zenith")
    _check_zenith(zenith3, "reflector-user zenith")
    if not (h_h > h_i >= h_u >= 0):
        raise DomainError(f"downlink needs h_h > h_i >= h_u >= 0, got {h_h}, {h_i}, {h_u}")
    if not wavelength > 0:
        raise DomainError(f"wavelength must be > 0, got {wavelength}")
    first = _downlink_segment(h_h, h_i, zenith2, wavelength, profile, rel_tol)
    second = _downlink_segment(h_i, h_u, zenith3, wavelength, profile, rel_tol)
    logging.debug(f"[Atmosphere] downlink Rytov segments {first:.6e} + {second:.6e}")
    return RytovResult(sigma_b2=first + second, link_kind=DOWNLINK, segments=(first, second))


def log_variances(rytov: RytovResult, theta: float = 0.0) -> Tuple[float, float]:
    """
    Large- and small-scale log-irradiance variances.

    Args:
        rytov: Rytov variance with its link kind
        theta: receiver beam curvature parameter, used by the uplink form only
    """
    s2 = rytov.sigma_b2
    s125 = s2 ** 1.2
    if rytov.link_kind == UPLINK:
        large = 0.49 * s2 / (1.0 + 0.56 * (1.0 + theta) * s125) ** (7.0 / 6.0)
    else:
        large = 0.49 * s2 / (1.0 + 1.11 * s125) ** (7.0 / 6.0)
    small = 0.51 * s2 / (1.0 + 0.69 * s125) ** (5.0 / 6.0)
    return large, small


def gg_params(sigma_lnx2: float, sigma_lny2: float) -> GGParams:
    if sigma_lnx2 < 1e-12 or sigma_lny2 < 1e-12:
        raise DomainError(
            f"log variances ({sigma_lnx2:.3e}, {sigma_lny2:.3e}) too small: Gamma-Gamma parameters would be infinite"
        )
    return GGParams(alpha=1.0 / math.expm1(sigma_lnx2), beta=1.0 / math.expm1(sigma_lny2))


def kim_qv(visibility: float) -> float:
    """Wavelength exponent of the visibility law from the Kim table (visibility in meters)."""
    v_km = visibility / 1000.0
    if v_km > 50:
        return 1.6
    if v_km > 6:
        return 1.3
    if v_km > 1:
        return 0.16 * v_km + 0.34
    if v_km > 0.5:
        return v_km - 0.5
    return 0.0


def beer_lambert(visibility: float, wavelength: float, distance: float, q_v: float = 1.3) -> float:
    """
    Atmospheric power loss exp(-C_h d).

    Args:
        visibility: meters
        wavelength: meters
        distance: meters
        q_v: wavelength exponent of the visibility law
    """
    if not visibility > 0:
        raise DomainError(f"visibility must be > 0, got {visibility}")
    if not wavelength > 0:
        raise DomainError(f"wavelength must be > 0, got {wavelength}")
    if distance < 0:
        raise DomainError(f"distance must be >= 0, got {distance}")
    v_km = visibility / 1000.0
    lambda_nm = wavelength * 1e9
    c_h = (3.912 / v_km) * (lambda_nm / 550.0) ** (-q_v)
    return math.exp(-c_h * distance / 1000.0)


def beam_radius(distance: float, waist0: float, wavelength: float) -> float:
    """Gaussian beam radius w(d) = w0 sqrt(1 + (d lambda / (pi w0^2))^2)."""
    if not waist0 > 0:
        raise DomainError(f"waist0 must be > 0, got {waist0}")
    ratio = distance * wavelength / (math.pi * waist0 ** 2)
    return waist0 * math.sqrt(1.0 + ratio * ratio)


def minimum_radius(distance: float, wavelength: float) -> Tuple[float, float]:
    """(smallest radius reachable at `distance`, the waist that reaches it)."""
    waist_star = math.sqrt(distance * wavelength / math.pi)
    return math.sqrt(2.0) * waist_star, waist_star


def waist_for_radius(radius: float, distance: float, wavelength: float, branch: str = "near") -> float:
    """
    Back-solve the initial waist that produces `radius` at `distance`.

    The near branch is the large-waist (weakly diverging) root.

    Raises:
        NoSolutionError: radius below the minimum reachable at this distance
    """
    if branch not in ("near", "far"):
        raise DomainError(f"branch must be near or far, got {branch!r}")
    if not radius > 0:
        raise DomainError(f"radius must be > 0, got {radius}")
    r_min, _ = minimum_radius(distance, wavelength)
    if radius < r_min:
        raise NoSolutionError(
            f"beam radius {radius:.4e} m is unreachable at {distance:.1f} m (minimum {r_min:.4e} m)"
        )
    r2 = radius * radius
    c = distance * wavelength / math.pi
    disc = math.sqrt(max(r2 * r2 - 4.0 * c * c, 0.0))
    x = 0.5 * (r2 + disc) if branch == "near" else 0.5 * (r2 - disc)
    return math.sqrt(x)


def solve_reflected_waist(theta_i: float, theta_r: float, d_hi: float, waist0: float,
                          wavelength: float, rel_tol: float = 1e-10) -> float:
    """
    Waist of the virtual beam leaving the reflector: w(d_hi, w_hat) must equal
    cos(theta_r) / cos(theta_i) * w(d_hi, waist0). Solved by bracketing on the
    branch of w(d, .) that contains waist0.
    """
    _check_zenith(theta_i, "incidence angle")
    _check_zenith(theta_r, "reflection angle")
    target = math.cos(theta_r) * beam_radius(d_hi, waist0, wavelength) / math.cos(theta_i)
    r_min, waist_star = minimum_radius(d_hi, wavelength)
    if target < r_min:
        raise NoSolutionError(
            f"reflected radius {target:.4e} m is below the minimum {r_min:.4e} m reachable at {d_hi:.1f} m"
        )

    def residual(w0: float) -> float:
        return beam_radius(d_hi, w0, wavelength) - target

    if waist0 >= waist_star:
        lo, hi = waist_star, max(target, waist_star)
    else:
        lo, hi = d_hi * wavelength / (math.pi * target), waist_star
    if residual(lo) * residual(hi) > 0:
        # target sits exactly at the branch minimum
        solution = waist_star
    else:
        solution = brentq(residual, lo, hi, xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=500)
    error = abs(residual(solution)) / target
    if error > rel_tol:
        raise NumericalError(f"reflected waist residual {error:.3e} exceeds {rel_tol:.1e}")
    logging.debug(f"[Atmosphere] reflected waist {solution:.6e} m for target radius {target:.6e} m")
    return solution
