"""
System configuration, node geometry and the two derived parameter bundles.

Every statistic in the link modules reads a frozen LinkOneParams (ground station
to HAP) or LinkTwoParams (HAP to user through the reflector). Physics is
evaluated once, in `assemble`, and never recomputed downstream.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from models.atmosphere import (
    BeamState,
    GGParams,
    TurbulenceProfile,
    beam_radius,
    beer_lambert,
    gg_params,
    log_variances,
    rytov_downlink_two_segment,
    rytov_uplink,
    solve_reflected_waist,
    waist_for_radius,
)
from utils.errors import ConfigError, DomainError, GeometryError, SeriesDivergenceError
from utils.specfun import erf

HETERODYNE = 1
IMDD = 2
BEAM_MODELS = ("footprint", "propagate")
MAX_SERIES_TERMS = 64


@dataclass(frozen=True)
class SystemConfig:
    """
    Reference scenario. Lengths in meters, angles in radians, gamma_th in dB.

    f0 of None is a collimated transmit beam. c0 of None selects the detection
    default (1 for heterodyne, e/(2 pi) for IM/DD).
    """

    h_o: float = 10.0
    h_h: float = 18_000.0
    h_i: float = 80.0
    h_u: float = 1.0
    y_h: float = 0.0
    y_i: float = -1000.0
    y_u: float = -1020.0
    theta_i: float = math.pi / 6
    theta_r: float = 3 * math.pi / 8
    phi_r: float = math.pi
    theta_rl: float = 0.0
    r_a: float = 5e-3
    a_l: float = 2.5e-3
    omega_b: float = 15e-3
    sigma_s0: float = 5e-3
    omega_01: float = 1e-3
    wavelength: float = 1550e-9
    visibility: float = 10_000.0
    wind_rms: float = 30.0
    cn2_ground: float = 1.7e-13
    cn2_ground_scale: float = 100.0
    f0: Optional[float] = None
    zeta_1: float = math.pi / 3
    zeta_p: float = 1.0
    kappa: float = 0.43e-3
    sigma_s: float = 1.25e-3
    sigma_r: float = 1.25e-3
    sigma_l: float = 1.25e-3
    n_k: int = 5
    gamma_th_db: float = 2.0
    r1: int = HETERODYNE
    r2: int = HETERODYNE
    relay_gain: float = 1.0
    c0: Optional[float] = None
    q_v: float = 1.3
    irs_beam_radius: float = 0.01
    beam_model: str = "footprint"

    def validate(self) -> "SystemConfig":
        """Check every invariant; returns self so calls can be chained."""
        if not self.h_h > self.h_i > self.h_u >= 0:
            raise ConfigError(f"heights must satisfy h_h > h_i > h_u >= 0, got {self.h_h}, {self.h_i}, {self.h_u}")
        if not self.h_h > self.h_o >= 0:
            raise ConfigError(f"heights must satisfy h_h > h_o >= 0, got h_o={self.h_o}")
        positive = ("r_a", "a_l", "omega_b", "sigma_s0", "omega_01", "wavelength", "visibility",
                    "relay_gain", "irs_beam_radius")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("sigma_s", "sigma_r", "sigma_l", "kappa", "wind_rms", "cn2_ground"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not self.cn2_ground_scale > 0:
            raise ConfigError(f"cn2_ground_scale must be > 0, got {self.cn2_ground_scale}")
        if not self.q_v > 0:
            raise ConfigError(f"q_v must be > 0, got {self.q_v}")
        if not 0 < self.zeta_p <= 1:
            raise ConfigError(f"zeta_p must lie in (0, 1], got {self.zeta_p}")
        if abs(self.phi_r - math.pi) > 1e-12 or abs(self.theta_rl) > 1e-12:
            raise ConfigError("only phi_r = pi and theta_rl = 0 are supported")
        for name in ("theta_i", "theta_r"):
            if not 0 <= getattr(self, name) < math.pi / 2:
                raise ConfigError(f"{name} must lie in [0, 90) degrees")
        if not 0 <= self.n_k <= MAX_SERIES_TERMS:
            raise ConfigError(f"n_k must lie in [0, {MAX_SERIES_TERMS}], got {self.n_k}")
        for name in ("r1", "r2"):
            if getattr(self, name) not in (HETERODYNE, IMDD):
                raise ConfigError(f"{name} must be 1 (heterodyne) or 2 (IM/DD), got {getattr(self, name)}")
        if self.c0 is not None and not self.c0 > 0:
            raise ConfigError(f"c0 must be > 0, got {self.c0}")
        if self.f0 is not None and self.f0 == 0:
            raise ConfigError("f0 must be non-zero (inf for a collimated beam)")
        if self.beam_model not in BEAM_MODELS:
            raise ConfigError(f"beam_model must be one of {BEAM_MODELS}, got {self.beam_model!r}")
        if self.sigma_s + self.sigma_l <= 0:
            raise ConfigError("sigma_s and sigma_l cannot both be zero")
        return self

    def replace(self, **changes: Any) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def with_jitter(self, source: float, reflector: float, lens: float) -> "SystemConfig":
        """Jitter standard deviations given as multiples of 0.5 a_l."""
        half = 0.5 * self.a_l
        return self.replace(sigma_s=source * half, sigma_r=reflector * half, sigma_l=lens * half)

    @property
    def gamma_th(self) -> float:
        return 10.0 ** (self.gamma_th_db / 10.0)

    def capacity_constant(self, r: Optional[int] = None) -> float:
        if self.c0 is not None:
            return self.c0
        detection = self.r2 if r is None else r
        return 1.0 if detection == HETERODYNE else math.e / (2.0 * math.pi)

    def turbulence(self) -> TurbulenceProfile:
        return TurbulenceProfile(cn2_ground=self.cn2_ground, wind_rms=self.wind_rms,
                                 ground_scale=self.cn2_ground_scale)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SystemConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class Geometry:
    x_h: float
    d_oh: float
    d_hi: float
    d_iu: float
    zenith1: float
    zenith2: float
    zenith3: float


@dataclass(frozen=True)
class GmlParams:
    sigma_u1_sq: float
    sigma_u2_sq: float
    q_g: float
    omega: float
    t_g: float
    nu1: float
    nu2: float
    a02: float
    varpi: float
    radius1: float
    radius2: float


def _series_exponent(q_g: float, varpi: float) -> float:
    return (1.0 + q_g ** 2) * varpi / (2.0 * q_g)


@dataclass(frozen=True)
class LinkOneParams:
    eta_s2: float
    a01: float
    h_p1: float
    gg: GGParams
    r1: int
    d_oh: float
    sigma_b2: float = 0.0
    v_e: float = 0.0

    def __post_init__(self) -> None:
        if not (self.eta_s2 > 0 and 0 < self.a01 <= 1 and 0 < self.h_p1 <= 1):
            raise DomainError(f"invalid hop-1 bundle: eta_s2={self.eta_s2}, A01={self.a01}, h_p1={self.h_p1}")
        if self.r1 not in (HETERODYNE, IMDD):
            raise DomainError(f"r1 must be 1 or 2, got {self.r1}")

    @property
    def scale(self) -> float:
        """alpha beta / (A01 h_p1), the Meijer-G argument scale."""
        return self.gg.alpha * self.gg.beta / (self.a01 * self.h_p1)

    def with_detection(self, r1: int) -> "LinkOneParams":
        return dataclasses.replace(self, r1=r1)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LinkOneParams":
        values = dict(data)
        values["gg"] = GGParams(**values["gg"])
        return cls(**values)


@dataclass(frozen=True)
class LinkTwoParams:
    varpi: float
    q_g: float
    a02: float
    t_g: float
    omega: float
    sigma_u1_sq: float
    sigma_u2_sq: float
    h_p2: float
    gg: GGParams
    r2: int
    n_k: int
    norm_n: float
    d_hi: float
    d_iu: float
    nu1: float = 0.0
    nu2: float = 0.0
    sigma_b2: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.q_g <= 1:
            raise DomainError(f"q_g must lie in (0, 1], got {self.q_g}")
        if not (self.varpi > 0 and 0 < self.a02 <= 1 and 0 < self.h_p2 <= 1 and self.norm_n > 0):
            raise DomainError(f"invalid hop-2 bundle: varpi={self.varpi}, A02={self.a02}, h_p2={self.h_p2}")
        if self.r2 not in (HETERODYNE, IMDD):
            raise DomainError(f"r2 must be 1 or 2, got {self.r2}")
        if not 0 <= self.n_k <= MAX_SERIES_TERMS:
            raise DomainError(f"n_k must lie in [0, {MAX_SERIES_TERMS}], got {self.n_k}")

    @property
    def exponent(self) -> float:
        """(1 + q^2) varpi / (2 q), the power-law exponent of the GML density."""
        return _series_exponent(self.q_g, self.varpi)

    @property
    def log_coefficient(self) -> float:
        """(1 - q^2) varpi / (4 q), the coefficient of the log-series."""
        return (1.0 - self.q_g ** 2) * self.varpi / (4.0 * self.q_g)

    @property
    def scale(self) -> float:
        return self.gg.alpha * self.gg.beta / (self.a02 * self.h_p2)

    def with_detection(self, r2: int) -> "LinkTwoParams":
        return dataclasses.replace(self, r2=r2)

    def with_n_k(self, n_k: int) -> "LinkTwoParams":
        return dataclasses.replace(self, n_k=n_k, norm_n=normalization_constant(self.q_g, self.varpi, n_k))

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LinkTwoParams":
        values = dict(data)
        values["gg"] = GGParams(**values["gg"])
        return cls(**values)


def distances(cfg: SystemConfig) -> Geometry:
    """
    Node placement: OGS at the origin, HAP at (X_H, Y_H, H_H) with
    X_H = (H_H - H_O) tan(zeta_1), reflector and user sharing the HAP's x.
    """
    if not 0 <= cfg.zeta_1 < math.pi / 2:
        raise GeometryError(f"OGS zenith angle must lie in [0, 90) degrees, got {math.degrees(cfg.zeta_1):.3f}")
    rise = cfg.h_h - cfg.h_o
    x_h = rise * math.tan(cfg.zeta_1)
    d_oh = rise / math.cos(cfg.zeta_1)

    drop2 = cfg.h_h - cfg.h_i
    lateral2 = abs(cfg.y_i - cfg.y_h)
    d_hi = math.hypot(lateral2, drop2)
    zenith2 = math.atan2(lateral2, drop2)

    drop3 = cfg.h_i - cfg.h_u
    lateral3 = abs(cfg.y_u - cfg.y_i)
    d_iu = math.hypot(lateral3, drop3)
    zenith3 = math.atan2(lateral3, drop3)

    for label, angle in (("HAP-reflector", zenith2), ("reflector-user", zenith3)):
        if angle >= math.pi / 2:
            raise GeometryError(f"{label} zenith angle reaches the horizon")
    logging.debug(f"[Scenario] d_OH={d_oh:.2f} m, d_HI={d_hi:.2f} m, d_IU={d_iu:.2f} m")
    return Geometry(x_h=x_h, d_oh=d_oh, d_hi=d_hi, d_iu=d_iu,
                    zenith1=cfg.zeta_1, zenith2=zenith2, zenith3=zenith3)


def pointing_params(cfg: SystemConfig) -> Tuple[float, float, float]:
    """(eta_s^2, A01, v_e) of the ground-station pointing error model."""
    v_e = cfg.r_a * math.sqrt(math.pi / 2.0) / cfg.omega_b
    a01 = erf(v_e) ** 2
    # equivalent beam width: w_b^2 sqrt(pi) A01 / (2 v_e exp(-v_e^2))
    w_eq = cfg.omega_b * math.sqrt(math.sqrt(math.pi) * a01 / (2.0 * v_e * math.exp(-v_e ** 2)))
    eta_s = w_eq / (2.0 * cfg.sigma_s0)
    return eta_s ** 2, a01, v_e


def _footprint_radii(cfg: SystemConfig, geometry: Geometry) -> Tuple[float, float]:
    if cfg.beam_model == "footprint":
        radius2 = cfg.irs_beam_radius
        radius1 = math.cos(cfg.theta_r) * radius2 / math.cos(cfg.theta_i)
        return radius1, radius2
    waist02 = waist_for_radius(cfg.irs_beam_radius, geometry.d_hi, cfg.wavelength)
    waist_hat = solve_reflected_waist(cfg.theta_i, cfg.theta_r, geometry.d_hi, waist02, cfg.wavelength)
    total = geometry.d_hi + geometry.d_iu
    return beam_radius(total, waist_hat, cfg.wavelength), beam_radius(total, waist02, cfg.wavelength)


def gml_params(cfg: SystemConfig, geometry: Geometry) -> GmlParams:
    """Geometric and misalignment loss parameters of the reflector hop."""
    ci, cr = math.cos(cfg.theta_i), math.cos(cfg.theta_r)
    s_across = math.sin(cfg.theta_i + cfg.theta_r)
    sigma_u1_sq = ((cr / ci) ** 2 * cfg.sigma_s ** 2
                   + (s_across / ci) ** 2 * cfg.sigma_r ** 2
                   + cfg.sigma_l ** 2)
    sigma_u2_sq = cfg.sigma_s ** 2 + cfg.sigma_l ** 2
    q_g = math.sqrt(min(sigma_u1_sq, sigma_u2_sq) / max(sigma_u1_sq, sigma_u2_sq))
    omega = sigma_u1_sq + sigma_u2_sq

    radius1, radius2 = _footprint_radii(cfg, geometry)
    nu1 = cfg.a_l * math.sqrt(math.pi / 2.0) / radius1
    nu2 = cfg.a_l * math.sqrt(math.pi / 2.0) / radius2
    erf1, erf2 = erf(nu1), erf(nu2)
    t_g = (math.pi * cfg.a_l ** 2 / (4.0 * nu1 * nu2)) * math.sqrt(
        math.pi * erf1 * erf2 / (nu1 * nu2 * math.exp(-(nu1 ** 2 + nu2 ** 2)))
    )
    varpi = (1.0 + q_g ** 2) * t_g / (4.0 * q_g * omega)
    return GmlParams(sigma_u1_sq=sigma_u1_sq, sigma_u2_sq=sigma_u2_sq, q_g=q_g, omega=omega,
                     t_g=t_g, nu1=nu1, nu2=nu2, a02=erf1 * erf2, varpi=varpi,
                     radius1=radius1, radius2=radius2)


def normalization_constant(q_g: float, varpi: float, n_k: int) -> float:
    """
    Reciprocal of the truncated series mass of the approximate GML density.

    The k-th summand is 2q/(1+q^2) * C(2k, k) * rho^(2k) with
    rho = (1 - q^2) / (2 (1 + q^2)); the full series sums to exactly 1.
    """
    if not 0 < q_g <= 1:
        raise DomainError(f"q_g must lie in (0, 1], got {q_g}")
    if not varpi > 0:
        raise DomainError(f"varpi must be > 0, got {varpi}")
    if n_k < 0:
        raise DomainError(f"n_k must be >= 0, got {n_k}")
    rho = (1.0 - q_g ** 2) / (2.0 * (1.0 + q_g ** 2))
    ratio_limit = 4.0 * rho * rho
    if ratio_limit >= 1.0:
        raise SeriesDivergenceError(f"normalization series does not shrink (term ratio -> {ratio_limit})")
    lead = 2.0 * q_g / (1.0 + q_g ** 2)
    total = 0.0
    for k in range(n_k + 1):
        total += lead * math.comb(2 * k, k) * rho ** (2 * k)
    return 1.0 / total


def assemble(cfg: SystemConfig) -> Tuple[LinkOneParams, LinkTwoParams]:
    """Evaluate all physics for a configuration and freeze it into the two hop bundles."""
    cfg.validate()
    geometry = distances(cfg)
    profile = cfg.turbulence()

    beam = BeamState(waist0=cfg.omega_01, wavelength=cfg.wavelength, distance=geometry.d_oh, curvature0=cfg.f0)
    uplink = rytov_uplink(cfg.h_o, cfg.h_h, cfg.zeta_1, beam, profile)
    gg1 = gg_params(*log_variances(uplink, theta=beam.curvature_param))
    eta_s2, a01, v_e = pointing_params(cfg)
    h_p1 = beer_lambert(cfg.visibility, cfg.wavelength, geometry.d_oh, cfg.q_v)
    link_one = LinkOneParams(eta_s2=eta_s2, a01=a01, h_p1=h_p1, gg=gg1, r1=cfg.r1,
                             d_oh=geometry.d_oh, sigma_b2=uplink.sigma_b2, v_e=v_e)

    downlink = rytov_downlink_two_segment(cfg.h_h, cfg.h_i, cfg.h_u, geometry.zenith2, geometry.zenith3,
                                          cfg.wavelength, profile)
    gg2 = gg_params(*log_variances(downlink))
    gml = gml_params(cfg, geometry)
    h_p2 = cfg.zeta_p * 10.0 ** (-cfg.kappa * (geometry.d_hi + geometry.d_iu) / 10.0)
    link_two = LinkTwoParams(
        varpi=gml.varpi, q_g=gml.q_g, a02=gml.a02, t_g=gml.t_g, omega=gml.omega,
        sigma_u1_sq=gml.sigma_u1_sq, sigma_u2_sq=gml.sigma_u2_sq, h_p2=h_p2, gg=gg2,
        r2=cfg.r2, n_k=cfg.n_k, norm_n=normalization_constant(gml.q_g, gml.varpi, cfg.n_k),
        d_hi=geometry.d_hi, d_iu=geometry.d_iu, nu1=gml.nu1, nu2=gml.nu2,
        sigma_b2=downlink.sigma_b2,
    )
    logging.info(
        f"[Scenario] assembled: alpha1={gg1.alpha:.4g}, beta1={gg1.beta:.4g}, eta_s2={eta_s2:.4g}, "
        f"alpha2={gg2.alpha:.4g}, beta2={gg2.beta:.4g}, q_g={gml.q_g:.4g}, varpi={gml.varpi:.4g}"
    )
    return link_one, link_two
