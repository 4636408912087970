"""
Curve sweeps and the named figure-data recipes.

A recipe turns a base SystemConfig into a dict of tables (name -> CurvePoint
rows). Every analytic value with a Monte Carlo twin is compared against the
twin's interval and flagged DISAGREE in the row metadata when it falls outside.
Rows at a published reference point carry the reference, its tolerance band
and an ok/MISS verdict under meta["acceptance"].
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from models import e2e, link_hap_user, link_ogs_hap
from models.e2e import RelayConfig
from models.link_hap_user import ModulationScheme
from models.montecarlo import ChannelSimulator, Estimate, verify_hg2_identities
from models.scenario import HETERODYNE, IMDD, LinkOneParams, LinkTwoParams, SystemConfig, assemble
from utils.errors import ConfigError, FsoLinkError, UnknownFigureError
from utils.export_utils import ACCEPTED, DISAGREE, MISS, CurvePoint

METRICS = ("op", "ber", "capacity", "moment")
SCOPES = ("hop1", "hop2", "e2e")

# (label, multiples of 0.5 a_l for source, reflector, lens)
GML_CASES = (("base", (1, 1, 1)), ("source", (2, 1, 1)), ("lens", (1, 1, 3)), ("reflector", (1, 2, 1)))
HOP2_CASES = (("source", (2, 1, 1)), ("reflector", (1, 2, 1)), ("lens", (1, 1, 2)), ("combined", (2, 2, 2)))
JITTER_CASES = (("base", (1, 1, 1)), ("uniform", (2, 2, 2)), ("source", (3, 2, 2)), ("lens", (2, 2, 3)))
ZENITH_DEG = (50.0, 55.0, 60.0)
CONVERGENCE_THETA = (("15deg", math.pi / 12), ("30deg", math.pi / 6), ("45deg", math.pi / 4), ("60deg", math.pi / 3))

HOP2_OP_REFERENCE = {"source": 9.0e-5, "reflector": 2.0e-3, "lens": 4.2e-3, "combined": 5.4e-3}
HOP2_CAPACITY_REFERENCE = {"source": 1.69, "reflector": 1.55, "lens": 1.54, "combined": 1.46}
E2E_ZENITH_REFERENCE = {50.0: 2.7e-3, 55.0: 8.3e-3, 60.0: 4.1e-2}
E2E_JITTER_REFERENCE = {"base": 3.3e-3, "uniform": 5.6e-3, "source": 1.3e-2, "lens": 2.1e-2}
AF_DF_REFERENCE = {"af": 0.31, "df": 0.26}


@dataclass(frozen=True)
class Tolerance:
    """Acceptance band around a reference value: a multiplicative factor or an absolute width."""
    factor: Optional[float] = None
    absolute: Optional[float] = None

    def accepts(self, value: Optional[float], reference: float) -> bool:
        if value is None or not math.isfinite(value):
            return False
        if self.factor is not None:
            return value > 0 and reference / self.factor <= value <= reference * self.factor
        return abs(value - reference) <= self.absolute

    @property
    def label(self) -> str:
        return f"x/{self.factor:g}" if self.factor is not None else f"+-{self.absolute:g}"


OP_TOLERANCE = Tolerance(factor=1.5)
CAPACITY_TOLERANCE = Tolerance(absolute=0.05)
AF_DF_TOLERANCE = Tolerance(absolute=0.03)

# figure numbers -> the recipes holding their data
FIGURE_ALIASES = {
    "fig4": ("gml-approx", "gml-convergence"),
    "fig5": ("hop2-outage",),
    "fig6": ("hop2-ber",),
    "fig7": ("e2e-outage-zenith",),
    "fig8": ("hop2-capacity",),
    "fig9": ("af-vs-df",),
}


@dataclass(frozen=True)
class RunOptions:
    samples: int = 0
    seed: int = 0
    workers: Optional[int] = None
    progress: bool = False
    grid: Tuple[float, float, float] = (0.0, 60.0, 5.0)
    asymptotic: bool = True

    @classmethod
    def from_dict(cls, data: Dict) -> "RunOptions":
        """Build from pipeline-state options; keys that are not options (out, format) are ignored."""
        known = {f.name for f in dataclasses.fields(cls)}
        values = {k: v for k, v in data.items() if k in known and v is not None}
        if "grid" in values:
            values["grid"] = tuple(float(x) for x in values["grid"])
        return cls(**values)

    def to_dict(self) -> Dict:
        return dataclasses.asdict(self)


def snr_grid(start: float, stop: float, step: float) -> List[float]:
    """Inclusive dB grid; 0..60 in steps of 5 gives 13 points."""
    if not step > 0 or stop < start:
        raise ConfigError(f"invalid grid {start}:{stop}:{step}")
    count = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(count)]


def _attach(point: CurvePoint, estimate: Estimate) -> CurvePoint:
    point.mc_mean = estimate.mean
    point.mc_ci_low = estimate.ci_low
    point.mc_ci_high = estimate.ci_high
    point.meta["mc_n"] = str(estimate.n)
    if not estimate.contains(point.analytic):
        point.meta["flag"] = DISAGREE
        logging.warning(f"[Recipes] x={point.x_db}: analytic {point.analytic:.4e} outside MC interval "
                        f"[{estimate.ci_low:.4e}, {estimate.ci_high:.4e}]")
    return point


def _bundles(cfg: SystemConfig, detection: Optional[int] = None) -> Tuple[LinkOneParams, LinkTwoParams]:
    if detection is not None:
        cfg = cfg.replace(r1=detection, r2=detection)
    return assemble(cfg)


def _simulator(p1: LinkOneParams, p2: LinkTwoParams, options: RunOptions) -> ChannelSimulator:
    verify_hg2_identities(p2)
    return ChannelSimulator(p1, p2, workers=options.workers, progress=options.progress)


def _prepare(cfg: SystemConfig, metric: str, scope: str, modulation: Optional[ModulationScheme],
             detection: Optional[int]):
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}; choose from {METRICS}")
    if scope not in SCOPES:
        raise ConfigError(f"unknown scope {scope!r}; choose from {SCOPES}")
    if scope == "hop1" and metric != "op":
        raise ConfigError("hop1 supports the op metric only")
    if metric == "ber":
        modulation = modulation or ModulationScheme.ook()
        detection = modulation.detection
    p1, p2 = _bundles(cfg, detection)
    return p1, p2, modulation


def curve(cfg: SystemConfig, metric: str, scope: str, options: RunOptions,
          modulation: Optional[ModulationScheme] = None, s: float = 1.0,
          detection: Optional[int] = None) -> List[CurvePoint]:
    """
    One row per average-SNR grid point (both hops share the average).

    metric is op, ber, capacity or moment; scope is hop1 (op only), hop2 or e2e.
    Monte Carlo twins are attached when options.samples > 0.
    """
    p1, p2, modulation = _prepare(cfg, metric, scope, modulation, detection)
    c0 = cfg.capacity_constant(p2.r2)

    rows = []
    for x_db in snr_grid(*options.grid):
        relay = RelayConfig.locked(cfg.relay_gain, 10.0 ** (x_db / 10.0))
        meta = {"c": format(cfg.relay_gain, ".6g"), "n_k": str(p2.n_k), "r1": str(p1.r1), "r2": str(p2.r2)}
        try:
            rows.append(_curve_point(metric, scope, x_db, p1, p2, relay, cfg.gamma_th, c0, modulation, s,
                                     options, meta))
        except FsoLinkError as exc:
            raise type(exc)(f"x_db={x_db}: {exc}") from exc
    if options.samples > 0:
        attach_monte_carlo(rows, cfg, metric, scope, options, modulation, s, detection)
    return rows


def attach_monte_carlo(rows: List[CurvePoint], cfg: SystemConfig, metric: str, scope: str, options: RunOptions,
                       modulation: Optional[ModulationScheme] = None, s: float = 1.0,
                       detection: Optional[int] = None) -> List[CurvePoint]:
    """Fill the mc_* columns of analytic rows; row i uses seed options.seed + i."""
    if options.samples < 1:
        return rows
    p1, p2, modulation = _prepare(cfg, metric, scope, modulation, detection)
    c0 = cfg.capacity_constant(p2.r2)
    simulator = _simulator(p1, p2, options)
    for index, point in enumerate(rows):
        relay = RelayConfig.locked(cfg.relay_gain, 10.0 ** (point.x_db / 10.0))
        seed = options.seed + index
        try:
            if metric == "op":
                est = simulator.estimate_op(scope, cfg.gamma_th, options.samples, seed, relay)
            elif metric == "ber":
                est = simulator.estimate_ber(scope, modulation, options.samples, seed, relay)
            elif metric == "capacity":
                est = simulator.estimate_capacity(scope, c0, options.samples, seed, relay)
            else:
                est = simulator.estimate_moment(scope, s, options.samples, seed, relay)
        except FsoLinkError as exc:
            raise type(exc)(f"x_db={point.x_db}: {exc}") from exc
        _attach(point, est)
    return rows


def _curve_point(metric: str, scope: str, x_db: float, p1: LinkOneParams, p2: LinkTwoParams, relay: RelayConfig,
                 gamma_th: float, c0: float, modulation: Optional[ModulationScheme], s: float,
                 options: RunOptions, meta: Dict[str, str]) -> CurvePoint:
    gamma_bar = relay.gamma_bar_1
    asymptotic = None
    if scope == "hop1":
        analytic = link_ogs_hap.snr_cdf(gamma_th, p1, gamma_bar)
    elif scope == "hop2":
        if metric == "op":
            analytic = link_hap_user.outage_probability(gamma_th, p2, gamma_bar)
        elif metric == "ber":
            analytic = link_hap_user.avg_ber(modulation, p2, gamma_bar)
        elif metric == "capacity":
            analytic = link_hap_user.capacity(p2, gamma_bar, c0)
        else:
            analytic = link_hap_user.moment(s, p2, gamma_bar)
    else:
        if metric == "op":
            analytic = e2e.e2e_cdf(gamma_th, p1, p2, relay)
            if options.asymptotic:
                breakdown = e2e.asymptotic_cdf_breakdown(gamma_th, p1, p2, relay)
                asymptotic = breakdown.total
                if breakdown.notes:
                    meta["perturbations"] = "; ".join(breakdown.notes)
        elif metric == "ber":
            analytic = e2e.e2e_avg_ber(modulation, p1, p2, relay)
            if options.asymptotic:
                breakdown = e2e.asymptotic_ber_breakdown(modulation, p1, p2, relay)
                asymptotic = breakdown.total
                if breakdown.notes:
                    meta["perturbations"] = "; ".join(breakdown.notes)
        elif metric == "capacity":
            analytic = e2e.e2e_capacity(p1, p2, relay, c0)
        else:
            analytic = e2e.e2e_moment(s, p1, p2, relay)
    if modulation is not None:
        meta["modulation"] = modulation.label
    return CurvePoint(x_db=x_db, analytic=analytic, asymptotic=asymptotic, meta=meta)


def _reference(rows: List[CurvePoint], x_db: float, value: float, tolerance: Tolerance) -> None:
    """Tag the row at x_db with its published value and whether the analytic value lands inside the band."""
    for row in rows:
        if abs(row.x_db - x_db) < 1e-9:
            row.meta["reference"] = format(value, ".6g")
            row.meta["tolerance"] = tolerance.label
            row.meta["acceptance"] = ACCEPTED if tolerance.accepts(row.analytic, value) else MISS
            if row.meta["acceptance"] == MISS:
                logging.warning(f"[Recipes] {row.analytic:.4g} at {x_db:g} dB misses reference "
                                f"{value:.4g} ({tolerance.label})")


# ---------------------------------------------------------------------------
# Recipes
# ---------------------------------------------------------------------------

def gml_approx(cfg: SystemConfig, options: RunOptions) -> Dict[str, List[CurvePoint]]:
    """Exact and truncated GML densities (N_k = 0 and 5) over the support, x = h / A02."""
    tables = {}
    for label, triple in GML_CASES:
        _, p2 = assemble(cfg.with_jitter(*triple))
        x = np.arange(1, 51) / 50.0
        h = p2.a02 * x
        exact = np.asarray(link_hap_user.gml_pdf_exact(h, p2))
        series = {"exact": exact}
        for n_k in (0, 5):
            series[f"nk{n_k}"] = np.asarray(link_hap_user.gml_pdf_approx(h, p2, n_k))
        for name, values in series.items():
            tables[f"gml-approx_{label}_{name}"] = [
                CurvePoint(x_db=float(xi), analytic=float(v), meta={"abscissa": "h/A02"})
                for xi, v in zip(x, values)
            ]
    return tables


def gml_convergence(cfg: SystemConfig, options: RunOptions) -> Dict[str, List[CurvePoint]]:
    """RMS error of the truncated density versus N_k, for several incidence angles."""
    tables = {}
    for label, theta in CONVERGENCE_THETA:
        _, p2 = assemble(cfg.replace(theta_i=theta).with_jitter(1, 2, 1))
        tables[f"gml-convergence_{label}"] = [
            CurvePoint(x_db=float(n_k), analytic=link_hap_user.gml_approx_error(p2, n_k), meta={"abscissa": "n_k"})
            for n_k in range(9)
        ]
    return tables


def _detections() -> Sequence[Tuple[str, int]]:
    return (("imdd", IMDD), ("heterodyne", HETERODYNE))


def hop2_outage(cfg: SystemConfig, options: RunOptions) -> Dict[str, List[CurvePoint]]:
    tables = {}
    for label, triple in HOP2_CASES:
        for det_label, det in _detections():
            rows = curve(cfg.with_jitter(*triple), "op", "hop2", options, detection=det)
            if det == IMDD:
                _reference(rows, 40.0, HOP2_OP_REFERENCE[label], OP_TOLERANCE)
            tables[f"hop2-outage_{label}_{det_label}"] = rows
    return tables


def hop2_ber(cfg: SystemConfig, options: RunOptions) -> Dict[str, List[CurvePoint]]:
    names = ("OOK", "4-QAM", "16-QAM", "64-QAM", "4-PSK", "8-PSK", "16-PSK")
    return {f"hop2-ber_{name}": curve(cfg, "ber", "hop2", options, ModulationScheme.from_name(name))
            for name in names}


def hop2_capacity(cfg: SystemConfig, options: RunOptions) -> Dict[str, List[CurvePoint]]:
    tables = {}
    for label, triple in HOP2_CASES:
        for det_label, det in _detections():
            rows = curve(cfg.with_jitter(*triple), "capacity", "hop2", options, detection=det)
            if det == HETERODYNE:
                _reference(rows, 30.0, HOP2_CAPACITY_REFERENCE[label], CAPACITY_TOLERANCE)
            tables[f"hop2-capacity_{label}_{det_label}"] = rows
    return tables


def e2e_outage_zenith(cfg: SystemConfig, options: RunOptions) -> Dict[str, List[CurvePoint]]:
    tables = {}
    for zenith in ZENITH_DEG:
        for det_label, det in _detections():
            rows = curve(cfg.replace(zeta_1=math.radians(zenith)), "op", "e2e", options, detection=det)
            if det == HETERODYNE:
                _reference(rows, 35.0, E2E_ZENITH_REFERENCE[zenith], OP_TOLERANCE)
            tables[f"e2e-outage-zenith_{zenith:g}deg_{det_label}"] = rows
    return tables


def af_vs_df(cfg: SystemConfig, options: RunOptions) -> Dict[str, List[CurvePoint]]:
    """AF outage next to the decode-and-forward baseline; DF goes in its own table."""
    tables = {}
    for zenith in ZENITH_DEG:
        zcfg = cfg.replace(zeta_1=math.radians(zenith))
        af_rows = curve(zcfg, "op", "e2e", options)
        p1, p2 = assemble(zcfg)
        df_rows = []
        for row in af_rows:
            gamma_bar = 10.0 ** (row.x_db / 10.0)
            df = e2e.df_outage_reference(zcfg.gamma_th, p1, p2, gamma_bar, gamma_bar)
            df_point = CurvePoint(x_db=row.x_db, analytic=df, meta={"scheme": "df"})
            # DF above AF at the same SNR is marked
            if df > row.analytic + 1e-12:
                df_point.meta["reference"] = "<= af"
                df_point.meta["acceptance"] = MISS
                logging.warning(f"[Recipes] DF {df:.4g} above AF {row.analytic:.4g} at {row.x_db:g} dB")
            df_rows.append(df_point)
            row.meta["scheme"] = "af"
        if zenith == 60.0:
            _reference(af_rows, 30.0, AF_DF_REFERENCE["af"], AF_DF_TOLERANCE)
            _reference(df_rows, 30.0, AF_DF_REFERENCE["df"], AF_DF_TOLERANCE)
        tables[f"af-vs-df_{zenith:g}deg_af"] = af_rows
        tables[f"af-vs-df_{zenith:g}deg_df"] = df_rows
    return tables


def e2e_outage_jitter(cfg: SystemConfig, options: RunOptions) -> Dict[str, List[CurvePoint]]:
    tables = {}
    for label, triple in JITTER_CASES:
        rows = curve(cfg.with_jitter(*triple), "op", "e2e", options)
        _reference(rows, 40.0, E2E_JITTER_REFERENCE[label], OP_TOLERANCE)
        tables[f"e2e-outage-jitter_{label}"] = rows
    return tables


def e2e_ber(cfg: SystemConfig, options: RunOptions) -> Dict[str, List[CurvePoint]]:
    return {f"e2e-ber_{name}": curve(cfg, "ber", "e2e", options, ModulationScheme.from_name(name))
            for name in ("OOK", "4-QAM", "4-PSK")}


def e2e_capacity_zenith(cfg: SystemConfig, options: RunOptions) -> Dict[str, List[CurvePoint]]:
    tables = {}
    for zenith in ZENITH_DEG:
        for det_label, det in _detections():
            rows = curve(cfg.replace(zeta_1=math.radians(zenith)), "capacity", "e2e", options, detection=det)
            tables[f"e2e-capacity-zenith_{zenith:g}deg_{det_label}"] = rows
    return tables


RECIPES: Dict[str, Callable[[SystemConfig, RunOptions], Dict[str, List[CurvePoint]]]] = {
    "gml-approx": gml_approx,
    "gml-convergence": gml_convergence,
    "hop2-outage": hop2_outage,
    "hop2-ber": hop2_ber,
    "hop2-capacity": hop2_capacity,
    "e2e-outage-zenith": e2e_outage_zenith,
    "af-vs-df": af_vs_df,
    "e2e-outage-jitter": e2e_outage_jitter,
    "e2e-ber": e2e_ber,
    "e2e-capacity-zenith": e2e_capacity_zenith,
}


def run_recipe(name: str, cfg: SystemConfig, options: RunOptions) -> Dict[str, List[CurvePoint]]:
    """Run a recipe by name, or every recipe behind a figure alias (fig4..fig9)."""
    names = FIGURE_ALIASES.get(name, (name,))
    unknown = [n for n in names if n not in RECIPES]
    if unknown:
        raise UnknownFigureError(f"unknown figure recipe {name!r}; choose from "
                                 f"{', '.join(list(RECIPES) + list(FIGURE_ALIASES))}")
    tables = {}
    for recipe in names:
        logging.info(f"[Recipes] running {recipe}")
        tables.update(RECIPES[recipe](cfg, options))
    return tables
