#!/usr/bin/env python3
"""
Per-hop link statistics
-----------------------
Hop 1 (ground station to HAP) CDF against an independent quadrature, hop 2
(HAP to user via the reflector) densities, CDF, BER, capacity and moments,
with Monte Carlo cross-checks on the reference scenario.
"""

import math
import sys

import numpy as np
import pytest
from scipy.integrate import quad

from models import link_hap_user, link_ogs_hap
from models.atmosphere import GGParams
from models.e2e import RelayConfig
from models.link_hap_user import ModulationScheme
from models.link_ogs_hap import SnrValue
from models.montecarlo import ChannelSimulator
from models.scenario import IMDD, LinkOneParams, SystemConfig, assemble
from utils.errors import DomainError
from utils.suite_utils import run_suite

P1_MANUAL = LinkOneParams(eta_s2=1.5, a01=0.8, h_p1=0.9, gg=GGParams(4.2, 2.1), r1=1, d_oh=1.0)
P1, P2 = assemble(SystemConfig())
MC_SAMPLES = 200_000
SIGMAS = 4.0
# h = A0 exp(-t) stays above the smallest normal double for t below this
LOG_SPAN = 700.0


def _agrees(analytic: float, est) -> bool:
    if est.std_error == 0:
        return est.contains(analytic)
    return abs(analytic - est.mean) <= SIGMAS * est.std_error + 1e-6 * abs(analytic)


def _mass_on_support(pdf, a0: float) -> float:
    # h = A0 exp(-t)
    mass, _ = quad(lambda t: pdf(a0 * math.exp(-t)) * a0 * math.exp(-t), 0.0, LOG_SPAN, points=(1.0, 10.0, 50.0),
                   limit=200, epsabs=1e-13, epsrel=1e-10)
    return mass


def _hop_one_oracle(level: float, p: LinkOneParams) -> float:
    """P(h_p1 h_a h_g <= level) by quadrature over the turbulence factor."""
    h_star = level / (p.h_p1 * p.a01)
    below, _ = quad(lambda h: link_ogs_hap.ha_pdf(h, p.gg), 0.0, h_star, epsabs=1e-13, epsrel=1e-11, limit=200)
    above, _ = quad(lambda h: (h_star / h) ** p.eta_s2 * link_ogs_hap.ha_pdf(h, p.gg), h_star, math.inf,
                    epsabs=1e-13, epsrel=1e-11, limit=200)
    return below + above


# ---------------------------------------------------------------------------
# Hop 1
# ---------------------------------------------------------------------------

def test_snr_value():
    assert SnrValue.from_db(20.0).value == pytest.approx(100.0)
    assert SnrValue(1000.0).db == pytest.approx(30.0)
    assert SnrValue(0.0).db == -math.inf
    with pytest.raises(DomainError):
        SnrValue(-1.0)


def test_hop_one_densities_have_unit_mass():
    gg = P1_MANUAL.gg
    mass, _ = quad(lambda h: link_ogs_hap.ha_pdf(h, gg), 0.0, math.inf, limit=200)
    mean, _ = quad(lambda h: h * link_ogs_hap.ha_pdf(h, gg), 0.0, math.inf, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-7)
    assert mean == pytest.approx(1.0, abs=1e-7)
    mass_g, _ = quad(lambda h: link_ogs_hap.hg1_pdf(h, 1.5, 0.8), 0.0, 0.8)
    assert mass_g == pytest.approx(1.0, rel=1e-10)


def test_hop_one_cdf_against_quadrature():
    gamma_bar = 10.0
    for level in (0.05, 0.3, 1.0):
        expected = _hop_one_oracle(level, P1_MANUAL)
        value = link_ogs_hap.snr_cdf(level * gamma_bar, P1_MANUAL, gamma_bar)
        assert value == pytest.approx(expected, rel=1e-6)


def test_hop_one_cdf_imdd():
    p = P1_MANUAL.with_detection(IMDD)
    gamma_bar, level = 4.0, 0.4
    value = link_ogs_hap.snr_cdf(level ** 2 * gamma_bar, p, gamma_bar)
    assert value == pytest.approx(_hop_one_oracle(level, P1_MANUAL), rel=1e-6)


def test_hop_one_split_matches_direct():
    for gamma in (0.5, 3.0, 20.0):
        split = link_ogs_hap.snr_cdf(gamma, P1_MANUAL, 10.0, method="split")
        direct = link_ogs_hap.snr_cdf(gamma, P1_MANUAL, 10.0, method="direct")
        assert split == pytest.approx(direct, rel=1e-6)


def test_hop_one_cdf_bounds_and_monotone():
    assert link_ogs_hap.snr_cdf(0.0, P1, 100.0) == 0.0
    values = [link_ogs_hap.snr_cdf(g, P1, 100.0) for g in np.logspace(-2, 3, 8)]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_hop_one_cdf_rejects_bad_inputs():
    with pytest.raises(DomainError):
        link_ogs_hap.snr_cdf(1.0, P1, 0.0)
    with pytest.raises(DomainError):
        link_ogs_hap.snr_cdf(1.0, P1, 10.0, method="series")


def test_hop_one_pdf_matches_cdf_slope():
    gamma, gamma_bar = 2.0, 10.0
    step = 1e-3
    slope = (link_ogs_hap.snr_cdf(gamma + step, P1_MANUAL, gamma_bar)
             - link_ogs_hap.snr_cdf(gamma - step, P1_MANUAL, gamma_bar)) / (2 * step)
    assert link_ogs_hap.snr_pdf(gamma, P1_MANUAL, gamma_bar) == pytest.approx(slope, rel=1e-4)


def test_hop_one_against_monte_carlo():
    gamma_bar = 10.0 ** 4.0
    simulator = ChannelSimulator(P1, P2, workers=2)
    est = simulator.estimate_op("hop1", SystemConfig().gamma_th, MC_SAMPLES, 11, RelayConfig.locked(1.0, gamma_bar))
    assert _agrees(link_ogs_hap.snr_cdf(SystemConfig().gamma_th, P1, gamma_bar), est)


# ---------------------------------------------------------------------------
# GML densities
# ---------------------------------------------------------------------------

def test_gml_exact_density_unit_mass():
    assert _mass_on_support(lambda h: link_hap_user.gml_pdf_exact(h, P2), P2.a02) == pytest.approx(1.0, abs=1e-7)


def test_gml_approx_density_unit_mass():
    for n_k in (0, 2, 5):
        mass = _mass_on_support(lambda h: link_hap_user.gml_pdf_approx(h, P2, n_k), P2.a02)
        assert mass == pytest.approx(1.0, abs=1e-7)


def test_gml_density_support():
    with pytest.raises(DomainError):
        link_hap_user.gml_pdf_exact(2.0 * P2.a02, P2)
    with pytest.raises(DomainError):
        link_hap_user.gml_pdf_approx(0.0, P2)


def test_gml_approx_error_shrinks():
    _, p2 = assemble(SystemConfig().with_jitter(1, 3, 1))
    assert link_hap_user.gml_approx_error(p2, 6) < link_hap_user.gml_approx_error(p2, 0)


def test_gml_approx_error_strictly_decreasing():
    _, p2 = assemble(SystemConfig().replace(theta_i=math.pi / 3).with_jitter(1, 2, 1))
    errors = [link_hap_user.gml_approx_error(p2, n_k) for n_k in range(9)]
    assert all(b < a for a, b in zip(errors, errors[1:]))


def test_series_weights_unit_ratio():
    cfg = SystemConfig()
    _, p2 = assemble(cfg.replace(theta_r=cfg.theta_i, sigma_r=0.0))
    weights = link_hap_user.series_weights(p2)
    assert weights[0].weight == 1.0
    assert all(w.weight == 0.0 and w.log_weight == -math.inf for w in weights[1:])


def test_series_weights_values():
    c = P2.log_coefficient
    weights = link_hap_user.series_weights(P2, 3)
    assert [w.k for w in weights] == [0, 1, 2, 3]
    assert weights[2].weight == pytest.approx(6.0 * c ** 4, rel=1e-12)


# ---------------------------------------------------------------------------
# Hop 2 statistics
# ---------------------------------------------------------------------------

def test_hop_two_split_matches_direct():
    for gamma_bar in (10.0, 100.0, 1000.0):
        split = link_hap_user.snr_cdf(1.6, P2, gamma_bar, method="split")
        direct = link_hap_user.snr_cdf(1.6, P2, gamma_bar, method="direct")
        assert split == pytest.approx(direct, rel=1e-5, abs=1e-12)


def test_hop_two_cdf_terms_sum():
    terms = link_hap_user.cdf_terms(1.6, P2, 100.0)
    assert terms.shape == (P2.n_k + 1,)
    assert float(terms.sum()) == pytest.approx(link_hap_user.snr_cdf(1.6, P2, 100.0), rel=1e-12)


def test_hop_two_cdf_monotone_in_average():
    values = [link_hap_user.outage_probability(1.6, P2, 10.0 ** (db / 10)) for db in (10, 20, 30, 40, 50)]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert all(b < a for a, b in zip(values, values[1:]))


def test_zeroth_moment_is_one():
    for n_k in (0, 5):
        assert link_hap_user.moment(0.0, P2, 100.0, n_k) == pytest.approx(1.0, rel=1e-12)


def test_moment_rejects_negative_gamma_arguments():
    with pytest.raises(DomainError):
        link_hap_user.moment(-100.0, P2, 100.0)


def test_capacity_grows_with_average():
    values = [link_hap_user.capacity(P2, 10.0 ** (db / 10), 1.0) for db in (10, 20, 30)]
    assert 0 < values[0] < values[1] < values[2]


def test_capacity_below_jensen_bound():
    # E[ln(1 + c0 gamma)] <= ln(1 + c0 E[gamma])
    cfg = SystemConfig()
    for c0 in (1.0, cfg.capacity_constant(IMDD)):
        for db in (10.0, 30.0, 50.0):
            gamma_bar = 10.0 ** (db / 10)
            bound = math.log1p(c0 * link_hap_user.moment(1.0, P2, gamma_bar))
            assert link_hap_user.capacity(P2, gamma_bar, c0) <= bound * (1.0 + 1e-9)


def test_ber_decreases_and_bounded():
    mod = ModulationScheme.qam(4)
    values = [link_hap_user.avg_ber(mod, P2, 10.0 ** (db / 10)) for db in (0, 20, 40)]
    assert all(0.0 <= v <= 0.5 for v in values)
    assert values[0] > values[1] > values[2]


def _hop_two_mc(p2, gamma_bar: float, seed: int, kind: str, arg):
    simulator = ChannelSimulator(P1, p2, workers=2)
    relay = RelayConfig.locked(1.0, gamma_bar)
    if kind == "op":
        return simulator.estimate_op("hop2", arg, MC_SAMPLES, seed, relay)
    if kind == "ber":
        return simulator.estimate_ber("hop2", arg, MC_SAMPLES, seed, relay)
    if kind == "capacity":
        return simulator.estimate_capacity("hop2", arg, MC_SAMPLES, seed, relay)
    return simulator.estimate_moment("hop2", arg, MC_SAMPLES, seed, relay)


def test_hop_two_outage_against_monte_carlo():
    gamma_bar = 1000.0
    est = _hop_two_mc(P2, gamma_bar, 3, "op", 1.6)
    assert _agrees(link_hap_user.outage_probability(1.6, P2, gamma_bar), est)


def test_hop_two_ber_against_monte_carlo():
    gamma_bar = 1000.0
    qam = ModulationScheme.qam(4)
    assert _agrees(link_hap_user.avg_ber(qam, P2, gamma_bar), _hop_two_mc(P2, gamma_bar, 4, "ber", qam))
    ook = ModulationScheme.ook()
    est = _hop_two_mc(P2.with_detection(IMDD), gamma_bar, 5, "ber", ook)
    assert _agrees(link_hap_user.avg_ber(ook, P2, gamma_bar), est)


def test_hop_two_capacity_against_monte_carlo():
    gamma_bar = 1000.0
    assert _agrees(link_hap_user.capacity(P2, gamma_bar, 1.0), _hop_two_mc(P2, gamma_bar, 6, "capacity", 1.0))


def test_hop_two_moment_against_monte_carlo():
    gamma_bar = 1000.0
    assert _agrees(link_hap_user.moment(1.0, P2, gamma_bar), _hop_two_mc(P2, gamma_bar, 7, "moment", 1.0))


# ---------------------------------------------------------------------------
# Modulation schemes
# ---------------------------------------------------------------------------

def test_modulation_parameters():
    qam4 = ModulationScheme.qam(4)
    assert (qam4.delta, qam4.q_values) == (1.0, (1.0,))
    qam16 = ModulationScheme.qam(16)
    assert qam16.delta == pytest.approx(0.75)
    assert qam16.q_values == pytest.approx((0.4, 3.6))
    psk8 = ModulationScheme.psk(8)
    assert psk8.delta == pytest.approx(2.0 / 3.0)
    assert psk8.q_values == pytest.approx((3 * math.sin(math.pi / 8) ** 2, 3 * math.sin(3 * math.pi / 8) ** 2))
    ook = ModulationScheme.ook()
    assert (ook.delta, ook.p, ook.q_values, ook.detection) == (1.0, 0.5, (0.5,), IMDD)


def test_modulation_from_name():
    assert ModulationScheme.from_name("16-QAM") == ModulationScheme.qam(16)
    assert ModulationScheme.from_name("8psk") == ModulationScheme.psk(8)
    assert ModulationScheme.from_name("ook").label == "OOK"
    for name in ("8-QAM", "6-PSK", "FSK", "2-PSK"):
        with pytest.raises(DomainError):
            ModulationScheme.from_name(name)


def run_test_suite():
    return run_suite("Link statistics", globals())


if __name__ == "__main__":
    sys.exit(0 if run_test_suite() else 1)
