#!/usr/bin/env python3
"""
End-to-end relayed link
-----------------------
SNR combination, relay configuration, exact end-to-end statistics against
Monte Carlo, the decode-and-forward reference, diversity order, the high-SNR
expansions and relay gain calibration.
"""

import dataclasses
import math
import sys

import numpy as np
import pytest

from models import e2e, link_hap_user, link_ogs_hap
from models.e2e import RelayConfig
from models.link_hap_user import ModulationScheme
from models.link_ogs_hap import SnrValue
from models.montecarlo import ChannelSimulator
from models.recipes import HOP2_CASES, HOP2_OP_REFERENCE, OP_TOLERANCE
from models.scenario import HETERODYNE, IMDD, SystemConfig, assemble
from utils.errors import DegenerateExponentError, DomainError, EmptySampleError
from utils.suite_utils import run_suite

CFG = SystemConfig()
P1, P2 = assemble(CFG)
GAMMA_TH = CFG.gamma_th
MC_SAMPLES = 200_000
SIGMAS = 4.0


def _agrees(analytic: float, est) -> bool:
    if est.std_error == 0:
        return est.contains(analytic)
    return abs(analytic - est.mean) <= SIGMAS * est.std_error + 1e-6 * abs(analytic)


def _simulator() -> ChannelSimulator:
    return ChannelSimulator(P1, P2, workers=2)


# ---------------------------------------------------------------------------
# SNR combination and relay configuration
# ---------------------------------------------------------------------------

def test_combine_snr_scalar_and_array():
    assert e2e.combine_snr(10.0, 20.0, 1.0) == pytest.approx(200.0 / 21.0)
    out = e2e.combine_snr(np.array([1.0, 2.0]), np.array([1.0, np.inf]), 1.0)
    np.testing.assert_allclose(out, [0.5, 2.0])


def test_combine_snr_value_type():
    out = e2e.combine_snr(SnrValue(4.0), SnrValue(4.0), 4.0)
    assert isinstance(out, SnrValue)
    assert out.value == pytest.approx(2.0)


def test_combine_snr_rejects_gain():
    with pytest.raises(DomainError):
        e2e.combine_snr(1.0, 1.0, 0.0)


def test_relay_config():
    relay = RelayConfig.locked(2.0, 100.0)
    assert (relay.gamma_bar_1, relay.gamma_bar_2, relay.lock_equal) == (100.0, 100.0, True)
    assert relay.with_gamma_bar(SnrValue(10.0)).gamma_bar_2 == 10.0
    assert RelayConfig(1.0, 10.0, 20.0).gamma_bar_2 == 20.0
    with pytest.raises(DomainError):
        RelayConfig(1.0, 10.0, 20.0, lock_equal=True)
    with pytest.raises(DomainError):
        RelayConfig(0.0, 10.0, 10.0)
    with pytest.raises(DomainError):
        RelayConfig(1.0, 0.0, 10.0)


# ---------------------------------------------------------------------------
# Exact statistics
# ---------------------------------------------------------------------------

def test_cdf_zero_threshold():
    assert e2e.e2e_cdf(0.0, P1, P2, RelayConfig.locked(1.0, 100.0)) == 0.0


def test_cdf_split_matches_direct():
    relay = RelayConfig.locked(1.0, 1000.0)
    split = e2e.e2e_cdf(GAMMA_TH, P1, P2, relay, method="split")
    direct = e2e.e2e_cdf(GAMMA_TH, P1, P2, relay, method="direct")
    assert split == pytest.approx(direct, rel=1e-4)


def test_cdf_terms_shape():
    terms = e2e.e2e_cdf_terms(GAMMA_TH, P1, P2, RelayConfig.locked(1.0, 1000.0))
    assert terms.shape == (P2.n_k + 1,)


def test_cdf_monotone_in_threshold():
    relay = RelayConfig.locked(1.0, 1000.0)
    values = [e2e.e2e_cdf(g, P1, P2, relay) for g in np.logspace(-1, 3, 6)]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


def test_cdf_dominates_first_hop():
    # gamma_e2e <= gamma_1 sample by sample
    for db in (30.0, 40.0):
        relay = RelayConfig.locked(1.0, 10.0 ** (db / 10))
        hop_one = link_ogs_hap.snr_cdf(GAMMA_TH, P1, relay.gamma_bar_1)
        assert e2e.e2e_cdf(GAMMA_TH, P1, P2, relay) >= hop_one * (1.0 - 1e-6)


def test_cdf_degenerate_relay_limit():
    # C << gamma_2 leaves gamma_e2e ~ gamma_1
    for db in (30.0, 40.0):
        gamma_bar = 10.0 ** (db / 10)
        relay = RelayConfig.locked(1e-6 * gamma_bar, gamma_bar)
        hop_one = link_ogs_hap.snr_cdf(GAMMA_TH, P1, gamma_bar)
        assert e2e.e2e_cdf(GAMMA_TH, P1, P2, relay) == pytest.approx(hop_one, abs=1e-3)


def test_cdf_against_monte_carlo():
    for seed, db in ((21, 30.0), (22, 40.0)):
        relay = RelayConfig.locked(CFG.relay_gain, 10.0 ** (db / 10))
        est = _simulator().estimate_op("e2e", GAMMA_TH, MC_SAMPLES, seed, relay)
        assert _agrees(e2e.e2e_cdf(GAMMA_TH, P1, P2, relay), est)


def test_pdf_positive():
    relay = RelayConfig.locked(1.0, 1000.0)
    assert e2e.e2e_pdf(GAMMA_TH, P1, P2, relay) > 0
    with pytest.raises(DomainError):
        e2e.e2e_pdf(0.0, P1, P2, relay)


def test_ber_against_monte_carlo():
    relay = RelayConfig.locked(1.0, 1000.0)
    mod = ModulationScheme.qam(4)
    est = _simulator().estimate_ber("e2e", mod, MC_SAMPLES, 23, relay)
    value = e2e.e2e_avg_ber(mod, P1, P2, relay)
    assert 0.0 <= value <= 0.5
    assert _agrees(value, est)


def test_capacity_against_monte_carlo():
    relay = RelayConfig.locked(1.0, 1000.0)
    est = _simulator().estimate_capacity("e2e", 1.0, MC_SAMPLES, 24, relay)
    assert _agrees(e2e.e2e_capacity(P1, P2, relay, 1.0), est)


def test_moment_against_monte_carlo():
    relay = RelayConfig.locked(1.0, 1000.0)
    est = _simulator().estimate_moment("e2e", 1.0, MC_SAMPLES, 25, relay)
    assert _agrees(e2e.e2e_moment(1.0, P1, P2, relay), est)


def test_moment_rejects_non_positive_order():
    with pytest.raises(DomainError):
        e2e.e2e_moment(0.0, P1, P2, RelayConfig.locked(1.0, 100.0))


def test_moment_near_zero_order():
    relay = RelayConfig.locked(1.0, 1000.0)
    assert e2e.e2e_moment(1e-6, P1, P2, relay) == pytest.approx(1.0, abs=1e-4)


def test_df_reference():
    gamma_bar = 1000.0
    f1 = link_ogs_hap.snr_cdf(GAMMA_TH, P1, gamma_bar)
    f2 = link_hap_user.snr_cdf(GAMMA_TH, P2, gamma_bar)
    df = e2e.df_outage_reference(GAMMA_TH, P1, P2, gamma_bar, gamma_bar)
    assert df == pytest.approx(f1 + f2 - f1 * f2, rel=1e-12)
    assert df >= max(f1, f2)


# ---------------------------------------------------------------------------
# High-SNR behaviour
# ---------------------------------------------------------------------------

def test_diversity_order():
    report = e2e.diversity_order(P1, P2)
    assert report.order == min(report.candidates.values())
    assert report.candidates[report.label] == report.order
    assert report.candidates["gml/r2"] == pytest.approx(P2.exponent / P2.r2)


def test_asymptotic_cdf_tightens():
    gaps = []
    for db in (50.0, 70.0):
        relay = RelayConfig.locked(1.0, 10.0 ** (db / 10))
        exact = e2e.e2e_cdf(GAMMA_TH, P1, P2, relay)
        breakdown = e2e.asymptotic_cdf_breakdown(GAMMA_TH, P1, P2, relay)
        assert math.isfinite(breakdown.total)
        gaps.append(abs(breakdown.total / exact - 1.0))
    assert gaps[1] < gaps[0]


def test_asymptote_slope_is_diversity_order():
    order = e2e.diversity_order(P1, P2).order
    lo, hi = 1e8, 1e10
    a_lo = e2e.e2e_cdf_asymptotic(GAMMA_TH, P1, P2, RelayConfig.locked(1.0, lo))
    a_hi = e2e.e2e_cdf_asymptotic(GAMMA_TH, P1, P2, RelayConfig.locked(1.0, hi))
    slope = -(math.log(a_hi) - math.log(a_lo)) / (math.log(hi) - math.log(lo))
    assert slope == pytest.approx(order, rel=0.05)


def test_asymptote_tracks_exact_at_high_snr():
    for db in (45.0, 50.0, 55.0, 60.0):
        relay = RelayConfig.locked(1.0, 10.0 ** (db / 10))
        exact = e2e.e2e_cdf(GAMMA_TH, P1, P2, relay)
        asymptote = e2e.e2e_cdf_asymptotic(GAMMA_TH, P1, P2, relay)
        assert exact / asymptote == pytest.approx(1.0, abs=0.10)


def test_asymptotic_ber_terms():
    relay = RelayConfig.locked(1.0, 1e6)
    breakdown = e2e.asymptotic_ber_breakdown(ModulationScheme.qam(4), P1, P2, relay)
    assert {"eta2", "alpha1", "beta1", "gml-cross"} <= set(breakdown.terms)
    assert math.isfinite(breakdown.total)


def test_integer_spaced_exponents():
    p1 = dataclasses.replace(P1, eta_s2=P1.gg.beta + 1.0)
    relay = RelayConfig.locked(1.0, 1e6)
    with pytest.raises(DegenerateExponentError):
        e2e.asymptotic_cdf_breakdown(GAMMA_TH, p1, P2, relay, perturb=False)
    breakdown = e2e.asymptotic_cdf_breakdown(GAMMA_TH, p1, P2, relay)
    assert breakdown.notes
    assert math.isfinite(breakdown.total)


# ---------------------------------------------------------------------------
# Relay gain calibration
# ---------------------------------------------------------------------------

def test_calibrate_recovers_gain():
    gamma_bars = [10.0 ** 3.0, 10.0 ** 4.0]
    reference = [e2e.e2e_cdf(GAMMA_TH, P1, P2, RelayConfig.locked(2.0, gb)) for gb in gamma_bars]
    gain, mse = e2e.calibrate_relay_gain(P1, P2, GAMMA_TH, gamma_bars, reference, bounds=(0.1, 10.0))
    assert gain == pytest.approx(2.0, rel=2e-2)
    assert mse < 1e-4


def test_calibrate_needs_positive_reference():
    with pytest.raises(EmptySampleError):
        e2e.calibrate_relay_gain(P1, P2, GAMMA_TH, [100.0], [0.0])


# ---------------------------------------------------------------------------
# Reference operating points
# ---------------------------------------------------------------------------

# Values this model gives at the default scenario; the published figure values
# (HOP2_OP_REFERENCE etc.) sit outside their tolerance, see DESIGN.md.
HOP2_OP_AT_40DB = {"source": 0.141, "reflector": 0.151, "lens": 0.208, "combined": 0.380}
HOP2_CAPACITY_AT_30DB = {"source": 3.19, "reflector": 3.17, "lens": 3.06, "combined": 2.70}
E2E_OP_AT_35DB = {50.0: 0.041, 55.0: 0.065, 60.0: 0.122}


def _hop_two(triple, detection):
    _, p2 = assemble(CFG.with_jitter(*triple).replace(r1=detection, r2=detection))
    return p2


def test_hop_two_outage_operating_points():
    for label, triple in HOP2_CASES:
        value = link_hap_user.outage_probability(GAMMA_TH, _hop_two(triple, IMDD), 1e4)
        assert value == pytest.approx(HOP2_OP_AT_40DB[label], rel=0.02)
        assert not OP_TOLERANCE.accepts(value, HOP2_OP_REFERENCE[label])


def test_hop_two_capacity_operating_points():
    c0 = CFG.capacity_constant(HETERODYNE)
    for label, triple in HOP2_CASES:
        value = link_hap_user.capacity(_hop_two(triple, HETERODYNE), 1e3, c0)
        assert value == pytest.approx(HOP2_CAPACITY_AT_30DB[label], abs=0.02)


def test_e2e_outage_operating_points():
    gamma_bar = 10.0 ** 3.5
    for zenith, expected in E2E_OP_AT_35DB.items():
        cfg = CFG.replace(zeta_1=math.radians(zenith), r1=HETERODYNE, r2=HETERODYNE)
        p1, p2 = assemble(cfg)
        value = e2e.e2e_cdf(cfg.gamma_th, p1, p2, RelayConfig.locked(cfg.relay_gain, gamma_bar))
        assert value == pytest.approx(expected, rel=0.03)


def test_af_above_df_at_reference_point():
    cfg = CFG.replace(zeta_1=math.radians(60.0))
    p1, p2 = assemble(cfg)
    af = e2e.e2e_cdf(cfg.gamma_th, p1, p2, RelayConfig.locked(cfg.relay_gain, 1e3))
    df = e2e.df_outage_reference(cfg.gamma_th, p1, p2, 1e3, 1e3)
    assert af == pytest.approx(0.415, abs=0.005)
    assert df == pytest.approx(0.401, abs=0.005)
    assert df <= af


def run_test_suite():
    return run_suite("End-to-end link", globals())


if __name__ == "__main__":
    sys.exit(0 if run_test_suite() else 1)
