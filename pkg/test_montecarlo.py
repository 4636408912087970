#!/usr/bin/env python3
"""
Monte Carlo simulator
---------------------
Interval estimators, the channel samplers, seed determinism across worker
counts and the GML sampling identities.
"""

import dataclasses
import math
import sys

import numpy as np
import pytest

from models.atmosphere import GGParams
from models.e2e import RelayConfig
from models.link_hap_user import ModulationScheme
from models.montecarlo import (
    ChannelSimulator,
    RngStream,
    ber_values,
    capacity_values,
    estimate_op,
    mean_estimate,
    proportion_estimate,
    sample_gg,
    sample_hg1,
    sample_hg2,
    verify_hg2_identities,
    worker_count,
)
from models.scenario import SystemConfig, assemble
from utils.errors import DomainError, EmptySampleError, NumericalError
from utils.suite_utils import run_suite

P1, P2 = assemble(SystemConfig())
N = 200_000


def _mean_within(samples: np.ndarray, expected: float, sigmas: float = 4.0) -> bool:
    se = samples.std(ddof=1) / math.sqrt(samples.size)
    return abs(samples.mean() - expected) <= sigmas * se


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def test_proportion_estimate_interior():
    est = proportion_estimate(30, 100)
    assert est.mean == 0.3
    assert est.ci_low < 0.3 < est.ci_high
    assert est.std_error == pytest.approx(math.sqrt(0.21 / 100))


def test_proportion_estimate_one_sided_at_the_edges():
    none = proportion_estimate(0, 1000)
    assert (none.mean, none.ci_low) == (0.0, 0.0)
    assert 0.0 < none.ci_high < 0.01
    every = proportion_estimate(1000, 1000)
    assert (every.mean, every.ci_high) == (1.0, 1.0)
    assert 0.99 < every.ci_low < 1.0


def test_mean_estimate():
    est = mean_estimate(10.0, 30.0, 5)
    assert est.mean == 2.0
    assert est.std_error == pytest.approx(math.sqrt(2.5 / 5))
    assert est.contains(2.0)
    assert mean_estimate(3.0, 9.0, 1).std_error == 0.0


def test_empty_samples():
    with pytest.raises(EmptySampleError):
        proportion_estimate(0, 0)
    with pytest.raises(EmptySampleError):
        estimate_op([], 1.0)
    with pytest.raises(EmptySampleError):
        ChannelSimulator(P1, P2, workers=1).simulate_hop2(100.0, 0, 1)


def test_estimate_op_counts_threshold_inclusive():
    est = estimate_op([0.5, 1.0, 2.0, 3.0], 1.0)
    assert est.mean == 0.5
    assert est.n == 4


def test_conditional_metric_values():
    zero = np.zeros(3)
    np.testing.assert_allclose(ber_values(zero, ModulationScheme.ook()), 0.5)
    np.testing.assert_allclose(ber_values(zero, ModulationScheme.qam(16)), 0.75)
    np.testing.assert_allclose(capacity_values([0.0, math.e - 1.0], 1.0), [0.0, 1.0])
    with pytest.raises(DomainError):
        capacity_values([1.0], 0.0)


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

def test_rng_stream_reproducible():
    a = RngStream(7, 3).generator().random(5)
    b = RngStream(7, 3).generator().random(5)
    c = RngStream(7, 4).generator().random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_gg_unit_mean():
    samples = sample_gg(GGParams(4.2, 2.1), RngStream(1).generator(), N)
    assert _mean_within(samples, 1.0)
    assert np.all(samples > 0)


def test_sample_hg1_mean_and_support():
    samples = sample_hg1(1.5, 0.8, RngStream(2).generator(), N)
    assert np.all((samples > 0) & (samples <= 0.8))
    assert _mean_within(samples, 0.8 * 1.5 / 2.5)


def test_sample_hg2_mean_and_support():
    samples = sample_hg2(P2, RngStream(3).generator(), N)
    assert np.all((samples > 0) & (samples <= P2.a02))
    expected = P2.a02 / math.sqrt((1 + 4 * P2.sigma_u1_sq / P2.t_g) * (1 + 4 * P2.sigma_u2_sq / P2.t_g))
    assert _mean_within(samples, expected)


def test_verify_hg2_identities():
    assert verify_hg2_identities(P2) < 1e-10
    with pytest.raises(NumericalError):
        verify_hg2_identities(dataclasses.replace(P2, t_g=2.0 * P2.t_g))


# ---------------------------------------------------------------------------
# Simulator
# ---------------------------------------------------------------------------

def test_same_seed_same_samples_any_workers():
    relay = RelayConfig.locked(1.0, 1000.0)
    single = ChannelSimulator(P1, P2, chunk_size=1000, workers=1).simulate("e2e", 5500, 42, relay)
    pooled = ChannelSimulator(P1, P2, chunk_size=1000, workers=4).simulate("e2e", 5500, 42, relay)
    assert single.shape == (5500,)
    np.testing.assert_array_equal(single, pooled)
    other = ChannelSimulator(P1, P2, chunk_size=1000, workers=1).simulate("e2e", 5500, 43, relay)
    assert not np.array_equal(single, other)


def test_streamed_estimate_matches_samples():
    relay = RelayConfig.locked(1.0, 1000.0)
    simulator = ChannelSimulator(P1, P2, chunk_size=4096, workers=3)
    samples = simulator.simulate("hop2", 20_000, 5, relay)
    est = simulator.estimate_op("hop2", 1.6, 20_000, 5, relay)
    assert est.mean == pytest.approx(float(np.mean(samples <= 1.6)), abs=1e-12)


def test_deterministic_channel():
    simulator = ChannelSimulator(P1, P2, turbulence=False, misalignment=False, workers=1)
    hop1 = simulator.simulate_hop1(100.0, 10, 1)
    np.testing.assert_allclose(hop1, 100.0 * P1.h_p1 ** P1.r1)
    g2 = 100.0 * P2.h_p2 ** P2.r2
    e2e = simulator.simulate_e2e(RelayConfig.locked(2.0, 100.0), 10, 1)
    np.testing.assert_allclose(e2e, hop1 * g2 / (g2 + 2.0))


def test_unknown_kind():
    with pytest.raises(DomainError):
        ChannelSimulator(P1, P2, workers=1).simulate("hop3", 10, 1, RelayConfig.locked(1.0, 10.0))


def test_worker_count():
    assert worker_count(3) == 3
    assert worker_count(0) == 1
    assert worker_count() >= 1


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.setenv("FSO_LINK_LAB_THREADS", "5")
    assert worker_count() == 5
    monkeypatch.setenv("FSO_LINK_LAB_THREADS", "many")
    assert worker_count() >= 1


def run_test_suite():
    return run_suite("Monte Carlo", globals())


if __name__ == "__main__":
    sys.exit(0 if run_test_suite() else 1)
