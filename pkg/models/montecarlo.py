"""
Physics-level Monte Carlo simulator for both hops and the relayed link.

Samples are produced in fixed chunks of CHUNK_SIZE, chunk i drawing from its
own substream SeedSequence(seed, spawn_key=(i,)). Chunks run on a thread pool
and are reduced in chunk order, so results for a given seed do not depend on
the number of workers.
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaincc
from scipy.stats import norm
from tqdm import tqdm

from models.atmosphere import GGParams
from models.e2e import RelayConfig, combine_snr
from models.link_hap_user import ModulationScheme
from models.scenario import LinkOneParams, LinkTwoParams
from utils.errors import DomainError, EmptySampleError, NumericalError

CHUNK_SIZE = 2 ** 16
CONFIDENCE = 0.99
THREADS_ENV = "FSO_LINK_LAB_THREADS"


@dataclass(frozen=True)
class RngStream:
    """Substream `stream_id` of a 64-bit seed."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,)))


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    ci_low: float
    ci_high: float
    n: int

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

def sample_gg(gg: GGParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """Product of unit-mean Gamma(alpha) and Gamma(beta) variates."""
    return rng.gamma(gg.alpha, 1.0 / gg.alpha, size) * rng.gamma(gg.beta, 1.0 / gg.beta, size)


def sample_hg1(eta_s2: float, a0: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Inverse-CDF draw A0 * U^(1/eta^2), U uniform on (0, 1]."""
    if not (eta_s2 > 0 and a0 > 0):
        raise DomainError(f"invalid pointing parameters eta_s2={eta_s2}, A0={a0}")
    return a0 * (1.0 - rng.random(size)) ** (1.0 / eta_s2)


def sample_hg2(p: LinkTwoParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """A02 exp(-2 (u1^2 + u2^2) / t_g) with independent zero-mean normal jitter components."""
    u1 = rng.normal(0.0, math.sqrt(p.sigma_u1_sq), size)
    u2 = rng.normal(0.0, math.sqrt(p.sigma_u2_sq), size)
    return p.a02 * np.exp(-2.0 * (u1 * u1 + u2 * u2) / p.t_g)


def verify_hg2_identities(p: LinkTwoParams, tol: float = 1e-10) -> float:
    """
    Check that sampling the jitter components reproduces the GML density's
    exponent and I0 coefficient. Returns the larger relative error.
    """
    s1, s2 = p.sigma_u1_sq, p.sigma_u2_sq
    exponent = p.t_g * (s1 + s2) / (8.0 * s1 * s2)
    coefficient = p.t_g * abs(s1 - s2) / (8.0 * s1 * s2)
    err_exponent = abs(exponent - p.exponent) / p.exponent
    err_coefficient = abs(coefficient - 2.0 * p.log_coefficient) / max(coefficient, 1e-300)
    if coefficient == 0.0:
        err_coefficient = abs(p.log_coefficient)
    worst = max(err_exponent, err_coefficient)
    if worst > tol:
        raise NumericalError(f"GML sampling identities fail (relative error {worst:.3e})")
    return worst


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def _z(confidence: float) -> float:
    return float(norm.ppf(0.5 + 0.5 * confidence))


def _as_samples(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=float).ravel()
    if arr.size == 0:
        raise EmptySampleError("no samples to estimate from")
    return arr


def proportion_estimate(successes: int, n: int, confidence: float = CONFIDENCE) -> Estimate:
    """Wilson score interval; at 0 or n successes the interval is one-sided."""
    if n <= 0:
        raise EmptySampleError("no samples to estimate from")
    p_hat = successes / n
    z = _z(confidence)
    z2n = z * z / n
    center = (p_hat + 0.5 * z2n) / (1.0 + z2n)
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / n + 0.25 * z2n / n) / (1.0 + z2n)
    low, high = max(center - half, 0.0), min(center + half, 1.0)
    if successes == 0:
        low = 0.0
    elif successes == n:
        high = 1.0
    return Estimate(mean=p_hat, std_error=math.sqrt(p_hat * (1.0 - p_hat) / n),
                    ci_low=min(low, p_hat), ci_high=max(high, p_hat), n=n)


def mean_estimate(total: float, total_sq: float, n: int, confidence: float = CONFIDENCE) -> Estimate:
    """Normal interval from running sums."""
    if n <= 0:
        raise EmptySampleError("no samples to estimate from")
    mean = total / n
    if n < 2:
        se = 0.0
    else:
        var = max(total_sq - n * mean * mean, 0.0) / (n - 1)
        se = math.sqrt(var / n)
    z = _z(confidence)
    return Estimate(mean=mean, std_error=se, ci_low=mean - z * se, ci_high=mean + z * se, n=n)


def outage_indicator(samples, gamma_th: float) -> np.ndarray:
    return (_as_samples(samples) <= gamma_th).astype(float)


def ber_values(samples, mod: ModulationScheme) -> np.ndarray:
    """Conditional BER delta * sum_m Gamma(p, q_m gamma) / (2 Gamma(p)) per sample."""
    gamma = _as_samples(samples)
    total = np.zeros_like(gamma)
    for q_b in mod.q_values:
        total += gammaincc(mod.p, q_b * gamma)
    return 0.5 * mod.delta * total


def capacity_values(samples, c0: float) -> np.ndarray:
    if not c0 > 0:
        raise DomainError(f"c0 must be > 0, got {c0}")
    return np.log1p(c0 * _as_samples(samples))


def moment_values(samples, s: float) -> np.ndarray:
    return _as_samples(samples) ** s


def estimate_op(samples, gamma_th: float, confidence: float = CONFIDENCE) -> Estimate:
    hits = outage_indicator(samples, gamma_th)
    return proportion_estimate(int(hits.sum()), hits.size, confidence)


def _from_values(values: np.ndarray, confidence: float) -> Estimate:
    return mean_estimate(float(values.sum()), float(np.dot(values, values)), values.size, confidence)


def estimate_ber(samples, mod: ModulationScheme, confidence: float = CONFIDENCE) -> Estimate:
    return _from_values(ber_values(samples, mod), confidence)


def estimate_capacity(samples, c0: float, confidence: float = CONFIDENCE) -> Estimate:
    return _from_values(capacity_values(samples, c0), confidence)


def estimate_moment(samples, s: float, confidence: float = CONFIDENCE) -> Estimate:
    return _from_values(moment_values(samples, s), confidence)


# ---------------------------------------------------------------------------
# Simulator
# ---------------------------------------------------------------------------

def worker_count(requested: Optional[int] = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.getenv(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logging.warning(f"[MonteCarlo] ignoring non-integer {THREADS_ENV}={env!r}")
    return max(1, os.cpu_count() or 1)


class ChannelSimulator:
    """
    Draws SNR samples for hop 1, hop 2 and the relayed link from the channel
    factors themselves (no closed forms involved).

    turbulence=False and misalignment=False replace the Gamma-Gamma and the
    pointing/GML factors by 1, which makes the channel deterministic.
    """

    def __init__(self, link_one: LinkOneParams, link_two: LinkTwoParams, *, turbulence: bool = True,
                 misalignment: bool = True, chunk_size: int = CHUNK_SIZE, workers: Optional[int] = None,
                 progress: bool = False):
        if chunk_size < 1:
            raise DomainError("chunk_size must be positive")
        self.link_one = link_one
        self.link_two = link_two
        self.turbulence = turbulence
        self.misalignment = misalignment
        self.chunk_size = chunk_size
        self.workers = worker_count(workers)
        self.progress = progress
        logging.info(f"[MonteCarlo] Initialized (workers={self.workers}, chunk={chunk_size}, "
                     f"turbulence={turbulence}, misalignment={misalignment}).")

    # -- per-hop draws -----------------------------------------------------

    def _hop_one(self, rng: np.random.Generator, size: int, gamma_bar: float) -> np.ndarray:
        p = self.link_one
        h = np.full(size, p.h_p1)
        if self.turbulence:
            h = h * sample_gg(p.gg, rng, size)
        if self.misalignment:
            h = h * sample_hg1(p.eta_s2, p.a01, rng, size)
        return gamma_bar * h ** p.r1

    def _hop_two(self, rng: np.random.Generator, size: int, gamma_bar: float) -> np.ndarray:
        p = self.link_two
        h = np.full(size, p.h_p2)
        if self.turbulence:
            h = h * sample_gg(p.gg, rng, size)
        if self.misalignment:
            h = h * sample_hg2(p, rng, size)
        return gamma_bar * h ** p.r2

    def _chunk(self, kind: str, index: int, n: int, seed: int, relay: RelayConfig) -> np.ndarray:
        size = min(self.chunk_size, n - index * self.chunk_size)
        rng = RngStream(seed, index).generator()
        if kind == "hop1":
            return self._hop_one(rng, size, relay.gamma_bar_1)
        if kind == "hop2":
            return self._hop_two(rng, size, relay.gamma_bar_2)
        if kind == "e2e":
            g1 = self._hop_one(rng, size, relay.gamma_bar_1)
            g2 = self._hop_two(rng, size, relay.gamma_bar_2)
            return combine_snr(g1, g2, relay.gain)
        raise DomainError(f"unknown simulation kind {kind!r}")

    def _map_chunks(self, kind: str, n: int, seed: int, relay: RelayConfig,
                    reduce: Callable[[np.ndarray], object]) -> list:
        if n < 1:
            raise EmptySampleError("sample count must be >= 1")
        chunks = math.ceil(n / self.chunk_size)

        def work(index: int):
            return reduce(self._chunk(kind, index, n, seed, relay))

        with ThreadPoolExecutor(max_workers=min(self.workers, chunks)) as pool:
            results = list(tqdm(pool.map(work, range(chunks)), total=chunks, desc=f"MC {kind}",
                                disable=not self.progress, leave=False))
        return results

    # -- public API ---------------------------------------------------------

    def simulate(self, kind: str, n: int, seed: int, relay: RelayConfig) -> np.ndarray:
        """All n SNR samples of `kind` ("hop1", "hop2" or "e2e"), in chunk order."""
        return np.concatenate(self._map_chunks(kind, n, seed, relay, lambda chunk: chunk))

    def simulate_hop1(self, gamma_bar: float, n: int, seed: int) -> np.ndarray:
        return self.simulate("hop1", n, seed, RelayConfig.locked(1.0, gamma_bar))

    def simulate_hop2(self, gamma_bar: float, n: int, seed: int) -> np.ndarray:
        return self.simulate("hop2", n, seed, RelayConfig.locked(1.0, gamma_bar))

    def simulate_e2e(self, relay: RelayConfig, n: int, seed: int) -> np.ndarray:
        return self.simulate("e2e", n, seed, relay)

    def estimate(self, kind: str, n: int, seed: int, relay: RelayConfig,
                 values: Callable[[np.ndarray], np.ndarray], proportion: bool = False,
                 confidence: float = CONFIDENCE) -> Estimate:
        """
        Streamed estimate of E[values(gamma)] without holding all samples;
        per-chunk sums are combined in chunk order.
        """
        def reduce(chunk: np.ndarray):
            v = values(chunk)
            return float(v.sum()), float(np.dot(v, v)), v.size

        parts = self._map_chunks(kind, n, seed, relay, reduce)
        total = sum(part[0] for part in parts)
        total_sq = sum(part[1] for part in parts)
        count = sum(part[2] for part in parts)
        if proportion:
            return proportion_estimate(int(round(total)), count, confidence)
        return mean_estimate(total, total_sq, count, confidence)

    def estimate_op(self, kind: str, gamma_th: float, n: int, seed: int, relay: RelayConfig) -> Estimate:
        return self.estimate(kind, n, seed, relay, lambda g: outage_indicator(g, gamma_th), proportion=True)

    def estimate_ber(self, kind: str, mod: ModulationScheme, n: int, seed: int, relay: RelayConfig) -> Estimate:
        return self.estimate(kind, n, seed, relay, lambda g: ber_values(g, mod))

    def estimate_capacity(self, kind: str, c0: float, n: int, seed: int, relay: RelayConfig) -> Estimate:
        return self.estimate(kind, n, seed, relay, lambda g: capacity_values(g, c0))

    def estimate_moment(self, kind: str, s: float, n: int, seed: int, relay: RelayConfig) -> Estimate:
        return self.estimate(kind, n, seed, relay, lambda g: moment_values(g, s))
