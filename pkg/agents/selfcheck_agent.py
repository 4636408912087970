import logging
import math
from typing import Any, Callable, Dict, List, Tuple

import numpy as np
from scipy.integrate import quad

from models import e2e, link_hap_user, link_ogs_hap
from models.e2e import RelayConfig
from models.montecarlo import ChannelSimulator, verify_hg2_identities
from models.scenario import LinkOneParams, LinkTwoParams, SystemConfig
from utils.errors import SelfCheckError, error_to_state
from utils.specfun import FoxHSpec, bessel_k, erf, erfc, gamma_fn, meijer_g, upper_incomplete_gamma
from utils.state_utils import safe_state_update

SMOKE_SAMPLES = 10 ** 6
SMOKE_SNR_DB = 20.0
SMOKE_SIGMAS = 4.0

Check = Tuple[str, Callable[[], Tuple[bool, str]]]


def _relative(value: float, expected: float) -> float:
    return abs(value - expected) / abs(expected)


def _within(value: float, expected: float, tol: float) -> Tuple[bool, str]:
    err = _relative(value, expected)
    return err <= tol, f"rel. error {err:.2e} (tol {tol:g})"


def _identity_checks() -> List[Check]:
    x = np.array([0.05, 0.5, 1.3, 4.0])
    return [
        ("gamma function", lambda: _within(gamma_fn(5.0) + gamma_fn(0.5), 24.0 + math.sqrt(math.pi), 1e-9)),
        ("Bessel K half order", lambda: _within(float(bessel_k(0.5, 1.3)),
                                                math.sqrt(math.pi / 2.6) * math.exp(-1.3), 1e-9)),
        ("erf + erfc", lambda: (bool(np.all(np.abs(erf(x) + erfc(x) - 1.0) < 1e-9)), "grid of 4 points")),
        ("incomplete gamma", lambda: _within(float(upper_incomplete_gamma(1.0, 2.5)), math.exp(-2.5), 1e-9)),
        ("Meijer G exponential", lambda: _within(meijer_g(FoxHSpec.meijer(1, 0, [], [0.0]), 0.7),
                                                 math.exp(-0.7), 1e-7)),
    ]


def _link_checks(cfg: SystemConfig, p1: LinkOneParams, p2: LinkTwoParams) -> List[Check]:
    gamma_bar = 10.0 ** (SMOKE_SNR_DB / 10.0)
    gamma_th = cfg.gamma_th

    def hop_one_methods():
        split = link_ogs_hap.snr_cdf(gamma_th, p1, gamma_bar, method="split")
        direct = link_ogs_hap.snr_cdf(gamma_th, p1, gamma_bar, method="direct")
        return _within(split, direct, 1e-5)

    def hop_two_methods():
        split = link_hap_user.snr_cdf(gamma_th, p2, gamma_bar, method="split")
        direct = link_hap_user.snr_cdf(gamma_th, p2, gamma_bar, method="direct")
        return _within(split, direct, 1e-5)

    def gml_normalization():
        # h = A02 exp(-t)
        mass, _ = quad(lambda t: link_hap_user.gml_pdf_approx(p2.a02 * math.exp(-t), p2) * p2.a02 * math.exp(-t),
                       0.0, 700.0, points=(1.0, 10.0, 50.0), limit=200, epsabs=1e-12, epsrel=1e-10)
        return abs(mass - 1.0) <= 1e-6, f"mass {mass:.10f}"

    def zeroth_moment():
        value = link_hap_user.moment(0.0, p2, gamma_bar)
        return abs(value - 1.0) <= 1e-4, f"E[gamma^0] = {value:.8f}"

    def sampling_identities():
        worst = verify_hg2_identities(p2)
        return True, f"rel. error {worst:.2e}"

    def e2e_monotone():
        relay = RelayConfig.locked(cfg.relay_gain, gamma_bar)
        values = [e2e.e2e_cdf(g, p1, p2, relay) for g in np.logspace(-1, 3, 9)]
        ok = all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
        return ok, f"{len(values)} thresholds"

    return [
        ("hop-1 CDF split vs direct", hop_one_methods),
        ("hop-2 CDF split vs direct", hop_two_methods),
        ("GML series normalization", gml_normalization),
        ("hop-2 zeroth moment", zeroth_moment),
        ("GML sampling identities", sampling_identities),
        ("end-to-end CDF monotone", e2e_monotone),
    ]


def _smoke_checks(cfg: SystemConfig, p1: LinkOneParams, p2: LinkTwoParams, samples: int, seed: int) -> List[Check]:
    relay = RelayConfig.locked(cfg.relay_gain, 10.0 ** (SMOKE_SNR_DB / 10.0))
    simulator = ChannelSimulator(p1, p2)

    def compare(kind: str, analytic: float) -> Tuple[bool, str]:
        est = simulator.estimate_op(kind, cfg.gamma_th, samples, seed, relay)
        gap = abs(analytic - est.mean)
        ok = gap <= SMOKE_SIGMAS * est.std_error if est.std_error > 0 else est.contains(analytic)
        return ok, f"analytic {analytic:.4e} vs MC {est.mean:.4e} +/- {est.std_error:.1e}"

    return [
        ("hop-2 outage vs MC", lambda: compare("hop2", link_hap_user.outage_probability(
            cfg.gamma_th, p2, relay.gamma_bar_2))),
        ("end-to-end outage vs MC", lambda: compare("e2e", e2e.e2e_cdf(cfg.gamma_th, p1, p2, relay))),
    ]


def run_checks(checks: List[Check]) -> List[Dict[str, Any]]:
    results = []
    for name, check in checks:
        try:
            passed, detail = check()
        except Exception as e:
            passed, detail = False, f"{type(e).__name__}: {e}"
        level = logging.info if passed else logging.error
        level(f"[SelfCheckAgent] {'PASS' if passed else 'FAIL'} {name}: {detail}")
        results.append({"name": name, "passed": bool(passed), "detail": detail})
    return results


def selfcheck_agent(state: Any) -> Any:
    """
    Identity suite, normalization checks, cross-method agreement and a Monte Carlo
    smoke comparison. Any failure is recorded as a SelfCheckError naming the checks.
    """
    logging.info("[SelfCheckAgent] Running self checks")

    try:
        cfg = SystemConfig.from_dict(state['config'])
        p1 = LinkOneParams.from_dict(state['link_one'])
        p2 = LinkTwoParams.from_dict(state['link_two'])
        options = state.get('options') or {}
        samples = int(options.get('samples') or SMOKE_SAMPLES)
        seed = int(options.get('seed') or 0)

        checks = _identity_checks() + _link_checks(cfg, p1, p2) + _smoke_checks(cfg, p1, p2, samples, seed)
        results = run_checks(checks)
        breakdown = e2e.asymptotic_cdf_breakdown(cfg.gamma_th, p1, p2, RelayConfig.locked(cfg.relay_gain, 1e6))

        report = dict(state.get('report') or {})
        report['selfcheck'] = results
        report['perturbations'] = list(breakdown.notes)
        updates: Dict[str, Any] = {'report': report}
        failed = [r["name"] for r in results if not r["passed"]]
        if failed:
            updates['error'] = error_to_state(SelfCheckError(f"self checks failed: {', '.join(failed)}"))
        else:
            logging.info(f"[SelfCheckAgent] all {len(results)} checks passed")
        return safe_state_update(state, updates, "SelfCheckAgent")
    except Exception as e:
        logging.error(f"[SelfCheckAgent] Error: {e}")
        return safe_state_update(state, {'error': error_to_state(e)}, "SelfCheckAgent")
