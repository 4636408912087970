import logging
from typing import Any

from models import e2e
from models.e2e import RelayConfig
from models.montecarlo import ChannelSimulator
from models.recipes import RunOptions, snr_grid
from models.scenario import LinkOneParams, LinkTwoParams, SystemConfig
from utils.errors import error_to_state
from utils.export_utils import DISAGREE, CurvePoint
from utils.state_utils import safe_state_update

DEFAULT_SAMPLES = 10 ** 5


def calibrate_agent(state: Any) -> Any:
    """
    Fit the relay gain C so the closed-form end-to-end outage tracks a simulated
    run of the same scenario over the SNR grid.
    """
    logging.info("[CalibrateAgent] Fitting relay gain against simulated outage")

    try:
        cfg = SystemConfig.from_dict(state['config'])
        p1 = LinkOneParams.from_dict(state['link_one'])
        p2 = LinkTwoParams.from_dict(state['link_two'])
        options = RunOptions.from_dict(state.get('options') or {})
        samples = options.samples or DEFAULT_SAMPLES
        simulator = ChannelSimulator(p1, p2, workers=options.workers, progress=options.progress)

        grid = snr_grid(*options.grid)
        estimates = []
        for index, x_db in enumerate(grid):
            relay = RelayConfig.locked(cfg.relay_gain, 10.0 ** (x_db / 10.0))
            estimates.append(simulator.estimate_op("e2e", cfg.gamma_th, samples, options.seed + index, relay))

        gain, mse = e2e.calibrate_relay_gain(p1, p2, cfg.gamma_th, [10.0 ** (x / 10.0) for x in grid],
                                             [est.mean for est in estimates])
        rows = []
        for x_db, est in zip(grid, estimates):
            analytic = e2e.e2e_cdf(cfg.gamma_th, p1, p2, RelayConfig.locked(gain, 10.0 ** (x_db / 10.0)))
            meta = {"c": format(gain, ".6g"), "mc_n": str(est.n)}
            if not est.contains(analytic):
                meta["flag"] = DISAGREE
            rows.append(CurvePoint(x_db=x_db, analytic=analytic, mc_mean=est.mean, mc_ci_low=est.ci_low,
                                   mc_ci_high=est.ci_high, meta=meta).to_dict())

        report = dict(state.get('report') or {})
        report['calibration'] = {"relay_gain": gain, "mse_log10": mse, "samples": samples,
                                 "simulated_with": cfg.relay_gain}
        return safe_state_update(state, {'tables': {"calibrate_e2e_op": rows}, 'report': report},
                                 "CalibrateAgent")
    except Exception as e:
        logging.error(f"[CalibrateAgent] Error: {e}")
        return safe_state_update(state, {'error': error_to_state(e)}, "CalibrateAgent")
