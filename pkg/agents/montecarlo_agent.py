import logging
from typing import Any

from models.link_hap_user import ModulationScheme
from models.recipes import RunOptions, attach_monte_carlo
from models.scenario import SystemConfig
from utils.errors import error_to_state
from utils.export_utils import CurvePoint, disagreement_count
from utils.state_utils import safe_state_update


def montecarlo_agent(state: Any) -> Any:
    """
    Attach simulated twins (mean and 99% interval) to every analytic row of the
    curve tables; rows whose closed form falls outside are flagged.
    """
    options = RunOptions.from_dict(state.get('options') or {})
    if options.samples < 1:
        logging.info("[MonteCarloAgent] No samples requested, skipping simulation")
        return safe_state_update(state, {}, "MonteCarloAgent")

    request = state.get('request') or {}
    logging.info(f"[MonteCarloAgent] {options.samples} samples per point, seed {options.seed}")

    try:
        cfg = SystemConfig.from_dict(state['config'])
        modulation = ModulationScheme.from_name(request['modulation']) if request.get('modulation') else None
        tables = {}
        for name, raw_rows in state['tables'].items():
            rows = [CurvePoint.from_dict(row) for row in raw_rows]
            attach_monte_carlo(rows, cfg, request['metric'], request['scope'], options, modulation,
                               float(request.get('s', 1.0)))
            tables[name] = rows
        flagged = disagreement_count(tables)
        if flagged:
            logging.warning(f"[MonteCarloAgent] {flagged} rows disagree with their simulated twin")
        return safe_state_update(state, {
            'tables': {name: [row.to_dict() for row in rows] for name, rows in tables.items()},
        }, "MonteCarloAgent")
    except Exception as e:
        logging.error(f"[MonteCarloAgent] Error: {e}")
        return safe_state_update(state, {'error': error_to_state(e)}, "MonteCarloAgent")
