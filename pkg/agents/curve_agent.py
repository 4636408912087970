import dataclasses
import logging
from typing import Any

from models.link_hap_user import ModulationScheme
from models.recipes import RunOptions, curve
from models.scenario import SystemConfig
from utils.errors import error_to_state
from utils.state_utils import safe_state_update


def curve_table_name(request: dict) -> str:
    name = f"{request['metric']}_{request['scope']}"
    if request.get('modulation'):
        name += f"_{request['modulation']}"
    return name


def curve_agent(state: Any) -> Any:
    """
    Closed-form sweep over the SNR grid. The Monte Carlo twins are filled in by
    the montecarlo step, so the sweep itself always runs with zero samples.
    """
    request = state.get('request') or {}
    logging.info(f"[CurveAgent] Sweeping {request.get('metric')} over {request.get('scope')}")

    try:
        cfg = SystemConfig.from_dict(state['config'])
        options = dataclasses.replace(RunOptions.from_dict(state.get('options') or {}), samples=0)
        modulation = ModulationScheme.from_name(request['modulation']) if request.get('modulation') else None
        rows = curve(cfg, request['metric'], request['scope'], options, modulation, float(request.get('s', 1.0)))
        logging.info(f"[CurveAgent] {len(rows)} rows computed")
        tables = {curve_table_name(request): [row.to_dict() for row in rows]}
        return safe_state_update(state, {'tables': tables}, "CurveAgent")
    except Exception as e:
        logging.error(f"[CurveAgent] Error: {e}")
        return safe_state_update(state, {'error': error_to_state(e)}, "CurveAgent")
