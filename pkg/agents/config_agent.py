import logging
from typing import Any

from utils.config_utils import load_config
from utils.errors import error_to_state
from utils.state_utils import safe_state_update


def config_agent(state: Any) -> Any:
    """
    Load the scenario file (or the reference defaults) and apply the CLI overrides.
    """
    config_path = state.get('config_path')
    logging.info(f"[ConfigAgent] Loading configuration from {config_path or 'reference defaults'}")

    try:
        cfg = load_config(config_path, state.get('overrides') or {})
        logging.info(f"[ConfigAgent] zeta_1={cfg.zeta_1:.4f} rad, n_k={cfg.n_k}, r=({cfg.r1}, {cfg.r2}), "
                     f"C={cfg.relay_gain:g}")
        return safe_state_update(state, {'config': cfg.to_dict()}, "ConfigAgent")
    except Exception as e:
        logging.error(f"[ConfigAgent] Error: {e}")
        return safe_state_update(state, {'error': error_to_state(e)}, "ConfigAgent")
