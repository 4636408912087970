import logging
from typing import Any, Dict, List

from models.e2e import diversity_order
from models.scenario import SystemConfig, assemble, distances
from utils.errors import error_to_state
from utils.state_utils import safe_state_update


def _parameter_rows(cfg: SystemConfig, link_one, link_two) -> List[Dict[str, Any]]:
    geometry = distances(cfg)
    rows = [
        ("geometry", "d_OH [m]", geometry.d_oh),
        ("geometry", "d_HI [m]", geometry.d_hi),
        ("geometry", "d_IU [m]", geometry.d_iu),
        ("hop1", "alpha", link_one.gg.alpha),
        ("hop1", "beta", link_one.gg.beta),
        ("hop1", "sigma_B^2", link_one.sigma_b2),
        ("hop1", "eta_s^2", link_one.eta_s2),
        ("hop1", "A01", link_one.a01),
        ("hop1", "h_p1", link_one.h_p1),
        ("hop2", "alpha", link_two.gg.alpha),
        ("hop2", "beta", link_two.gg.beta),
        ("hop2", "sigma_B^2", link_two.sigma_b2),
        ("hop2", "varpi", link_two.varpi),
        ("hop2", "q_g", link_two.q_g),
        ("hop2", "A02", link_two.a02),
        ("hop2", "N", link_two.norm_n),
        ("hop2", "N_k", link_two.n_k),
        ("hop2", "h_p2", link_two.h_p2),
    ]
    return [{"group": g, "name": n, "value": v} for g, n, v in rows]


def scenario_agent(state: Any) -> Any:
    """
    Assemble both per-hop parameter bundles from the loaded configuration.
    """
    logging.info("[ScenarioAgent] Assembling link parameters")

    try:
        cfg = SystemConfig.from_dict(state['config'])
        link_one, link_two = assemble(cfg)
        diversity = diversity_order(link_one, link_two)
        report = dict(state.get('report') or {})
        report['parameters'] = _parameter_rows(cfg, link_one, link_two)
        report['diversity'] = {"order": diversity.order, "limited_by": diversity.label}
        logging.info(f"[ScenarioAgent] diversity order {diversity.order:.4g} ({diversity.label})")
        return safe_state_update(state, {
            'link_one': link_one.to_dict(),
            'link_two': link_two.to_dict(),
            'report': report,
        }, "ScenarioAgent")
    except Exception as e:
        logging.error(f"[ScenarioAgent] Error: {e}")
        return safe_state_update(state, {'error': error_to_state(e)}, "ScenarioAgent")
