import logging
from typing import Any

from models.recipes import RunOptions, run_recipe
from models.scenario import SystemConfig
from utils.errors import AcceptanceError, error_to_state
from utils.export_utils import MISS, acceptance_rows
from utils.state_utils import safe_state_update


def figure_agent(state: Any) -> Any:
    """
    Produce every table behind one named figure recipe (or figure alias) and
    compare the values carrying a published reference against their tolerance.
    With options['strict'] a miss fails the run with exit code 4.
    """
    figure = (state.get('request') or {}).get('figure')
    logging.info(f"[FigureAgent] Running recipe '{figure}'")

    try:
        cfg = SystemConfig.from_dict(state['config'])
        options = RunOptions.from_dict(state.get('options') or {})
        tables = run_recipe(figure, cfg, options)
        logging.info(f"[FigureAgent] {len(tables)} tables produced")

        checks = acceptance_rows(tables)
        missed = [row for row in checks if row['status'] == MISS]
        report = dict(state.get('report') or {})
        report['acceptance'] = {'checked': len(checks), 'missed': len(missed), 'rows': checks}
        if missed:
            logging.warning(f"[FigureAgent] {len(missed)} of {len(checks)} reference values out of tolerance")
        if missed and (state.get('options') or {}).get('strict'):
            first = missed[0]
            raise AcceptanceError(f"{len(missed)} reference values out of tolerance; first: {first['table']} "
                                  f"at {first['x_db']:g} dB gave {first['value']} vs {first['reference']}")

        return safe_state_update(state, {
            'tables': {name: [row.to_dict() for row in rows] for name, rows in tables.items()},
            'report': report,
        }, "FigureAgent")
    except Exception as e:
        logging.error(f"[FigureAgent] Error: {e}")
        return safe_state_update(state, {'error': error_to_state(e)}, "FigureAgent")
