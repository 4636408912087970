import logging
from typing import Any

from utils.errors import error_to_state
from utils.export_utils import CurvePoint, disagreement_count, params_dump, to_csv, to_json, write_tables
from utils.state_utils import safe_state_update


def export_agent(state: Any) -> Any:
    """
    Final step: writes the curve tables (to --out, or renders them for stdout),
    dumps the link parameters for `params`, counts DISAGREE flags and settles
    the process exit code.
    """
    logging.info("[ExportAgent] Exporting curve tables")

    error = state.get('error')
    if error:
        logging.warning(f"[ExportAgent] Run ended with {error.get('kind')}: {error.get('message')}")

    try:
        options = state.get('options') or {}
        fmt = options.get('format') or 'csv'
        out_dir = options.get('out')
        tables = {name: [CurvePoint.from_dict(row) for row in rows]
                  for name, rows in (state.get('tables') or {}).items()}

        report = dict(state.get('report') or {})
        report['tables'] = {name: len(rows) for name, rows in tables.items()}
        report['disagreements'] = disagreement_count(tables)
        updates = {'report': report, 'exit_code': int(error['exit_code']) if error else 0}

        # no partial output from a failed run
        if error:
            tables = {}
        if tables and out_dir:
            updates['written'] = write_tables(tables, out_dir, fmt)
        elif tables:
            render = to_csv if fmt == 'csv' else to_json
            updates['rendered'] = {name: render(rows) for name, rows in sorted(tables.items())}
        elif state.get('command') == 'params' and not error:
            updates['rendered'] = {'params': params_dump(state['link_one'], state['link_two'],
                                                         'json' if fmt == 'json' else 'text')}
        if report['disagreements']:
            logging.warning(f"[ExportAgent] {report['disagreements']} rows flagged DISAGREE")
        return safe_state_update(state, updates, "ExportAgent")

    except Exception as e:
        logging.error(f"[ExportAgent] Error: {e}")
        return safe_state_update(state, {
            'error': error_to_state(e),
            'exit_code': 1,
        }, "ExportAgent")
