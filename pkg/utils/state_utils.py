#!/usr/bin/env python3
"""
Pipeline state helpers.

Agents receive the analysis state dict and hand back a fresh copy with their
updates merged in. The state only carries JSON-ready values: configs and link
bundles travel as dicts, curve tables as lists of row dicts, so LangGraph never
sees numpy scalars or dataclass instances.
"""

import copy
import json
import logging
from typing import Any, Dict

import numpy as np

BASE_STATE = {
    "command": "params",
    "overrides": {},
    "options": {},
    "tables": {},
    "report": {},
    "written": [],
}


def to_plain(value: Any) -> Any:
    """numpy scalars/arrays and tuples -> plain Python values, recursively."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    return value


def _json_ready(state: Dict, node: str) -> Dict:
    try:
        json.dumps(state)
        return state
    except (TypeError, ValueError, OverflowError) as e:
        logging.warning(f"[{node}] Non-serializable state ({e}); stringifying offending values")
        return json.loads(json.dumps(to_plain(state), default=str))


def with_defaults(state: Any, node: str = "Unknown") -> Dict:
    """Deep copy of the state with every BASE_STATE key present."""
    if not isinstance(state, dict):
        logging.error(f"[{node}] Expected a dict state, got {type(state).__name__}")
        fresh = copy.deepcopy(BASE_STATE)
        fresh["error"] = {"kind": "StateError", "message": f"{node} received a {type(state).__name__} state",
                          "exit_code": 1}
        return fresh

    new_state = copy.deepcopy(state)
    for key, default in BASE_STATE.items():
        if new_state.get(key) is None:
            new_state[key] = copy.deepcopy(default)
    return new_state


def safe_state_update(original_state: Dict, updates: Dict, node: str) -> Dict:
    """
    Merge `updates` into a copy of `original_state`; the original is left untouched.

    Values are converted with to_plain, and the result is checked to be
    JSON-serializable before it goes back to the graph.
    """
    new_state = with_defaults(original_state, node)
    for key, value in updates.items():
        new_state[key] = to_plain(value)
    logging.debug(f"[{node}] Updated state keys: {sorted(updates)}")
    return _json_ready(new_state, node)
