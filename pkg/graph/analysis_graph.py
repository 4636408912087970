from langgraph.graph import StateGraph, START, END

from agents.config_agent import config_agent
from agents.scenario_agent import scenario_agent
from agents.curve_agent import curve_agent
from agents.montecarlo_agent import montecarlo_agent
from agents.figure_agent import figure_agent
from agents.selfcheck_agent import selfcheck_agent
from agents.calibrate_agent import calibrate_agent
from agents.export_agent import export_agent

COMMAND_NODES = {
    "params": "export",
    "curve": "curve",
    "figure": "figure",
    "selfcheck": "selfcheck",
    "calibrate": "calibrate",
}


def config_node(state: dict) -> dict:
    return config_agent(state)

def scenario_node(state: dict) -> dict:
    return scenario_agent(state)

def curve_node(state: dict) -> dict:
    return curve_agent(state)

def montecarlo_node(state: dict) -> dict:
    return montecarlo_agent(state)

def figure_node(state: dict) -> dict:
    return figure_agent(state)

def selfcheck_node(state: dict) -> dict:
    return selfcheck_agent(state)

def calibrate_node(state: dict) -> dict:
    return calibrate_agent(state)

def export_node(state: dict) -> dict:
    return export_agent(state)


def build_analysis_app():
    graph = StateGraph(dict)
    graph.add_node("config", config_node)
    graph.add_node("scenario", scenario_node)
    graph.add_node("curve", curve_node)
    graph.add_node("montecarlo", montecarlo_node)
    graph.add_node("figure", figure_node)
    graph.add_node("selfcheck", selfcheck_node)
    graph.add_node("calibrate", calibrate_node)
    graph.add_node("export", export_node)

    graph.add_edge(START, "config")

    # A failed step goes straight to export, which reports it
    def unless_error(next_node):
        def branch(state):
            return "export" if state.get("error") else next_node
        return branch

    def command_branch(state):
        if state.get("error"):
            return "export"
        return COMMAND_NODES.get(state.get("command"), "export")

    graph.add_conditional_edges("config", unless_error("scenario"), ["scenario", "export"])
    graph.add_conditional_edges("scenario", command_branch, sorted(set(COMMAND_NODES.values())))
    graph.add_conditional_edges("curve", unless_error("montecarlo"), ["montecarlo", "export"])
    graph.add_edge("montecarlo", "export")
    graph.add_edge("figure", "export")
    graph.add_edge("selfcheck", "export")
    graph.add_edge("calibrate", "export")
    graph.add_edge("export", END)

    return graph.compile()

# For direct import
analysis_app = build_analysis_app()
