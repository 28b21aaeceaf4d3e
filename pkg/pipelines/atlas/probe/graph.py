from __future__ import annotations

from typing import Any, Dict

from langgraph.graph import StateGraph, END

from atlas.constellation import random_spherical
from atlas.convexity_analysis import (
    chi_square_floor,
    chi_square_floor_exact,
    conjecture_probe,
    jensen_probe,
    sphere_hardening_report,
)
from atlas.error_engine import parse_target
from atlas.errors import UsageError
from pipelines.atlas.outputs import resolve_constellation, run_dir, write_csv, write_json
from pipelines.atlas.state import PROBES, ProbeState, RunConfig
from utils.logger import get_logger

logger = get_logger(__name__)

CURVATURE_COLUMNS = ["metric", "gamma_or_pn", "axis", "value", "std_err", "verdict"]


def _code(config: RunConfig):
    """Explicit constellation if given, else a random spherical code from --M/--n."""
    if config.builtin or config.file:
        return resolve_constellation(config)
    if config.n is None or config.M is None:
        raise UsageError(f"probe {config.probe} needs --builtin/--file or both --n and --M")
    return random_spherical(config.M, config.n, config.code_seed)


# -----------------------------
# Nodes
# -----------------------------
def init_state(state: ProbeState) -> ProbeState:
    config = state["config"]
    if config.probe == "chi2":
        if config.n is None or config.n < 1:
            raise UsageError("probe chi2 needs --n >= 1")
        state["constellation"] = None
    elif config.probe == "jensen":
        if config.a is None or config.b is None:
            raise UsageError("probe jensen needs --a and --b")
        state["constellation"] = resolve_constellation(config)
    elif config.probe == "sphere":
        if config.noise_power is None:
            raise UsageError("probe sphere needs --noise-power")
        state["constellation"] = _code(config)
    else:
        state["constellation"] = _code(config)

    state.setdefault("files", [])
    state.setdefault("errors", {})
    return state


def route(state: ProbeState) -> str:
    return state["config"].probe


def run_conjecture(state: ProbeState) -> ProbeState:
    config = state["config"]
    code = state["constellation"]
    # an explicit grid is used as given; conjecture_probe refuses points below γ0
    grid = config.grid() if config.grid_given else None

    report = conjecture_probe(
        code,
        gamma0=config.gamma0,
        grid=grid,
        samples=config.samples,
        seed=config.seed,
        target=config.target_rate,
    )
    state["report"] = {"probe": "conjecture", **report.to_dict()}

    rows = []
    for metric, scan in report.reports.items():
        for est in scan.estimates:
            rows.append((metric, est.at, est.axis, est.value, est.std_err, est.sign))
    if rows:
        path = write_csv(run_dir(config) / "conjecture_curvature.csv", CURVATURE_COLUMNS, rows, config)
        state["files"].append(str(path))
    return state


def run_chi2(state: ProbeState) -> ProbeState:
    config = state["config"]
    est = chi_square_floor(config.n, config.samples, config.seed)
    state["report"] = {
        "probe": "chi2",
        "n": config.n,
        "estimate": est.to_dict(),
        "exact": chi_square_floor_exact(config.n),
    }
    return state


def run_jensen(state: ProbeState) -> ProbeState:
    config = state["config"]
    name = config.metrics[0]
    report = jensen_probe(
        state["constellation"],
        parse_target(name),
        config.axis,
        config.a,
        config.b,
        config.lam,
        config.samples,
        config.seed,
    )
    state["report"] = {"probe": "jensen", **report.to_dict()}
    return state


def run_sphere(state: ProbeState) -> ProbeState:
    config = state["config"]
    report = sphere_hardening_report(state["constellation"], config.noise_power, config.eps)
    state["report"] = {"probe": "sphere", **report.to_dict()}
    return state


def write_report(state: ProbeState) -> ProbeState:
    config = state["config"]
    path = write_json(run_dir(config) / "summary.json", state["report"], config)
    state["files"].append(str(path))
    return state


# -----------------------------
# Build graph
# -----------------------------
PROBE_NODES = {
    "conjecture": run_conjecture,
    "chi2": run_chi2,
    "jensen": run_jensen,
    "sphere": run_sphere,
}


def build_graph():
    g = StateGraph(ProbeState)

    g.add_node("init", init_state)
    for kind in PROBES:
        g.add_node(f"run_{kind}", PROBE_NODES[kind])
        g.add_edge(f"run_{kind}", "write")
    g.add_node("write", write_report)

    g.set_entry_point("init")
    g.add_conditional_edges("init", route, {kind: f"run_{kind}" for kind in PROBES})
    g.add_edge("write", END)

    return g.compile()


def save_graph_diagram(path: str = "probe_graph.mmd") -> None:
    graph = build_graph()
    mermaid = graph.get_graph().draw_mermaid()
    with open(path, "w", encoding="utf-8") as f:
        f.write(mermaid)

    logger.info(f"[probe] wrote graph mermaid to {path}")


def run(config: RunConfig) -> Dict[str, Any]:
    graph = build_graph()

    logger.info(f"[probe] Begin probe {config.probe} (LangGraph)")
    out: ProbeState = graph.invoke({"config": config}, config={"recursion_limit": 20})
    logger.info(f"[probe] End probe {config.probe} (LangGraph)")

    return {"command": "probe", "report": out["report"], "files": out["files"]}
