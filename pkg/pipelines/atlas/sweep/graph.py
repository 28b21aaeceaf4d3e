from __future__ import annotations

import re
import traceback
from typing import Any, Dict, List, Optional, Tuple

from langgraph.graph import StateGraph, END

from atlas.constellation import hamming_matrix
from atlas.curvature import curvature_metric
from atlas.error_engine import Target, metric_for, parse_target
from atlas.errors import UsageError
from pipelines.atlas.outputs import resolve_constellation, run_dir, write_csv, write_json
from pipelines.atlas.state import RunConfig, SweepState
from utils.logger import get_logger

logger = get_logger(__name__)

RATE_COLUMNS = ["gamma_or_pn", "axis", "metric", "mean", "std_err", "samples", "seed", "hits", "note"]
CURVATURE_COLUMNS = ["gamma_or_pn", "axis", "metric", "value", "std_err", "samples", "seed", "verdict"]


def metric_filename(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_") + ".csv"


def _rate_rows(config: RunConfig, c, name: str, target: Target) -> List[Tuple[Any, ...]]:
    metric = metric_for(c, target, config.axis)
    rows = []
    for value in config.grid():
        est = metric(value, config.samples, config.seed)
        rows.append(
            (value, config.axis, name, est.mean, est.std_err, est.samples, est.seed, est.hits, est.note)
        )
    return rows


def _curvature_rows(config: RunConfig, c, name: str, target: Target) -> List[Tuple[Any, ...]]:
    metric = curvature_metric(c, target, config.axis)
    rows = []
    for value in config.grid():
        est = metric(value, config.samples, config.seed)
        rows.append((value, config.axis, name, est.value, est.std_err, est.samples, est.seed, est.sign))
    return rows


# -----------------------------
# Nodes
# -----------------------------
def init_state(state: SweepState) -> SweepState:
    config = state["config"]
    c = resolve_constellation(config)

    for name, target, _ in config.targets():
        if target.kind == "ber":
            hamming_matrix(c)
        for idx in (target.i, target.j):
            if idx is not None and not 0 <= idx < c.size:
                raise UsageError(f"metric {name}: index {idx} outside 0..{c.size - 1}")

    state["constellation"] = c
    state.setdefault("metric_names", list(config.metrics))
    state.setdefault("idx", 0)
    state.setdefault("results", [])
    state.setdefault("files", [])
    state["current_metric"] = None
    return state


def pick_next_metric(state: SweepState) -> SweepState:
    idx = int(state.get("idx", 0))
    names = state.get("metric_names") or []
    state["current_metric"] = names[idx] if idx < len(names) else None
    return state


def run_current_metric(state: SweepState) -> SweepState:
    name = state.get("current_metric")
    if not name:
        return state

    config = state["config"]
    c = state["constellation"]
    curvature = name.startswith("d2:")
    try:
        target = parse_target(name[3:] if curvature else name)
    except UsageError as e:
        state["results"].append({"metric": name, "status": "skipped", "reason": str(e)})
        state["idx"] = int(state.get("idx", 0)) + 1
        return state

    try:
        logger.info(f"[sweep:{name}] {len(config.grid())} grid points on {config.axis}")
        if curvature:
            rows, columns = _curvature_rows(config, c, name, target), CURVATURE_COLUMNS
        else:
            rows, columns = _rate_rows(config, c, name, target), RATE_COLUMNS
        path = write_csv(run_dir(config) / metric_filename(name), columns, rows, config)
        state["files"].append(str(path))
        state["results"].append({"metric": name, "status": "ran", "file": path.name, "points": len(rows)})
    except Exception as e:
        logger.warning(f"[sweep:{name}] failed: {e}\n{traceback.format_exc()}")
        state["results"].append({"metric": name, "status": "failed", "error": str(e)})

    state["idx"] = int(state.get("idx", 0)) + 1
    return state


def should_continue(state: SweepState) -> str:
    idx = int(state.get("idx", 0))
    names = state.get("metric_names") or []
    return "continue" if idx < len(names) else "done"


def write_summary(state: SweepState) -> SweepState:
    config = state["config"]
    path = write_json(
        run_dir(config) / "summary.json",
        {
            "command": "sweep",
            "constellation": state["constellation"].name,
            "grid": config.grid(),
            "results": state["results"],
        },
        config,
    )
    state["files"].append(str(path))
    return state


# -----------------------------
# Build graph
# -----------------------------
def build_graph():
    g = StateGraph(SweepState)

    g.add_node("init", init_state)
    g.add_node("pick_next", pick_next_metric)
    g.add_node("run_metric", run_current_metric)
    g.add_node("write_summary", write_summary)

    g.set_entry_point("init")
    g.add_edge("init", "pick_next")
    g.add_edge("pick_next", "run_metric")

    g.add_conditional_edges(
        "run_metric",
        should_continue,
        {
            "continue": "pick_next",
            "done": "write_summary",
        },
    )
    g.add_edge("write_summary", END)

    return g.compile()


def save_graph_diagram(path: str = "sweep_graph.mmd") -> None:
    graph = build_graph()
    mermaid = graph.get_graph().draw_mermaid()
    with open(path, "w", encoding="utf-8") as f:
        f.write(mermaid)

    logger.info(f"[sweep] wrote graph mermaid to {path}")


def run(config: RunConfig, metric_names: Optional[List[str]] = None) -> Dict[str, Any]:
    graph = build_graph()
    names = list(config.metrics) if metric_names is None else metric_names

    initial: SweepState = {"config": config, "metric_names": names}

    logger.info("[sweep] Begin sweep (LangGraph)")
    out: SweepState = graph.invoke(initial, config={"recursion_limit": 20 + 4 * len(names)})
    logger.info("[sweep] End sweep (LangGraph)")

    return {
        "command": "sweep",
        "results": out["results"],
        "files": out["files"],
        "ok": all(r["status"] == "ran" for r in out["results"]),
    }
