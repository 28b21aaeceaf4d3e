from __future__ import annotations

import math
from typing import Any, Dict, List

from langgraph.graph import StateGraph, END

from atlas.convexity_analysis import ThresholdSet, theorem_intervals, thresholds
from atlas.error_engine import Target
from pipelines.atlas.outputs import (
    resolve_constellation,
    run_dir,
    write_csv,
    write_json,
    write_text,
)
from pipelines.atlas.state import AnalyzeState, RunConfig
from utils.logger import get_logger

logger = get_logger(__name__)

GEOMETRY_COLUMNS = ["index", "d_min", "d_max", "bounded"]
AXIS_LABEL = {"snr": "SNR γ", "noise_power": "noise power P_N"}
RULE_KEY = [
    "rules are named scope.axis.regime and print the distance formula that sets their threshold:",
    "  ser = whole-constellation SER, ser_i = SER of point i, pep = pairwise i->j, ber = labelled BER",
    "  high/small = convex, from the minimum distance; low/large = from the maximum distance",
    "  (concave for a single point, convex for a pair; printed claim = reported, not certified)",
    "  low-dim = SER convex in SNR everywhere for n <= 2",
]


def _summary_lines(ts: ThresholdSet) -> List[str]:
    c = ts.constellation
    lines = [
        f"constellation {c.name}: M={c.size} n={c.dim} d_min={ts.d_min:.6g}",
        f"bounded regions: {sum(e.bounded for e in ts.extents)}/{c.size}",
        "",
    ]
    lines += RULE_KEY + [""]

    targets = [Target("ser")]
    if c.labels is not None:
        targets.append(Target("ber"))

    for axis in ("snr", "noise_power"):
        lines.append(f"== {AXIS_LABEL[axis]} ==")
        for target in targets:
            for rule in ts.rules(target, axis):
                lines.append(f"  {rule.describe()}")
            for iv in theorem_intervals(c, target, axis, ts):
                hi = "inf" if math.isinf(iv.hi) else f"{iv.hi:.6g}"
                rule = f" [{iv.rule}]" if iv.rule else ""
                lines.append(f"  {target}: ({iv.lo:.6g}, {hi}) {iv.verdict}{rule}")
        for pt in ts.points:
            rules = (pt.snr_high, pt.snr_low) if axis == "snr" else (pt.noise_small, pt.noise_large)
            for rule in rules:
                lines.append(f"  point {pt.index}: {rule.describe()}")
        lines.append("")
    return lines


# -----------------------------
# Nodes
# -----------------------------
def init_state(state: AnalyzeState) -> AnalyzeState:
    config = state["config"]
    state["constellation"] = resolve_constellation(config)
    state.setdefault("files", [])
    return state


def compute_geometry(state: AnalyzeState) -> AnalyzeState:
    c = state["constellation"]
    logger.info(f"[analyze] computing thresholds for {c.name} (M={c.size}, n={c.dim})")
    ts = thresholds(c)
    state["thresholds"] = ts
    state["geometry"] = [
        {"index": i, "d_min": e.d_min, "d_max": e.d_max, "bounded": e.bounded}
        for i, e in enumerate(ts.extents)
    ]
    state["summary_lines"] = _summary_lines(ts)
    return state


def write_outputs(state: AnalyzeState) -> AnalyzeState:
    config = state["config"]
    ts = state["thresholds"]
    out = run_dir(config)

    files = [
        write_csv(
            out / "geometry.csv",
            GEOMETRY_COLUMNS,
            ([g[k] for k in GEOMETRY_COLUMNS] for g in state["geometry"]),
            config,
        ),
        write_json(out / "thresholds.json", ts.to_dict(), config),
        write_text(out / "summary.txt", state["summary_lines"], config),
        write_json(
            out / "summary.json",
            {
                "constellation": ts.constellation.to_dict(),
                "d_min": ts.d_min,
                "ser_snr_high": ts.ser_snr_high.value,
                "ber_snr_high": ts.ber_snr_high.value,
                "ser_noise_small": ts.ser_noise_small.value,
                "ber_noise_small": ts.ber_noise_small.value,
                "geometry": state["geometry"],
                "summary": state["summary_lines"],
            },
            config,
        ),
    ]
    state["files"] = [str(f) for f in files]
    return state


# -----------------------------
# Build graph
# -----------------------------
def build_graph():
    g = StateGraph(AnalyzeState)

    g.add_node("init", init_state)
    g.add_node("geometry", compute_geometry)
    g.add_node("write", write_outputs)

    g.set_entry_point("init")
    g.add_edge("init", "geometry")
    g.add_edge("geometry", "write")
    g.add_edge("write", END)

    return g.compile()


def save_graph_diagram(path: str = "analyze_graph.mmd") -> None:
    graph = build_graph()
    mermaid = graph.get_graph().draw_mermaid()
    with open(path, "w", encoding="utf-8") as f:
        f.write(mermaid)

    logger.info(f"[analyze] wrote graph mermaid to {path}")


def run(config: RunConfig) -> Dict[str, Any]:
    graph = build_graph()

    logger.info("[analyze] Begin analyze (LangGraph)")
    out: AnalyzeState = graph.invoke({"config": config}, config={"recursion_limit": 20})
    logger.info("[analyze] End analyze (LangGraph)")

    ts = out["thresholds"]
    return {
        "command": "analyze",
        "constellation": ts.constellation.name,
        "d_min": ts.d_min,
        "ber_snr_high": ts.ber_snr_high.value,
        "files": out["files"],
    }
