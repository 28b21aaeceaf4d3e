from __future__ import annotations

import traceback
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Any, Dict, List, Optional

from langgraph.graph import StateGraph, END

from atlas.errors import UsageError
from pipelines.atlas.outputs import embedded_metadata, run_dir, write_json
from pipelines.atlas.state import RunConfig, VerifyState
from utils.logger import get_logger

from .checks import CHECKS, DEFAULT_CHECK_ORDER, CheckContext

logger = get_logger(__name__)

SUITE_NAME = "convexity-atlas"


def write_junit(path: Path, results: List[Dict[str, Any]], config: RunConfig) -> Path:
    suite = ET.Element(
        "testsuite",
        name=SUITE_NAME,
        tests=str(len(results)),
        failures=str(sum(r["status"] == "failed" for r in results)),
        errors=str(sum(r["status"] == "error" for r in results)),
    )
    properties = ET.SubElement(suite, "properties")
    for name, value in embedded_metadata(config).items():
        ET.SubElement(properties, "property", name=name, value=value)
    for r in results:
        case = ET.SubElement(suite, "testcase", classname=SUITE_NAME, name=r["check"])
        if r["status"] == "failed":
            ET.SubElement(case, "failure", message="check failed").text = "\n".join(r["details"])
        elif r["status"] == "error":
            ET.SubElement(case, "error", message=r["error"]).text = r.get("trace", "")
        ET.SubElement(case, "system-out").text = "\n".join(r.get("details", []))

    ET.indent(suite)
    path.write_text(ET.tostring(suite, encoding="unicode") + "\n", encoding="utf-8")
    logger.info(f"[verify] wrote {path}")
    return path


# -----------------------------
# Nodes
# -----------------------------
def init_state(state: VerifyState) -> VerifyState:
    config = state["config"]
    names = list(config.only) or DEFAULT_CHECK_ORDER
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise UsageError(f"unknown check(s) {unknown}; known: {DEFAULT_CHECK_ORDER}")

    state["check_names"] = names
    state.setdefault("idx", 0)
    state.setdefault("results", [])
    state.setdefault("files", [])
    state["current_check"] = None
    return state


def pick_next_check(state: VerifyState) -> VerifyState:
    idx = int(state.get("idx", 0))
    names = state.get("check_names") or []
    state["current_check"] = names[idx] if idx < len(names) else None
    return state


def run_current_check(state: VerifyState) -> VerifyState:
    name = state.get("current_check")
    if not name:
        return state

    config = state["config"]
    ctx = CheckContext(
        samples=config.samples,
        seed=config.seed,
        fixtures=(config.file,) if config.file else (),
    )

    try:
        logger.info(f"[verify:{name}] begin ({config.samples} samples, seed {config.seed})")
        passed, details = CHECKS[name](ctx)
        status = "passed" if passed else "failed"
        logger.info(f"[verify:{name}] {status}")
        state["results"].append({"check": name, "status": status, "details": details})
    except Exception as e:
        logger.warning(f"[verify:{name}] error: {e}\n{traceback.format_exc()}")
        state["results"].append(
            {
                "check": name,
                "status": "error",
                "error": str(e),
                "details": [],
                "trace": traceback.format_exc(),
            }
        )

    state["idx"] = int(state.get("idx", 0)) + 1
    return state


def should_continue(state: VerifyState) -> str:
    idx = int(state.get("idx", 0))
    names = state.get("check_names") or []
    return "continue" if idx < len(names) else "done"


def write_report(state: VerifyState) -> VerifyState:
    config = state["config"]
    out = run_dir(config)
    results = state["results"]
    state["passed"] = all(r["status"] == "passed" for r in results)

    public = [{k: v for k, v in r.items() if k != "trace"} for r in results]
    state["files"] = [
        str(write_junit(out / "junit.xml", results, config)),
        str(write_json(out / "summary.json", {"command": "verify", "passed": state["passed"], "results": public}, config)),
    ]
    return state


# -----------------------------
# Build graph
# -----------------------------
def build_graph():
    g = StateGraph(VerifyState)

    g.add_node("init", init_state)
    g.add_node("pick_next", pick_next_check)
    g.add_node("run_check", run_current_check)
    g.add_node("write_report", write_report)

    g.set_entry_point("init")
    g.add_edge("init", "pick_next")
    g.add_edge("pick_next", "run_check")

    g.add_conditional_edges(
        "run_check",
        should_continue,
        {
            "continue": "pick_next",
            "done": "write_report",
        },
    )
    g.add_edge("write_report", END)

    return g.compile()


def save_graph_diagram(path: str = "verify_graph.mmd") -> None:
    graph = build_graph()
    mermaid = graph.get_graph().draw_mermaid()
    with open(path, "w", encoding="utf-8") as f:
        f.write(mermaid)

    logger.info(f"[verify] wrote graph mermaid to {path}")


def run(config: RunConfig, check_names: Optional[List[str]] = None) -> Dict[str, Any]:
    graph = build_graph()
    if check_names is not None:
        config = RunConfig.from_dict({**config.to_dict(), "only": check_names}, out=config.out)

    logger.info("[verify] Begin verify (LangGraph)")
    out: VerifyState = graph.invoke({"config": config}, config={"recursion_limit": 20 + 4 * len(CHECKS)})
    logger.info("[verify] End verify (LangGraph)")

    return {
        "command": "verify",
        "passed": out["passed"],
        "results": [{"check": r["check"], "status": r["status"]} for r in out["results"]],
        "files": out["files"],
    }
