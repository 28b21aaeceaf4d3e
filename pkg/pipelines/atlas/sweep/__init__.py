"""
Error-rate and curvature sweep pipeline (LangGraph).

Public API:
- run(config, metric_names=None)
- build_graph()
- save_graph_diagram(path)
"""

from .graph import build_graph, run, save_graph_diagram

__all__ = ["build_graph", "run", "save_graph_diagram"]
