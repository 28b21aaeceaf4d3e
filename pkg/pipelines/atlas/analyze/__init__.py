"""
Constellation analysis pipeline (LangGraph).

Public API:
- run(config)
- build_graph()
- save_graph_diagram(path)
"""

from .graph import build_graph, run, save_graph_diagram

__all__ = ["build_graph", "run", "save_graph_diagram"]
