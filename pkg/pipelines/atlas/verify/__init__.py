"""
Acceptance-check pipeline (LangGraph).

Public API:
- run(config, check_names=None)
- build_graph()
- save_graph_diagram(path)
- CHECKS (name -> check function)
"""

from .checks import CHECKS
from .graph import build_graph, run, save_graph_diagram

__all__ = ["CHECKS", "build_graph", "run", "save_graph_diagram"]
