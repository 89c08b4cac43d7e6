"""Network discovery under a query budget for influence maximisation."""

__version__ = "0.1.0"

from .agent import ClaimAgent
from .deepwalk import DeepWalk
from .goal import GoalGenerator
from .graph import Graph, load_edge_list, read_edge_list
from .influence import GreedyInfluenceMaximizer

__all__ = [
    "ClaimAgent",
    "DeepWalk",
    "GoalGenerator",
    "Graph",
    "GreedyInfluenceMaximizer",
    "load_edge_list",
    "read_edge_list",
]
