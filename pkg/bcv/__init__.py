"""
Bipartite cross-validation: joint selection of the community counts on both
sides of a bipartite stochastic block model.
"""

from bcv.errors import BcvError
from bcv.graph_core import BipartiteGraph, LabelVector, SbmSpec, generate_sbm
from bcv.selection import SelectionResult, select

__version__ = "0.1.0"

__all__ = [
    "BcvError",
    "BipartiteGraph",
    "LabelVector",
    "SbmSpec",
    "SelectionResult",
    "generate_sbm",
    "select",
    "__version__",
]
