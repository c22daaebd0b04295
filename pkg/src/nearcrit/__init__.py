"""Random graphs with a given degree sequence near the critical point.

Submodules:

* ``degree_model``: degree sequences, offspring laws and their moments
* ``gw_survival``: Galton-Watson survival probabilities
* ``config_model``: configuration-model sampling and component statistics
* ``exploration``: the continuous-time exploration process
* ``theory``: closed-form giant-size and complexity predictions
* ``experiments``: replicated batch runs and summaries
"""

__version__ = "0.1.0"

from .config_model import components, pair_half_edges, sample_simple
from .degree_model import DegreeSequence, OffspringDistribution, size_biased, stats
from .errors import NearcritError
from .gw_survival import solve_rho

__all__ = [
    "DegreeSequence",
    "NearcritError",
    "OffspringDistribution",
    "__version__",
    "components",
    "pair_half_edges",
    "sample_simple",
    "size_biased",
    "solve_rho",
    "stats",
]
