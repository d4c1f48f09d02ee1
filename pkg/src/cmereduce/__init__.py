"""Slow-scale reduction of chemical master equations.

A network with fast and slow reactions is explored into a finite generator
``K = K^f + K^s``; the fast part is decomposed into strong components, and the
slow dynamics between its absorbing components is the Markov generator
``K~ = L K^s Pi``.  Full and reduced systems can be integrated exactly or
simulated with the Gillespie algorithm.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .dynamics import compare_full_reduced, integrate, moment_residuals, stationary
from .faststructure import analyze, canonical_ordering, fast_components, fast_simplexes, scc_classify
from .network import (
    NetworkError,
    ParseError,
    ReactionNetwork,
    conservation_basis,
    deficiency,
    format_network,
    load_network,
    parse_network,
    structure,
)
from .reduction import (
    build_projections,
    invariant_distribution,
    lift_distribution,
    reduce_network,
    reduced_generator,
    reduced_moments,
)
from .ssa import OnTheFlyChain, PrecomputedChain, ensemble, ssa_exact, ssa_slow
from .statespace import explore, explore_fast_component

__all__ = [
    "BACKEND",
    "NetworkError",
    "OnTheFlyChain",
    "ParseError",
    "PrecomputedChain",
    "ReactionNetwork",
    "analyze",
    "build_projections",
    "canonical_ordering",
    "compare_full_reduced",
    "conservation_basis",
    "deficiency",
    "ensemble",
    "explore",
    "explore_fast_component",
    "fast_components",
    "fast_simplexes",
    "format_network",
    "integrate",
    "invariant_distribution",
    "lift_distribution",
    "load_network",
    "moment_residuals",
    "parse_network",
    "reduce_network",
    "reduced_generator",
    "reduced_moments",
    "scc_classify",
    "ssa_exact",
    "ssa_slow",
    "stationary",
    "structure",
]
