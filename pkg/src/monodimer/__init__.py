"""Monomer-dimer Markov chains with exact verification of transport-flow bounds."""

from .graph import (DiffComponent, Graph, GraphError, boundary, component_containing,
                    inclusive_boundary, inclusive_boundary_of_vertex, is_matching, read_graph,
                    symmetric_difference_components, write_graph)
from .model import (ExactDistribution, FeasibilityError, ModelError, MonomerDimerModel,
                    OversizeError, Pinning, enumerate_matchings, free_support_edges, marginal,
                    marginal_lower_bound_check, pin)
from .chains import (ChainSpec, TransitionKernel, glauber_step, js_propose, js_step, simulate,
                     transition_kernel)

__version__ = "0.1.0"
