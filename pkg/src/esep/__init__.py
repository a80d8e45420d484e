"""Inequality constraints and causal bounds for DAGs with latent variables."""

from .bounds import (AcdeResult, BoundsPreconditionError, BoundsQuery, BoundsResult,
                     ModelFalsified, acde_bounds, bounds_report, interventional_bounds,
                     iv_acde_bounds)
from .constraints import (CheckReport, CompatibilityResult, ConditionalSlice, EsepWitness,
                          SolverFailure, build_slice, check_distribution, enumerate_witnesses,
                          instrumental_inequality_score, iv_table, strong_compatibility,
                          testable_pairs, weak_compatibility)
from .graph import (CycleError, Dag, GraphError, ancestors, descendants, induced_subgraph,
                    parse_graph, remove_incoming, remove_outgoing)
from .model import (Cpt, DiscreteModel, JointTable, ZeroConditioningEvent, condition,
                    fix_conditioning, interventional_query, intervene, joint, marginalize,
                    observed_margin, parse_table)
from .separation import (SeparationQuery, SeparationVerdict, d_separated,
                         d_separated_bruteforce, e_separated, e_separated_star)

__version__ = "0.1.0"
