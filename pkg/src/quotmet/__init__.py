"""Exact metrics on quotient and Wasserstein constructions over compact groups."""

from .metricspace import (FiniteMetricSpace, PointMap, bilipschitz_constant,
                          lipschitz_constant, power_space, product_space, scale_space)
from .transport import (DiscreteMeasure, coupling_feasibility_error, ivanov_embed,
                        perm_quotient_distance, solve_assignment, w2_discrete)
from .groups import (SU2, CompactGroup, OffManifoldError, ProductGroup, ScaledGroup,
                     Torus, budget_net, circle, group_from_dict, scaled)
from .quotients import (EuclideanIsometry, FiniteIsometryGroup, LatticeShiftAction,
                        compactified_distance, diagonal_canonical,
                        diagonal_quotient_distance, euclidean_quotient_distance,
                        full_symmetric_group, permutation_group)
from .tower import (AtomCapError, LiftedMeasure, PipelineReport, TowerConfig,
                    build_tower, delta_measure, embed_measure, fold_atom,
                    lift_measure, project_back, run_pipeline, stage_net)
from .markov import (MappedConfiguration, MarkovReport, ReversibleChain,
                     chain_from_weights, euclidean_sampler, group_sampler,
                     markov_ratio, transition_power, verify_markov_type2)

__version__ = "0.1.0"
