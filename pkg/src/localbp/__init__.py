"""Community detection on sparse two-block random graphs with noisy vertex
labels: local belief propagation, exact branching-process recursions that
bound its accuracy, and the large-degree density-evolution solver."""

from .bp import (BpRun, BpState, bp_iterate, empirical_accuracy, finalize_beliefs,
                 init_state, labels_from_beliefs, run_bp)
from .de import (DeConfig, DeResult, de_accuracy, fixed_point, gaussian_strata,
                 h_eval, h_prime, hprime_grid, mc_error_oracle, predict_gamma_moments,
                 q_function, solve, sweep_curves)
from .graph import (LabeledGraph, Neighborhood, extract_neighborhood, load_graph,
                    sample_sbm, save_graph)
from .model import Derived, ModelParams, derived_constants, edge_coupling, validate_params
from .oracle import PosteriorResult, exact_graph_posterior, exact_tree_posterior
from .seeds import derive_seed
from .tree import (BoundaryGap, GwForest, TreeMetrics, boundary_gap, boundary_gap_samples,
                   build_forest, estimate_tree_metrics, recurse_llr, recurse_magnetization,
                   sample_gw_forest, sample_gw_tree, sample_llr_population,
                   tree_magnetization_samples, tree_to_edges)

__version__ = "0.1.0"
