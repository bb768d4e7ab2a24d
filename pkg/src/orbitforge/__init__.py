"""Graphs whose automorphism orbits force a prescribed cluster configuration."""

from .automorphism import (
    OrbitPartition,
    OsCertificate,
    automorphism_generators,
    canonical_rotation,
    certify_os,
    compute_orbits,
    is_automorphism,
    orbits_bruteforce,
)
from .graph import DirectedGraph, GraphError, degree_profile, incidence_matrix, is_weakly_connected
from .simulation import (
    NetworkParams,
    SimulationConfig,
    SimulationResult,
    check_invariance,
    controller_map,
    detect_clusters,
    sample_params,
    simulate,
    steady_state_solve,
    vector_field,
)
from .synthesis import (
    BoundsReport,
    CapacityError,
    ClusterSpec,
    build_os_graph,
    corollary_edge_counts,
    lower_bound,
    predicted_edge_count,
    upper_bound,
)

__version__ = "0.1.0"
