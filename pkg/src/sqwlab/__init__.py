"""Numerical laboratory for random scattering quantum walks on finite digraphs.

The package builds disordered scattering walks edge by edge, takes exact
eigendata and eigenfunction correlators on finite graphs, and runs the Monte
Carlo estimators that probe localization: fractional resolvent moments,
spectral averaging, spectral-gap probabilities, geometric resolvent
identities, and exponential decay experiments.
"""

from .graphs import (
    INF,
    BallSpec,
    ConsistentSubset,
    Digraph,
    ball_vertices,
    build_graph,
    distances_from,
    edge_ball,
    edge_distance,
    graph_distance,
    sphere_vertices,
)
from .walk import (
    DisorderSpec,
    ScatteringFamily,
    WalkOperator,
    ball_edge_mask,
    boundary_operator,
    build_unitary,
    embed,
    make_family,
    restrict,
    rng_stream,
    sample_disorder,
    scattering_distance,
    sphere_reflected_family,
)
from .spectral import (
    ArcSet,
    EigenSystem,
    SpectralMeasure,
    WeakConvergenceReport,
    cayley_real_diag,
    dynamical_probe,
    ec,
    eigendecompose,
    interpolated_ec,
    resolvent_element,
    resolvent_row,
    spectral_measure,
    weak_convergence_scan,
)
from .estimators import (
    DEFAULT_DELTA_GRID,
    DEFAULT_RADII,
    DecayCurve,
    DecayFit,
    DecayReport,
    DynlocCurve,
    DynlocReport,
    FmecReport,
    FracMomReport,
    GapReport,
    GeomIdentityReport,
    MCEstimate,
    SmallnessReport,
    SpecAvgReport,
    ZGrid,
    check_fmec_bound,
    check_geometric_resolvent,
    decay_experiment,
    dynloc_experiment,
    gap_probability,
    mc_fractional_moment,
    mc_spectral_average,
    resolvent_smallness_check,
)

__version__ = "0.1.0"
