"""Streaming image pipelines for stereo block matching, with a synthesis
cost model and a constraint-driven clock tuner."""

from .image import (
    BoundaryMode,
    DimensionMismatchError,
    Domain,
    Image,
    Mask,
    PgmError,
    Roi,
    load_pgm,
    store_pgm,
)
from .kernels import (
    GAUSSIAN_3X3,
    CycleError,
    DanglingInputError,
    DuplicateProducerError,
    GraphBuildError,
    KernelGraph,
    KernelSpec,
    ReduceOp,
    break_iterate,
    build_gaussian_graph,
    build_graph,
    convolve,
    dump_listing,
    execute_buffered,
    iterate,
    reduce,
)
from .matching import (
    CostKind,
    DisparityMap,
    MatchConfig,
    bounded_bit_count,
    build_census_pipeline,
    build_pipeline,
    build_sad_pipeline,
    census_cost,
    census_vector,
    match_reference,
    min_index,
    sad_cost,
    shifted_target,
)
from .streaming import (
    CycleStats,
    LoweringError,
    StreamPlan,
    lower,
    measured_fill_cycles,
    simulate,
    total_latency_seconds,
)
from .synthesis import (
    ZYNQ_7100,
    Constraints,
    MockBackend,
    MockModelParams,
    ResourceBudget,
    SynthesisError,
    SynthesisReport,
    constraints_met,
    mock_synthesize,
    resource_fraction,
    table1_fixtures,
)
from .tuner import (
    DesignPoint,
    InfeasibleConstraintsError,
    OptimizationResult,
    optimize,
    pareto_front,
)

__all__ = [name for name in dir() if not name.startswith("_")]
