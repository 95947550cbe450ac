"""Doubly robust nearest neighbors for matrix and tensor completion."""

from .errors import (
    ConfigError,
    DegenerateInterval,
    DrnnError,
    InsufficientData,
    InvalidArgument,
    IoError,
    NoDataError,
    ParseError,
)
from .estimators import (
    CounterfactualEstimates,
    EntryEstimate,
    complete_matrix,
    counterfactual_estimates,
    estimate_dr_nn,
    estimate_entry,
    estimate_time_nn,
    estimate_unit_nn,
)
from .inference import (
    IntervalEstimate,
    confidence_interval,
    effective_sample_size,
    estimate_noise_variance,
    normal_quantile,
)
from .neighbors import (
    NeighborSets,
    SplitAssignment,
    all_time_distances,
    all_unit_distances,
    make_split,
    select_neighbors,
    time_distance,
    unit_distance,
)
from .panel import (
    ObservationPanel,
    ObservationTensor,
    TargetCell,
    load_panel,
    load_tensor,
    mask_density,
    save_panel,
    save_tensor,
)
from .synthetic import (
    FactorConfig,
    SurfaceConfig,
    SyntheticInstance,
    build_theta,
    gen_continuous_factors,
    gen_discrete_factors,
    gen_instance,
    gen_mask,
    gen_noise,
)
from .tensor import (
    TensorNeighborSets,
    estimate_tensor_entry,
    estimate_tensor_vanilla,
    estimate_tr_nn,
    tensor_mode_distance,
    tensor_neighbors,
)
from .tuning import TuningRule, theory_eta, validation_tune

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
