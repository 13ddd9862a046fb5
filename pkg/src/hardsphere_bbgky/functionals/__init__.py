from .sampling import (
    Channel,
    ChannelResult,
    ChannelSet,
    MCEstimate,
    SamplingSpec,
    mc_integrate,
    run_chunks,
    stream_rng,
    worker_count,
)
from .sequences import (
    DegenerateNormalizationError,
    MarginalComponent,
    MarginalTerm,
    ObservableSeq,
    StateSeq,
    Transported,
    annihilation,
    check_symmetry,
    creation,
    creation_exponential,
    evolved_state,
    mean_value,
    normalization,
    pairing,
    reduce_observable,
    reduce_state,
)
from .norms import isometry_gap, norm_diagnostics, sample_sup
