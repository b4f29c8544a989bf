"""Node-aware cost models for MPI point-to-point communication.

Predicts the communication cost of irregular sparse operations from their
message patterns: a max-rate transport kernel split by protocol and endpoint
locality, a quadratic queue-search penalty, and a hop-based network
contention penalty, plus the fitting machinery to calibrate all parameters
from ping-pong style timings.
"""

from .cost import (
    CostBreakdown,
    MessageSpec,
    contention_cost,
    link_bytes,
    max_rate_cost,
    message_cost,
    postal_cost,
    predict_pattern,
    queue_search_cost,
)
from .errors import (
    CommCostError,
    FitError,
    LayoutError,
    PatternError,
    SchemaError,
    TraceError,
)
from .fit import (
    FitResult,
    TimingSample,
    fit_delta,
    fit_gamma,
    fit_injection,
    fit_machine_model,
    fit_postal,
    samples_from_csv,
    samples_to_csv,
)
from .params import (
    CELLS,
    Locality,
    MachineModel,
    ParamSet,
    Protocol,
    ProtocolThresholds,
    classify_protocol,
    default_model,
    load_model,
    save_model,
)
from .pattern import (
    CommPattern,
    PingPongSchedule,
    SparseMatrixPartition,
    block_row_starts,
    calibration_campaign,
    load_matrix,
    load_pattern,
    make_schedule,
    spgemm_pattern,
    spmv_pattern,
    synth_timings,
)
from .queue_sim import (
    QueueStats,
    QueueTrace,
    in_order_trace,
    random_trace,
    reversed_trace,
    simulate_queue,
    worst_case_steps,
)
from .topology import (
    CubeTopology,
    RankLayout,
    average_hops,
    cube_side,
    hops,
    locality,
)

__version__ = "0.1.0"
