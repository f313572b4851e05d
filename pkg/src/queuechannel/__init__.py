"""Classical capacity of qubit channels and of queue-channels built from them."""
from .capacity import (
    HolevoSolution,
    InducedChannelReport,
    gad_holevo,
    induced_n1,
    induced_n2,
    induced_n3,
    induced_report,
    unital_capacity,
)
from .channels import (
    ChannelFamily,
    GadChannel,
    OptimalCode,
    PauliChannel,
    apply_channel,
    apply_gad,
    apply_pauli,
    eb_threshold,
    gad_to_pauli,
    is_entanglement_breaking,
    is_pauli_ordered,
    is_unital,
    m_phi,
    optimal_code,
)
from .qubit_core import (
    BinaryChannel,
    BlochVector,
    DensityOperator,
    bac_capacity,
    binary_entropy,
    bsc_capacity,
    operator_norm,
    von_neumann_entropy,
)
from .queue_capacity import (
    CapacityResult,
    DecoherenceModel,
    QueueChannelSpec,
    QueueTemplate,
    capacity_expectation,
    capacity_series,
    compare_arrival_dists,
    compare_service_dists,
    optimize_lambda,
    queue_capacity,
)
from .queueing import ConvergenceError, Distribution, QueueModel, lindley_simulate
from .simulator import SimConfig, SimReport, estimate_rate, run_end_to_end

__version__ = "0.1.0"
