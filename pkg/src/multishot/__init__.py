"""Multi-shot noisy state-vector simulation with three interchangeable executors."""
from .batch import BatchState, run_batch, shot_index
from .branch import leaf_statistics, run_branch
from .circuit import (
    Circuit,
    CircuitError,
    Condition,
    GateKind,
    Instruction,
    from_json,
    from_text,
    gate_matrix,
    measure_all,
    qft_circuit,
    to_json,
    to_text,
    validate,
)
from .density import DensityMatrix, evolve_channel, evolve_unitary, exact_distribution, total_variation
from .execution import CapacityError, RunResult, counts_checksum, merge_counts
from .executors import EXECUTORS, run
from .naive import run_naive, simulate_shot
from .noise import (
    KrausError,
    NoiseConfigError,
    NoiseModel,
    NoiseRule,
    NoisyCircuit,
    PauliError,
    PauliString,
    bit_flip_error,
    depolarizing_error,
    depolarizing_model,
    instrument,
    noise_model_from_json,
    noise_model_to_json,
    pauli_as_kraus,
    sample_pauli,
)
from .rng import ShotRng, uniform
from .statevector import (
    DegenerateMeasurementError,
    PauliMasks,
    apply_matrix,
    apply_pauli_fused,
    expval_matrix,
    probabilities,
    project_and_renormalize,
    sample_counts,
    zero_state,
)

__version__ = "0.1.0"
