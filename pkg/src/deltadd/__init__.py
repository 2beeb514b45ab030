"""MTBDD engine with delta-merging floating-point leaves, a quantum-circuit
simulator on top of it, and tools that quantify the numerical errors both
kinds of approximation introduce."""

from .numerics import (
    Complex,
    MAX_BITS,
    MIN_BITS,
    Precision,
    PrecisionError,
    REFERENCE_BITS,
    RangeError,
    distance,
    modulus,
    parse_angle,
    round_to,
)
from .mtbdd import (
    DimensionError,
    LEAF_VAR,
    MatrixDD,
    NodeStore,
    OrderingError,
    VectorDD,
    count_nodes,
    eval_dd,
    from_dense,
    from_dense_matrix,
    make_leaf,
    make_node,
    multiply,
    peak_nodes,
    plus,
    to_dense,
    to_dense_matrix,
)
from .quantum import (
    Angle,
    Circuit,
    CircuitSyntaxError,
    Gate,
    basis_state,
    emit_circuit,
    gate_matrix,
    gen_dj,
    gen_qpe_exact,
    gen_wstate,
    generate,
    parse_circuit,
    simulate,
)
from .analysis import (
    AdversarialSeedError,
    BoundReport,
    ErrorReport,
    SweepRecord,
    adversarial_run,
    bound_general,
    bound_unit,
    compare_to_reference,
    hadamard_tensor,
    make_reference,
    per_gate_bound_check,
    read_csv,
    state_diff,
    suggest_bits,
    suggest_delta,
    sweep,
    uniform_vector,
    write_csv,
    write_json,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
