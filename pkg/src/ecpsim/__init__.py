"""Simulator for entanglement concentration of spin-entangled electrons with charge detection."""

from .analysis import (
    BranchTree,
    SweepRow,
    discrepancy_report,
    enumerate_branches,
    monte_carlo,
    success_probability_formula,
)
from .protocol import (
    ProtocolError,
    ProtocolReport,
    SchmidtPair,
    prepare_ancilla,
    prepare_ghz,
    prepare_pair,
    recycle_failure,
    run_multi_round,
    run_multipartite,
    run_round,
)
from .state import DOWN, UP, PureState, Spin, StateError, fidelity_up_to_phase, schmidt_coefficients, tensor

__version__ = "0.1.0"
