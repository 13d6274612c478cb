"""Stroboscopic simulation of high-weight stabilizer Hamiltonians from 2-local resources."""
from .pauli import CliffordLayer, PauliExponential, PhasedPauli, WeightedPauliSum, commutator_i, nested_commutator
from .lattice import CodeLayout, GridLayout, Hole, build_code_terms, build_system_hamiltonian, classify_error
from .schedule import Evolve, PauliRotation, Pulse, PulseSchedule, ScheduleBuilder, toggling_frame
from .magnus import MagnusReport, effective_hamiltonian, magnus_orders
from .compiler import (
    CompileReport,
    compile_boundary,
    schedule_boundary,
    compile_deformation,
    compile_grid,
    compile_nn_vertex,
    compile_pi4,
    compile_plaquette,
    commutator_sequence,
    gen_component,
)
from .decoupling import (
    DDSequence,
    interleave,
    lambda1_extension,
    lower_bound_check,
    symmetrize_local,
    symmetrize_protecting,
    universal_sequence,
)
from .verifier import (
    BathModel,
    catalog_error_terms,
    eta,
    eta_bound,
    extract_generator,
    fit_scaling,
    simulate_dense,
    suppression_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "CliffordLayer",
    "PauliExponential",
    "PhasedPauli",
    "WeightedPauliSum",
    "commutator_i",
    "nested_commutator",
    "CodeLayout",
    "GridLayout",
    "Hole",
    "build_code_terms",
    "build_system_hamiltonian",
    "classify_error",
    "Evolve",
    "PauliRotation",
    "Pulse",
    "PulseSchedule",
    "ScheduleBuilder",
    "toggling_frame",
    "MagnusReport",
    "effective_hamiltonian",
    "magnus_orders",
    "CompileReport",
    "compile_boundary",
    "schedule_boundary",
    "compile_deformation",
    "compile_grid",
    "compile_nn_vertex",
    "compile_pi4",
    "compile_plaquette",
    "commutator_sequence",
    "gen_component",
    "DDSequence",
    "interleave",
    "lambda1_extension",
    "lower_bound_check",
    "symmetrize_local",
    "symmetrize_protecting",
    "universal_sequence",
    "BathModel",
    "catalog_error_terms",
    "eta",
    "eta_bound",
    "extract_generator",
    "fit_scaling",
    "simulate_dense",
    "suppression_sweep",
]
