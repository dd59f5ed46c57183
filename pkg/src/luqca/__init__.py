"""Local unitary quantum cellular automata.

Each step of an automaton applies a read operator on every neighbourhood
and then a single-cell update operator.  The package simulates such
automata on finite regions, validates definitions and compiles them to
circuits.  It also ships colored variants, reference constructions and
translations from two partitioned formalisms.
"""
from __future__ import annotations

from ._kernels import BACKEND, available_backends
from .builders import (
    AmplificationSpec,
    WalkParams,
    amplification_cqca,
    heisenberg_cqca,
    ising_qca,
    shift_right_qca,
    walk_qca,
)
from .coloring import Coloring, CqcaDefinition, cqca_period, cqca_to_qca, gates_to_cqca
from .compiler import Circuit, Gate, compile_to_circuit, encode_circuit_as_qca, simulate_circuit
from .core import (
    QUIESCENT,
    TORUS,
    BlockInitializer,
    BoundaryLeakError,
    CellLayout,
    DefinitionError,
    LuqcaError,
    NeighborhoodScheme,
    QcaDefinition,
    Region,
    Register,
    ResourceError,
)
from .engine import expectation, observe, reduced_density, required_region, run, step
from .linalg import commutes_with_translations, herm_exp, is_unitary
from .operators import Action, ControlledRule
from .state import RegionState, SparseState, basis_state, product_state, random_state
from .translators import MargolusDef, WatrousPartitionedDef, margolus_to_luqca, watrous_to_luqca
from .validation import validate_definition

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "QUIESCENT", "TORUS", "Action", "AmplificationSpec", "BlockInitializer",
    "BoundaryLeakError", "CellLayout", "Circuit", "Coloring", "ControlledRule", "CqcaDefinition",
    "DefinitionError", "Gate", "LuqcaError", "MargolusDef", "NeighborhoodScheme", "QcaDefinition",
    "Region", "RegionState", "Register", "ResourceError", "SparseState", "WalkParams",
    "WatrousPartitionedDef", "amplification_cqca", "available_backends", "basis_state",
    "commutes_with_translations", "compile_to_circuit", "cqca_period", "cqca_to_qca",
    "encode_circuit_as_qca", "expectation", "gates_to_cqca", "heisenberg_cqca", "herm_exp",
    "is_unitary", "ising_qca", "margolus_to_luqca", "observe", "product_state", "random_state",
    "reduced_density", "required_region", "run", "shift_right_qca", "simulate_circuit", "step",
    "validate_definition", "walk_qca", "watrous_to_luqca",
]
