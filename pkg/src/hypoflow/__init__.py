"""Numerical laboratory for entropy decay of the kinetic Langevin diffusion."""

from .potential import PotentialSpec, HamiltonianModel, eval_potential, eval_hamiltonian
from .constants import Theorem1Constants, theorem1_constants, rate_integral, decay_envelope
from .grid import PhaseGrid, build_grid, apply_generator
from .flow import FlowState, DecayReport, run, step, verify_theorem1

__all__ = ["PotentialSpec", "HamiltonianModel", "eval_potential", "eval_hamiltonian",
           "Theorem1Constants", "theorem1_constants", "rate_integral", "decay_envelope",
           "PhaseGrid", "build_grid", "apply_generator", "FlowState", "DecayReport", "run",
           "step", "verify_theorem1"]
