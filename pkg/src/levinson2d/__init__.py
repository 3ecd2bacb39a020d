"""Numerical check of the two-dimensional topological Levinson theorem for
radial potentials of compact support."""

from ._ext import BACKEND
from .levinson import LevinsonConfig, LevinsonReport, build_ssf, verify_identity
from .potentials import (
    RadialPotential,
    gaussian,
    load_tabulated,
    save_tabulated,
    square_well,
    tabulated,
    zero_potential,
)
from .radial_engine import (
    EnergyGrid,
    build_phase_table,
    classify_threshold,
    count_bound_states,
    phase_shift,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EnergyGrid",
    "LevinsonConfig",
    "LevinsonReport",
    "RadialPotential",
    "build_phase_table",
    "build_ssf",
    "classify_threshold",
    "count_bound_states",
    "gaussian",
    "load_tabulated",
    "phase_shift",
    "save_tabulated",
    "square_well",
    "tabulated",
    "verify_identity",
    "zero_potential",
]
