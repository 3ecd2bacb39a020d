"""Independent reference values used across the test modules."""

from __future__ import annotations

import functools
import math
import time

import numpy as np
from scipy import special

from levinson2d import EnergyGrid, build_phase_table, count_bound_states, gaussian, square_well
from levinson2d.levinson import LevinsonConfig, verify_identity

J01_SQ = float(special.jn_zeros(0, 1)[0]) ** 2    # first p-resonance depth, a = 1
J11_SQ = float(special.jn_zeros(1, 1)[0]) ** 2    # first s-resonance depth, a = 1

# square-well depths V0 a^2 checked against the identity and their bound-state totals
SQUARE_WELL_TOTALS = {0.5: 1, 1.0: 1, 3.0: 1, 5.0: 1, 8.0: 3, 12.0: 3, 20.0: 6}
GAUSSIAN_DEPTHS = (1.0, 5.0, 12.0, 20.0)

# wall-clock seconds of the first pipeline() call per (kind, depth, count)
PIPELINE_SECONDS: dict = {}


def square_well_delta(ell: int, lam: float, depth: float, a: float = 1.0) -> float:
    """Principal phase shift of a square well from matching Bessel functions."""
    k = math.sqrt(lam)
    q = math.sqrt(lam + depth)
    ka, qa = k * a, q * a
    beta = q * special.jvp(ell, qa) / special.jv(ell, qa)
    num = k * special.jvp(ell, ka) - beta * special.jv(ell, ka)
    den = k * special.yvp(ell, ka) - beta * special.yv(ell, ka)
    d = math.atan(num / den)
    return d


def wrap_pi(x):
    """Reduce to (-pi/2, pi/2]."""
    return np.pi / 2 - np.mod(np.pi / 2 - np.asarray(x), np.pi)


def make(kind: str, depth: float):
    return square_well(depth) if kind == "square_well" else gaussian(depth)


@functools.lru_cache(maxsize=None)
def pipeline(kind: str, depth: float, count: int = 2048):
    """(potential, table, bound count, report) for one potential, computed once."""
    start = time.perf_counter()
    pot = make(kind, depth)
    cfg = LevinsonConfig(count=count)
    table = build_phase_table(pot, cfg.ell_max, cfg.grid(pot))
    spec = count_bound_states(pot, cfg.ell_max, check_oracle=True)
    report = verify_identity(pot, cfg, table=table)
    PIPELINE_SECONDS[(kind, depth, count)] = time.perf_counter() - start
    return pot, table, spec, report


def small_table(pot, count: int = 256, ell_max: int = 12):
    return build_phase_table(pot, ell_max, EnergyGrid.for_potential(pot, count=count))
