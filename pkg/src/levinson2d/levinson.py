"""Spectral shift function, the arctan regulariser and the identity check.

The identity being verified reads

    W + M / (4 pi) + p_dim = -#sigma_p,

with W the winding of det S over (0, inf), M the integral of V over the
plane, p_dim the number of p-resonances and #sigma_p the number of bound
states counted with multiplicity (zero-energy eigenvalues included).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .potentials import RadialPotential
from .radial_engine import (
    TAU_RES,
    EnergyGrid,
    PhaseShiftTable,
    ThresholdClass,
    build_phase_table,
    count_bound_states,
)


class NormalizationError(RuntimeError):
    """No integer shift brings xi(lam_max) near M / (4 pi)."""


def regularizer_trace(moment: float, lam) -> np.ndarray | float:
    """tr A(lam) = arctan(lam) M / pi; 0 at lam = 0 and M / 2 at infinity."""
    lam_a = np.asarray(lam, dtype=float)
    if np.any(lam_a < 0):
        raise ValueError("lam must be non-negative")
    out = np.arctan(lam_a) * moment / math.pi
    return float(out) if np.ndim(lam) == 0 else out


@dataclass(frozen=True)
class Regularizer:
    moment: float

    def trace(self, lam):
        return regularizer_trace(self.moment, lam)

    def det(self, lam):
        """det beta(lam) = exp(i tr A(lam))."""
        return np.exp(1j * np.asarray(self.trace(lam)))


# --------------------------------------------------------------------------
# low-energy limits
# --------------------------------------------------------------------------

def channel_zero_limits(table: PhaseShiftTable, thresholds=None) -> np.ndarray:
    """Per-channel limits delta_ell(0+), each a multiple of pi.

    Each channel is moved to the multiple of pi it approaches as lam
    decreases, judged from the two lowest grid points. In the plane the
    s-wave creeps there only logarithmically, so the raw value at lam_min
    can still be far from it. Channels classified as threshold-resonant sit
    on a multiple already and are moved to the nearest one.
    """
    d0 = table.delta[:, 0]
    d1 = table.delta[:, 1]
    out = np.empty_like(d0)
    for ell in range(d0.size):
        x = d0[ell] / math.pi
        if thresholds is not None and not thresholds[ell].regular:
            out[ell] = math.pi * round(x)
        elif d0[ell] > d1[ell]:
            out[ell] = math.pi * math.ceil(x)
        elif d0[ell] < d1[ell]:
            out[ell] = math.pi * math.floor(x)
        else:
            out[ell] = math.pi * round(x)
    return out


# --------------------------------------------------------------------------
# spectral shift function
# --------------------------------------------------------------------------

@dataclass
class SSFCurve:
    """xi(lam) = -(1/pi) sum_ell m_ell delta_ell(lam) + shift, shift integer."""

    lam: np.ndarray
    xi: np.ndarray
    shift: int
    moment: float
    zero_limit_raw: float      # -(1/pi) sum m delta(0+) + shift, from channel limits
    table: PhaseShiftTable | None = field(default=None, repr=False)

    @property
    def xi_infinity(self) -> float:
        return self.moment / (4.0 * math.pi)


def build_ssf(table: PhaseShiftTable, moment: float | None = None,
              thresholds=None) -> SSFCurve:
    """Spectral shift function normalised so xi(lam_max) is nearest M / (4 pi)."""
    if moment is None:
        moment = table.moment
    xi_raw = -table.total_phase() / math.pi
    target = moment / (4.0 * math.pi)
    c = target - xi_raw[-1]
    shift = int(round(c))
    if abs(c - shift) > 0.25:
        raise NormalizationError(
            f"xi(lam_max) misses M/(4 pi) by {c - shift:+.3f} modulo integers")
    limits = channel_zero_limits(table, thresholds)
    zero = -float(table.multiplicities @ limits) / math.pi + shift
    return SSFCurve(table.lam, xi_raw + shift, shift, moment, zero, table)


@dataclass
class ZeroLimit:
    value: float
    uncertainty: float
    converged: bool
    decade_variation: tuple


def ssf_zero_limit(curve: SSFCurve) -> ZeroLimit:
    """Extrapolated xi(0+) with the variation over the last two decades.

    The value uses the per-channel limits (each delta_ell(0+) is a multiple
    of pi). The uncertainty is the distance between that value and the raw
    curve at lam_min when the curve is still moving toward it, which it
    does logarithmically in the s-wave. The extrapolation is flagged as not
    converged when the last decade varies more than the one before it.
    """
    lam, xi = curve.lam, curve.xi
    lo = lam[0]

    def at(x):
        return float(np.interp(math.log(x), np.log(lam), xi))

    v1 = abs(at(10 * lo) - at(lo)) if 10 * lo <= lam[-1] else math.nan
    v2 = abs(at(100 * lo) - at(10 * lo)) if 100 * lo <= lam[-1] else math.nan
    converged = not (v1 > v2 * (1 + 1e-9) + 1e-12)
    unc = abs(xi[0] - curve.zero_limit_raw)
    return ZeroLimit(curve.zero_limit_raw, unc, bool(converged), (v1, v2))


# --------------------------------------------------------------------------
# identity check
# --------------------------------------------------------------------------

@dataclass
class LevinsonConfig:
    ell_max: int = 12
    lam_lo: float = 1e-5           # in units of the depth scale
    lam_hi: float = 1e4
    count: int = 2048
    tau_res: float = TAU_RES
    tolerance: float = 0.02
    workers: int = 1
    check_oracle: bool = True
    absolute: bool = False         # lam_lo, lam_hi as given, not scaled

    def grid(self, pot: RadialPotential) -> EnergyGrid:
        if self.absolute:
            return EnergyGrid(self.lam_lo, self.lam_hi, self.count)
        return EnergyGrid.for_potential(pot, self.lam_lo, self.lam_hi, self.count)


@dataclass
class LevinsonReport:
    winding_term: float
    moment_term: float
    p_dim: int
    sigma_p: int
    residual: float
    grid: dict
    error_budget: dict
    status: str = "pass"
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def as_dict(self) -> dict:
        return {
            "winding_term": self.winding_term,
            "moment_term": self.moment_term,
            "p_dim": self.p_dim,
            "sigma_p": self.sigma_p,
            "residual": self.residual,
            "grid": self.grid,
            "error_budget": self.error_budget,
            "status": self.status,
            "detail": self.detail,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True, ensure_ascii=False,
                          default=_json_default)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o)}")


def regularized_phase(table: PhaseShiftTable, moment: float | None = None) -> np.ndarray:
    """Continuous argument of det(S(lam) beta(lam)) on the table grid."""
    if moment is None:
        moment = table.moment
    return 2.0 * table.total_phase() + regularizer_trace(moment, table.lam)


def winding_terms(table: PhaseShiftTable, thresholds):
    """(W, budget) with W the winding of det S over (0, inf).

    The argument of det(S beta) is taken on the grid, continued below
    lam_min to its limit from the channel limits, and left open above
    lam_max: the leftover |arg det(S beta)(lam_max)| shows up in the
    residual and in the budget instead of being assumed away.
    """
    m = table.moment
    phase = regularized_phase(table, m)
    limits = channel_zero_limits(table, thresholds)
    phase0 = 2.0 * float(table.multiplicities @ limits)
    wind_sb = (phase[-1] - phase0) / (2.0 * math.pi)
    w = wind_sb - m / (4.0 * math.pi)
    budget = {
        "high_energy_closure": float(abs(phase[-1])) / (2.0 * math.pi),
        "low_energy_extrapolation": float(table.multiplicities
                                          @ np.abs(table.delta[:, 0] - limits)) / math.pi,
        "born_tail_at_lambda_max": abs(float(table.tail[-1])) / math.pi,
        "last_channel_at_lambda_max": 2.0 * abs(float(table.delta[-1, -1])) / math.pi,
    }
    return w, wind_sb, budget


def verify_identity(pot: RadialPotential, config: LevinsonConfig | None = None,
                    table: PhaseShiftTable | None = None) -> LevinsonReport:
    """Run the full pipeline for one potential and assemble the report."""
    cfg = config or LevinsonConfig()
    grid = cfg.grid(pot)
    moment = pot.plane_moment()
    moment_term = moment / (4.0 * math.pi)
    if table is None:
        table = build_phase_table(pot, cfg.ell_max, grid, workers=cfg.workers)
    count = count_bound_states(pot, cfg.ell_max, cfg.tau_res, check_oracle=cfg.check_oracle)
    th: list[ThresholdClass] = count.thresholds
    p_dim = count.p_dim
    sigma = count.total
    if pot.is_zero:
        w, wind_sb, budget = 0.0, 0.0, {"high_energy_closure": 0.0,
                                        "low_energy_extrapolation": 0.0,
                                        "born_tail_at_lambda_max": 0.0,
                                        "last_channel_at_lambda_max": 0.0}
    else:
        w, wind_sb, budget = winding_terms(table, th)
    residual = abs(w + moment_term + p_dim + sigma)
    curve = build_ssf(table, moment, th)
    zl = ssf_zero_limit(curve)
    near = [t.ell for t in th if t.near_threshold(grid.lam_min)]
    budget.update({
        "moment_quadrature": 0.0 if pot.kind != "tabulated" else 1e-10 * abs(moment),
        "threshold_confidence_min": min(t.confidence for t in th),
        "oracle_agreement": None if count.oracle is None else bool(
            all(a == b for a, b, t in zip(count.nodes, count.oracle, th) if t.regular)),
        "refined_points": int(table.diagnostics.get("refined_points", 0)),
    })
    if near:
        status = "near_threshold"
    elif residual < cfg.tolerance:
        status = "pass"
    else:
        status = "fail"
    detail = {
        "wind_det_S_beta": wind_sb,
        "xi_lambda_max": float(curve.xi[-1]),
        "xi_infinity": curve.xi_infinity,
        "xi_zero_limit": zl.value,
        "xi_zero_uncertainty": zl.uncertainty,
        "xi_zero_converged": zl.converged,
        "near_threshold_channels": near,
        "thresholds": [t.as_dict() for t in th],
        "bound_states": count.as_dict(),
        "potential": pot.describe(),
        "backend": table.diagnostics.get("backend"),
    }
    gd = grid.as_dict()
    gd.update({"ell_max": cfg.ell_max, "points": int(table.lam.size)})
    return LevinsonReport(float(w), float(moment_term), int(p_dim), int(sigma),
                          float(residual), gd, budget, status, detail)
