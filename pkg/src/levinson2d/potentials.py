"""Radial potential models with compact or Gaussian support.

Sign convention: ``depth`` is positive for an attractive well, so
``square_well(depth=1, radius=1)`` evaluates to -1 inside r < 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

GAUSSIAN_CUTOFF_WIDTHS = 8.0


class QuadratureError(RuntimeError):
    """The two Gauss orders for the plane moment disagree beyond tolerance."""

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


class PotentialFileError(ValueError):
    """A tabulated potential file violates the two-column format contract."""


@dataclass(frozen=True)
class RadialPotential:
    """An immutable radial potential V(r).

    Parameters
    ----------
    kind : {"square_well", "gaussian", "tabulated", "zero"}
    depth : float
        V0; the well bottom is at -V0.
    width : float
        Radius ``a`` for the square well, ``sigma`` for the Gaussian
        ``-V0 exp(-r^2 / sigma^2)``.
    r_cut : float
        Radius beyond which V is exactly zero.
    table_r, table_v : arrays, optional
        Samples for the tabulated kind.
    """

    kind: str
    depth: float = 0.0
    width: float = 1.0
    r_cut: float = 1.0
    table_r: np.ndarray | None = field(default=None, repr=False, compare=False)
    table_v: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("square_well", "gaussian", "tabulated", "zero"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if not (self.r_cut > 0 and math.isfinite(self.r_cut)):
            raise ValueError("r_cut must be positive and finite")
        if self.kind == "tabulated":
            r = np.asarray(self.table_r, dtype=float)
            v = np.asarray(self.table_v, dtype=float)
            object.__setattr__(self, "_spline", PchipInterpolator(r, v, extrapolate=True))

    # -- construction helpers -------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind != "tabulated" and self.depth == 0.0)

    @property
    def depth_scale(self) -> float:
        """Characteristic energy used to scale the energy grid."""
        if self.kind == "tabulated":
            return float(np.max(np.abs(self.table_v))) or 1.0
        return abs(self.depth) or 1.0

    def describe(self) -> dict:
        d = {"kind": self.kind, "depth": self.depth, "width": self.width, "r_cut": self.r_cut}
        if self.kind == "tabulated":
            d["samples"] = int(len(self.table_r))
        return d

    # -- evaluation ------------------------------------------------------------

    def interior(self, r):
        """V(r) without the cutoff, i.e. the inside formula continued past r_cut.

        The radial integrator needs one ghost point past r_cut that sees the
        inside potential so the one-sided derivative at r_cut is not polluted
        by the jump of a square well.
        """
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "square_well":
            return np.full_like(r, -self.depth)
        if self.kind == "gaussian":
            return -self.depth * np.exp(-(r / self.width) ** 2)
        v = self._spline(np.minimum(r, self.table_r[-1]))
        return np.where(r > self.table_r[-1], self.table_v[-1], v)

    def evaluate(self, r):
        """V(r) for r >= 0; exactly zero for r > r_cut (and at r_cut for the well)."""
        ra = np.asarray(r, dtype=float)
        if np.any(ra < 0):
            raise ValueError("radius must be non-negative")
        if self.kind == "square_well":
            v = np.where(ra < self.r_cut, -self.depth, 0.0)
        else:
            v = np.where(ra <= self.r_cut, self.interior(ra), 0.0)
        return float(v) if np.ndim(r) == 0 else v

    __call__ = evaluate

    def value_at_origin(self) -> float:
        return float(self.interior(0.0))

    def plane_moment(self) -> float:
        """Integral of V over the plane, 2 pi int_0^inf V(r) r dr."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "square_well":
            return -math.pi * self.depth * self.width ** 2
        if self.kind == "gaussian":
            return -math.pi * self.depth * self.width ** 2
        # PCHIP is cubic per interval, so V(r) r is a quartic: 3-point
        # Gauss-Legendre is exact per interval; 4-point gives the error check.
        r = np.asarray(self.table_r)
        total = {}
        for npts in (3, 4):
            xg, wg = np.polynomial.legendre.leggauss(npts)
            lo, hi = r[:-1, None], r[1:, None]
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            x = mid + half * xg
            total[npts] = float(np.sum(half * wg * self._spline(x) * x))
        if r[0] > 0:
            for k in total:
                total[k] += 0.5 * float(self._spline(r[0])) * r[0] ** 2
        err = abs(total[4] - total[3])
        if err > 1e-10 * max(abs(total[4]), 1e-300):
            raise QuadratureError("plane moment quadrature did not converge", err)
        return 2.0 * math.pi * total[4]


def square_well(depth: float, radius: float = 1.0) -> RadialPotential:
    return RadialPotential("square_well", float(depth), float(radius), float(radius))


def gaussian(depth: float, sigma: float = 1.0, cutoff_widths: float = GAUSSIAN_CUTOFF_WIDTHS) -> RadialPotential:
    return RadialPotential("gaussian", float(depth), float(sigma), float(cutoff_widths * sigma))


def zero_potential(r_cut: float = 1.0) -> RadialPotential:
    return RadialPotential("zero", 0.0, float(r_cut), float(r_cut))


def tabulated(r, v, vanish_tol: float = 1e-8) -> RadialPotential:
    """Potential from samples; the last sample must vanish within ``vanish_tol``."""
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    if r.ndim != 1 or r.shape != v.shape or r.size < 4:
        raise PotentialFileError("need at least four (r, V) samples in two equal columns")
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
        raise PotentialFileError("samples must be finite")
    if np.any(np.diff(r) <= 0) or r[0] < 0:
        raise PotentialFileError("radii must be non-negative and strictly increasing")
    scale = max(float(np.max(np.abs(v))), 1e-300)
    if abs(v[-1]) > vanish_tol * scale:
        raise PotentialFileError(f"potential does not vanish at the last sample (V={v[-1]:.3e})")
    return RadialPotential("tabulated", scale, float(r[-1]), float(r[-1]), r, v)


def load_tabulated(path, vanish_tol: float = 1e-8) -> RadialPotential:
    """Read a two-column ``r value`` text file with '#' comments."""
    try:
        data = np.loadtxt(Path(path), comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise PotentialFileError(f"{path}: {exc}") from exc
    if data.shape[1] != 2:
        raise PotentialFileError(f"{path}: expected two columns, found {data.shape[1]}")
    return tabulated(data[:, 0], data[:, 1], vanish_tol)


def save_tabulated(path, pot: RadialPotential, n: int = 10_000, units: str = "") -> None:
    """Write ``pot`` sampled on [0, r_cut] in the tabulated file format."""
    if pot.kind == "square_well":
        # keep the jump sharp: last inside sample at r_cut, then one just past it
        r = np.append(np.linspace(0.0, pot.r_cut, n - 1), pot.r_cut * (1 + 1e-12))
        v = np.append(pot.interior(r[:-1]), 0.0)
    else:
        r = np.linspace(0.0, pot.r_cut, n)
        v = pot.interior(r)
        v[-1] = 0.0
    header = f"r value  ({pot.kind} depth={pot.depth} width={pot.width}) {units}".rstrip()
    np.savetxt(Path(path), np.column_stack([r, v]), header=header, fmt="%.17g")
