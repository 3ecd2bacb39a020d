"""Partial-wave solver for -Laplacian + V(r) in the plane.

Each angular channel ell is integrated in the variable x = ln r, where the
regular solution f(r) (the full radial function, not sqrt(r) f) obeys

    f_xx = [ell^2 + r^2 (V(r) - lam)] f,

a Numerov-form equation with no first-derivative term and no singular
coefficient. The integration starts at r0 = 1e-6 r_cut from the small-r Bessel
series and ends exactly on r_cut, with one ghost point that sees the inside
potential so the derivative is a left limit.
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from . import _ext
from .potentials import RadialPotential
from .specfun import bessel_jy_table

TAU_RES = 1e-6
START_FRACTION = 1e-6
DX_MAX = 0.02          # log-grid step cap, resolves V on the scale of r
PHASE_RESOLUTION = 0.06  # dx * local frequency in x, radians per step
NEAR_THRESHOLD_MARGIN = 10.0


class RadialError(RuntimeError):
    """Numerical failure in the radial solver."""


class MatchingDegeneracyError(RadialError):
    """Both numerator and denominator of the matching formula vanished."""


class RefinementBudgetError(RadialError):
    """Phase-shift refinement could not resolve a rapid variation."""

    def __init__(self, ell, lam_lo, lam_hi):
        super().__init__(f"refinement budget exhausted in channel {ell} on "
                         f"lambda in [{lam_lo:.6g}, {lam_hi:.6g}]")
        self.ell, self.interval = ell, (lam_lo, lam_hi)


class FitConditioningError(RadialError):
    """Exterior fit at zero energy is ill-conditioned; enlarge r_cut."""


@dataclass(frozen=True)
class Channel:
    ell: int

    @property
    def multiplicity(self) -> int:
        return 1 if self.ell == 0 else 2


def multiplicity(ell: int) -> int:
    return 1 if ell == 0 else 2


# --------------------------------------------------------------------------
# grid and kernel driver
# --------------------------------------------------------------------------

@dataclass
class _LogGrid:
    x0: float
    dx: float
    n: int                 # index of the matching point r_cut
    r: np.ndarray          # n + 2 radii (last one is the ghost point)
    e2x: np.ndarray        # r^2
    q0: np.ndarray         # r^2 V(r), inside formula


_grid_cache: OrderedDict = OrderedDict()
_GRID_CACHE_POINTS = 4_000_000     # about 100 MB of radial arrays
_grid_lock = threading.Lock()


def _log_grid(pot: RadialPotential, n: int) -> _LogGrid:
    key = (id(pot), pot, n)
    with _grid_lock:
        g = _grid_cache.get(key)
        if g is not None and g[0] is pot:
            _grid_cache.move_to_end(key)
            return g[1]
    R = pot.r_cut
    x0 = math.log(START_FRACTION * R)
    dx = (math.log(R) - x0) / n
    x = x0 + dx * np.arange(n + 2)
    x[n] = math.log(R)
    r = np.exp(x)
    r[n] = R
    e2x = r * r
    q0 = e2x * pot.interior(r)
    grid = _LogGrid(x0, dx, n, r, e2x, q0)
    with _grid_lock:
        _grid_cache[key] = (pot, grid)
        total = sum(v[1].n for v in _grid_cache.values())
        while total > _GRID_CACHE_POINTS and len(_grid_cache) > 1:
            _, (_, old) = _grid_cache.popitem(last=False)
            total -= old.n
    return grid


def _base_steps(pot: RadialPotential) -> int:
    return int(math.ceil(-math.log(START_FRACTION) / DX_MAX))


def _steps_for(pot: RadialPotential, ell: int, lam: float,
               resolution: float = PHASE_RESOLUTION) -> int:
    """Smallest n = n_base * 2**j whose step resolves the oscillation.

    In x = ln r the local frequency is at most sqrt(ell^2 + r^2 (lam - V)),
    which peaks at r_cut. Powers of two keep every energy of one level on a
    shared grid.
    """
    n = _base_steps(pot)
    span = -math.log(START_FRACTION)
    omega = math.hypot(ell, pot.r_cut * math.sqrt(max(lam, 0.0) + pot.depth_scale))
    while span / n * omega > resolution:
        n *= 2
    return n


def _level_top(pot: RadialPotential, ell: int, n: int,
               resolution: float = PHASE_RESOLUTION) -> float:
    """Largest energy whose oscillation a grid of n steps resolves at r_cut."""
    span = -math.log(START_FRACTION)
    w = resolution * n / span
    return max(((w * w - ell * ell) / pot.r_cut ** 2) - pot.depth_scale, 0.0)


def _plan(pot: RadialPotential, ell: int, n: int, lam_top: float, dx_cap: float = DX_MAX):
    """Coarsest start stride and the fine indices where the stride halves.

    The fine step suits the oscillation at r_cut for energy ``lam_top``; a
    stride s is kept while the local frequency at r is at most 1/s of the one
    at r_cut, so the phase advance per step stays roughly constant. No
    stride exceeds ``dx_cap`` in x, which bounds the error where V varies.
    """
    span = -math.log(START_FRACTION)
    dx = span / n
    x0 = math.log(START_FRACTION * pot.r_cut)
    n_base = _base_steps(pot)
    pow2 = n // n_base
    a = lam_top + pot.depth_scale
    w_r = math.hypot(ell, pot.r_cut * math.sqrt(a))

    def r_max(st):
        t = (w_r / st) ** 2 - ell * ell
        return math.sqrt(t / a) if t > 0 else 0.0

    r0 = START_FRACTION * pot.r_cut
    st0 = 1
    while (2 * st0 <= pow2 and 2 * st0 * dx <= dx_cap * (1 + 1e-9)
           and r_max(2 * st0) > r0):
        st0 *= 2
    breaks = []
    st, prev = st0, 0
    while st > 1:
        rm = r_max(st)
        b = int(math.floor((math.log(rm) - x0) / dx)) if rm > 0 else 0
        b = max((b // st) * st, prev + 6 * st)
        if b > n - 6:
            raise RadialError(f"cannot build stride plan (ell={ell}, n={n})")
        breaks.append(b)
        prev, st = b, st // 2
    return st0, np.array(breaks, dtype=np.int64)


def _start_values(pot, grid, ell, lams, i1):
    """f at grid indices 0 and ``i1`` from the Bessel series of a flat core."""
    lams = np.asarray(lams, dtype=float)
    q = lams - pot.value_at_origin()
    out = []
    for i in (0, i1):
        r = grid.r[i]
        z = -0.25 * q * r * r
        term = np.ones_like(q)
        s = np.ones_like(q)
        for j in range(1, 4):
            term = term * z / (j * (ell + j))
            s = s + term
        out.append((r / grid.r[0]) ** ell * s)
    return out[0], out[1]


def _sweep(pot, ell, lams, n, lam_top=None, dx_cap=DX_MAX):
    """Run the Numerov kernel; return (f(R), f'(R), interior node count)."""
    grid = _log_grid(pot, n)
    lams = np.asarray(lams, dtype=float)
    if lam_top is None:
        lam_top = _level_top(pot, ell, n)
    st0, breaks = _plan(pot, ell, n, lam_top, dx_cap)
    f0, f1 = _start_values(pot, grid, ell, lams, st0)
    fb, fr, fg, nodes = _ext.numerov_sweep(grid.q0, grid.e2x, lams, float(ell * ell),
                                           grid.dx, f0, f1, st0, breaks)
    h2 = grid.dx * grid.dx / 6.0
    gb = ell * ell + grid.q0[n - 1] - grid.e2x[n - 1] * lams
    gg = ell * ell + grid.q0[n + 1] - grid.e2x[n + 1] * lams
    fx = ((1.0 - h2 * gg) * fg - (1.0 - h2 * gb) * fb) / (2.0 * grid.dx)
    R = pot.r_cut
    scale = np.hypot(fr, fx)
    scale = np.where(scale > 0, scale, 1.0)
    return fr / scale, fx / (R * scale), np.asarray(nodes, dtype=np.int64)


# --------------------------------------------------------------------------
# single-channel operations
# --------------------------------------------------------------------------

@dataclass
class ChannelSolution:
    """Regular solution data at r_cut for one channel and energy."""

    ell: int
    lam: float
    f: float               # f(r_cut), normalised with f'(r_cut)
    df: float              # f'(r_cut)
    interior_nodes: int
    exterior_nodes: int    # only at lam == 0; zero otherwise
    steps: int
    change: float          # relative change of beta under the last halving
    r_cut: float

    @property
    def beta(self) -> float:
        """Log-derivative u'/u of the reduced solution u = sqrt(r) f at r_cut."""
        return self.df / self.f + 0.5 / self.r_cut

    @property
    def beta_full(self) -> float:
        """Log-derivative f'/f of the full radial function at r_cut."""
        return self.df / self.f

    @property
    def node_count(self) -> int:
        return self.interior_nodes + self.exterior_nodes


def exterior_coefficients(ell: int, f: float, df: float, R: float):
    """Zero-energy exterior fit f = c_grow * g(r) + c_decay * d(r).

    Basis ``{ln(r/R), 1}`` for ell = 0 and ``{(r/R)^ell, (r/R)^-ell}`` otherwise,
    matched to value and slope at r = R. Returns ``(c_grow, c_decay, cond)``.
    """
    if ell == 0:
        m = np.array([[0.0, 1.0], [1.0 / R, 0.0]])
    else:
        m = np.array([[1.0, 1.0], [ell / R, -ell / R]])
    # scale rows so the condition number is dimensionless
    m_s = m / np.abs(m).max(axis=1, keepdims=True)
    rhs = np.array([f, df]) / np.abs(m).max(axis=1)
    c_grow, c_decay = np.linalg.solve(m_s, rhs)
    return float(c_grow), float(c_decay), float(np.linalg.cond(m_s))


def _exterior_nodes(ell, c_grow, c_decay, f_at_R):
    if c_grow == 0.0:
        return 0
    if ell == 0:
        # B + A ln(r/R) vanishes at ln(r/R) = -B/A
        return 1 if -c_decay / c_grow > 0 or f_at_R == 0.0 else 0
    return 1 if -c_decay / c_grow >= 1.0 else 0


def integrate_channel(pot: RadialPotential, ell: int, lam: float, rtol: float = 1e-9,
                      max_steps: int = 1 << 22) -> ChannelSolution:
    """Integrate channel ``ell`` at energy ``lam`` >= 0 out to r_cut.

    The step is halved until beta changes by less than ``rtol`` (relative);
    the returned value is Richardson-corrected for the fourth-order scheme.
    At ``lam == 0`` the node count includes the zero of the exterior free
    solution, so it equals the Sturm count on the whole half-line.
    """
    if lam < 0:
        raise ValueError("energy must be non-negative")
    if ell < 0:
        raise ValueError("ell must be non-negative")
    R = pot.r_cut
    n = _steps_for(pot, ell, lam, PHASE_RESOLUTION / 4)
    cap = DX_MAX / 4
    f, df, nodes = (a[0] for a in _sweep(pot, ell, [lam], n, lam, cap))
    beta_prev = df / f
    change = math.inf
    while True:
        n2, cap = 2 * n, cap / 2
        f2, df2, nodes2 = (a[0] for a in _sweep(pot, ell, [lam], n2, lam, cap))
        if not (np.isfinite(f2) and np.isfinite(df2)):
            raise RadialError(f"non-finite solution at r_cut (ell={ell}, lam={lam})")
        beta2 = df2 / f2
        new_change = abs(beta2 - beta_prev) / max(abs(beta2), 1.0 / R)
        if new_change > 0.5 * change:
            # rounding now dominates: keep the previous, better estimate
            f2, df2, nodes2 = f, df, nodes
            f, df = f_old, df_old
            n //= 2
            break
        change = new_change
        f_old, df_old = f, df
        n = n2
        if change < rtol or n >= max_steps:
            break
        beta_prev, f, df, nodes = beta2, f2, df2, nodes2
    # Richardson on the (f, f') direction: extrapolate the angle
    ang_c = math.atan2(f, df)
    ang_f = math.atan2(f2, df2)
    d = (ang_f - ang_c + math.pi / 2) % math.pi - math.pi / 2
    ang = ang_f + d / 15.0
    fr, dfr = math.sin(ang), math.cos(ang)
    if fr * f2 < 0 or (f2 == 0 and dfr * df2 < 0):
        fr, dfr = -fr, -dfr
    ext = 0
    if lam == 0:
        cg, cd, _ = exterior_coefficients(ell, fr, dfr, R)
        ext = _exterior_nodes(ell, cg, cd, fr)
    return ChannelSolution(ell, float(lam), fr, dfr, int(nodes2), ext, n, change, R)


# --------------------------------------------------------------------------
# matching to free waves
# --------------------------------------------------------------------------

def _match(ell, k, R, f, df):
    """Return (principal delta, Pruefer offset D, J_ell, theta) at r = R.

    ``theta`` is the full angle of the matching vector (num, den); it is a
    continuous function of the energy that differs from delta by a fixed
    multiple of pi, and ``delta`` is its reduction to (-pi/2, pi/2].

    ``D = pi (N_f - N_J) + phi_f - phi_J`` is the difference of the Pruefer
    angles of the regular solution and of J_ell(k r) at R, up to the node
    counts which the caller adds. It is continuous in the energy even where
    the principal value wraps; the tabulator refines where it moves fast.
    """
    x = k * R
    J, Y = bessel_jy_table(ell + 1, x)
    jl, yl = J[ell], Y[ell]
    if ell == 0:
        jd, yd = -J[1], -Y[1]
    else:
        jd = 0.5 * (J[ell - 1] - J[ell + 1])
        yd = 0.5 * (Y[ell - 1] - Y[ell + 1])
    scale = np.hypot(f, df / k)
    fn, dn = f / scale, df / (k * scale)
    num = dn * jl - fn * jd
    den = dn * yl - fn * yd
    norm_j = np.hypot(jl, jd)
    norm_y = np.hypot(yl, yd)
    bad = (np.abs(num) < 1e-14 * norm_j) & (np.abs(den) < 1e-14 * norm_y)
    if np.any(bad):
        i = int(np.flatnonzero(np.atleast_1d(bad))[0])
        raise MatchingDegeneracyError(
            f"matching degenerate in channel {ell} at lambda={np.atleast_1d(k)[i] ** 2:.6g}")
    theta = np.arctan2(num, den)
    delta = np.where(theta > np.pi / 2, theta - np.pi, theta)
    delta = np.where(delta <= -np.pi / 2, delta + np.pi, delta)
    phi_f = np.mod(np.arctan2(fn, dn), np.pi)
    phi_j = np.mod(np.arctan2(jl, jd), np.pi)
    return delta, phi_f - phi_j, jl, theta


class _FreeZeros:
    """Counts zeros of J_ell on (0, X) from sign changes on a 0.5-spaced grid.

    Consecutive zeros of J_ell are more than 2.4 apart, so no cell can hide
    a pair of them.
    """

    STEP = 0.5

    def __init__(self, ell_max):
        self.ell_max = ell_max
        self.xmax = 0.0
        self.cum = None
        self.signs = None

    def _extend(self, xmax):
        npts = int(math.ceil(xmax / self.STEP)) + 8
        xs = self.STEP * np.arange(1, npts + 1)
        J, _ = bessel_jy_table(self.ell_max, xs)
        s = np.sign(J)
        changes = (s[:, 1:] * s[:, :-1]) < 0
        self.cum = np.concatenate([np.zeros((self.ell_max + 1, 1), dtype=np.int64),
                                   np.cumsum(changes, axis=1)], axis=1)
        self.signs = s
        self.xmax = xs[-1]

    def count(self, ell, X, j_at_x):
        X = np.asarray(X, dtype=float)
        if self.cum is None or np.max(X) >= self.xmax:
            self._extend(max(float(np.max(X)) * 1.25, 10.0))
        idx = np.floor(X / self.STEP).astype(np.int64) - 1   # last grid point below X
        out = np.zeros(X.shape, dtype=np.int64)
        have = idx >= 0
        ii = idx[have]
        out[have] = self.cum[ell, ii] + (self.signs[ell, ii] * np.sign(j_at_x[have]) < 0)
        # below the first grid point there is no zero (j_ell,1 > 2.4)
        return out


def phase_shift(pot: RadialPotential, ell: int, lam: float, rtol: float = 1e-10) -> float:
    """Principal phase shift in (-pi/2, pi/2] at a single energy lam > 0."""
    if lam <= 0:
        raise ValueError("phase_shift requires lam > 0")
    if pot.is_zero:
        return 0.0
    sol = integrate_channel(pot, ell, lam, rtol=rtol)
    delta, _, _, _ = _match(ell, math.sqrt(lam), pot.r_cut, np.array([sol.f]), np.array([sol.df]))
    return float(delta[0])


_GL16 = np.polynomial.legendre.leggauss(16)


def _composite_gauss(R, panels):
    """Nodes and weights of 16-point Gauss-Legendre on ``panels`` equal panels of [0, R]."""
    edges = np.linspace(0.0, R, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    r = (mid[:, None] + half[:, None] * _GL16[0]).ravel()
    w = (half[:, None] * _GL16[1]).ravel()
    return r, w


def born_tail(pot: RadialPotential, ell_max: int, lams) -> np.ndarray:
    """First-order sum of m_ell * delta_ell over all channels ell > ell_max.

    Uses sum_m J_|m|(x)^2 = 1, so the tail is
    -(pi/2) int_0^R V(r) [1 - J_0^2 - 2 sum_{1..ell_max} J_ell^2](kr) r dr.
    Without it the truncated determinant of S does not return to 1 at high
    energy: each channel decays, but their sum tends to a finite limit.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if pot.is_zero:
        return np.zeros_like(lams)
    R = pot.r_cut
    out = np.empty_like(lams)
    weights = np.ones(ell_max + 1) * 2.0
    weights[0] = 1.0
    k = np.sqrt(lams)
    # one 16-point panel per half-period of J_ell(kr)^2, in powers of two so
    # that neighbouring energies share nodes
    panels = np.maximum(4, 2 ** np.ceil(np.log2(k * R / np.pi + 1))).astype(int)
    for npan in np.unique(panels):
        sel = np.flatnonzero(panels == npan)
        r, w = _composite_gauss(R, int(npan))
        wv = w * pot.interior(r) * r
        for chunk in np.array_split(sel, max(1, sel.size * r.size // 200_000)):
            J, _ = bessel_jy_table(ell_max, np.outer(k[chunk], r))
            rest = 1.0 - np.einsum("l,lij->ij", weights, J * J)
            out[chunk] = -0.5 * math.pi * (rest @ wv)
    return out


# --------------------------------------------------------------------------
# phase-shift table
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyGrid:
    lam_min: float
    lam_max: float
    count: int
    spacing: str = "log"

    def __post_init__(self):
        if not (0 < self.lam_min < self.lam_max) or self.count < 2:
            raise ValueError("need 0 < lam_min < lam_max and count >= 2")
        if self.spacing != "log":
            raise ValueError("only log spacing is supported")

    def points(self) -> np.ndarray:
        return np.geomspace(self.lam_min, self.lam_max, self.count)

    @classmethod
    def for_potential(cls, pot: RadialPotential, lo: float = 1e-5, hi: float = 1e4,
                      count: int = 2048) -> "EnergyGrid":
        s = pot.depth_scale
        return cls(lo * s, hi * s, count)

    def as_dict(self) -> dict:
        return {"lam_min": self.lam_min, "lam_max": self.lam_max,
                "count": self.count, "spacing": self.spacing}


@dataclass
class PhaseShiftTable:
    """Branch-continuous phase shifts on a (possibly refined) energy grid.

    ``delta[ell, i]`` is the phase shift of channel ell at ``lam[i]``;
    ``tail[i]`` is the Born estimate of the summed channels above ``ell_max``.
    ``requested[i]`` is False for points inserted by refinement.
    """

    lam: np.ndarray
    delta: np.ndarray
    tail: np.ndarray
    ell_max: int
    grid: EnergyGrid
    requested: np.ndarray
    moment: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def multiplicities(self) -> np.ndarray:
        m = np.full(self.ell_max + 1, 2.0)
        m[0] = 1.0
        return m

    def total_phase(self) -> np.ndarray:
        """sum_ell m_ell delta_ell + tail, i.e. half the phase of det S."""
        return self.multiplicities @ self.delta + self.tail

    def channel(self, ell: int) -> np.ndarray:
        return self.delta[ell]

    def requested_view(self):
        """(lam, delta) restricted to the requested grid points."""
        return self.lam[self.requested], self.delta[:, self.requested]


def _angle_step(theta_a, theta_b):
    """Increment of the matching angle from a to b, or None if ambiguous.

    If num (the sine) keeps its sign the path stays in one half plane and
    the plain difference is right; if den (the cosine) keeps its sign the
    difference is wrapped into (-pi, pi). A narrow resonance turns the angle
    by pi between two samples, which the first case resolves without
    having to sample inside the resonance.
    """
    sa, sb = math.sin(theta_a), math.sin(theta_b)
    if sa * sb > 0:
        return theta_b - theta_a
    ca, cb = math.cos(theta_a), math.cos(theta_b)
    if ca * cb > 0:
        return (theta_b - theta_a + math.pi) % (2 * math.pi) - math.pi
    return None


class _ChannelTabulator:
    """Follows one channel down from lam_max along the matching angle.

    A step is taken as is when it is unambiguous and the Pruefer offset
    moved by less than pi/2; otherwise the interval is bisected in ln(lam).
    """

    def __init__(self, pot, ell, zeros, max_depth):
        self.pot, self.ell, self.zeros, self.max_depth = pot, ell, zeros, max_depth
        self.inserted = 0

    def evaluate(self, lams):
        """Principal delta, Pruefer offset and matching angle on an energy array."""
        lams = np.asarray(lams, dtype=float)
        p = np.empty_like(lams)
        D = np.empty_like(lams)
        th = np.empty_like(lams)
        levels = np.array([_steps_for(self.pot, self.ell, lam) for lam in lams])
        R = self.pot.r_cut
        for n in np.unique(levels):
            sel = levels == n
            f, df, nodes = _sweep(self.pot, self.ell, lams[sel], int(n))
            k = np.sqrt(lams[sel])
            d, dphi, jl, theta = _match(self.ell, k, R, f, df)
            nj = self.zeros.count(self.ell, k * R, jl)
            p[sel] = d
            D[sel] = np.pi * (nodes - nj) + dphi
            th[sel] = theta
        return p, D, th

    @staticmethod
    def _advance(cur, D, theta):
        """delta at the new point, or None when the interval must be split."""
        if abs(D - cur[2]) >= np.pi / 2:
            return None
        step = _angle_step(cur[3], theta)
        return None if step is None else cur[1] + step

    def run(self, lams):
        """Returns (lam, delta, theta, requested) in ascending lam."""
        p, D, th = self.evaluate(lams)
        n = len(lams)
        out = [(lams[-1], p[-1], D[-1], th[-1], True)]   # anchor in (-pi/2, pi/2]
        for i in range(n - 2, -1, -1):
            cur = out[-1]
            d_i = self._advance(cur, D[i], th[i])
            if d_i is None:
                for lam_m, d_m, D_m, t_m in self._refine(lams[i], D[i], th[i], cur[:4], 0):
                    out.append((lam_m, d_m, D_m, t_m, False))
                d_i = self._advance(out[-1], D[i], th[i])
                if d_i is None:
                    raise RefinementBudgetError(self.ell, lams[i], out[-1][0])
            out.append((lams[i], d_i, D[i], th[i], True))
        out.reverse()
        lam_o, d_o, _, t_o, req = (np.array(c) for c in zip(*out))
        return lam_o, d_o, t_o, req.astype(bool)

    def _refine(self, lam_lo, D_lo, th_lo, hi, depth):
        """Points strictly between lam_lo and hi[0], descending."""
        if depth >= self.max_depth:
            raise RefinementBudgetError(self.ell, lam_lo, hi[0])
        lam_m = math.sqrt(lam_lo * hi[0])
        _, Dm, tm = self.evaluate([lam_m])
        Dm, tm = float(Dm[0]), float(tm[0])
        self.inserted += 1
        pts = []
        d_m = self._advance(hi, Dm, tm)
        if d_m is None:
            pts.extend(self._refine(lam_m, Dm, tm, hi, depth + 1))
            d_m = self._advance(pts[-1], Dm, tm)
            if d_m is None:
                raise RefinementBudgetError(self.ell, lam_m, pts[-1][0])
        pts.append((lam_m, d_m, Dm, tm))
        if self._advance(pts[-1], D_lo, th_lo) is None:
            pts.extend(self._refine(lam_lo, D_lo, th_lo, pts[-1], depth + 1))
        return pts


def build_phase_table(pot: RadialPotential, ell_max: int, grid: EnergyGrid,
                      workers: int = 1, max_refine_depth: int = 12) -> PhaseShiftTable:
    """Tabulate delta_ell(lam) for ell = 0..ell_max on ``grid``.

    The branch is anchored in (-pi/2, pi/2] at lam_max and continued
    downward along the matching angle. Where a step is ambiguous the
    interval is bisected in ln(lam) up to ``max_refine_depth`` times.
    """
    lams = grid.points()
    moment = pot.plane_moment()
    if pot.is_zero:
        z = np.zeros((ell_max + 1, lams.size))
        return PhaseShiftTable(lams, z, np.zeros_like(lams), ell_max, grid,
                               np.ones(lams.size, dtype=bool), moment,
                               {"refined_points": 0, "backend": _ext.BACKEND})
    zeros = _FreeZeros(ell_max)
    zeros._extend(math.sqrt(grid.lam_max) * pot.r_cut * 1.25 + 10.0)

    def one(ell):
        tab = _ChannelTabulator(pot, ell, zeros, max_refine_depth)
        return tab.run(lams), tab.inserted

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, range(ell_max + 1)))
    else:
        results = [one(ell) for ell in range(ell_max + 1)]

    # merge refined points of all channels onto one common grid
    all_lam = np.unique(np.concatenate([r[0][0] for r in results]))
    delta = np.empty((ell_max + 1, all_lam.size))
    for ell, ((lam_e, d_e, t_e, _), _) in enumerate(results):
        missing = np.setdiff1d(all_lam, lam_e)
        if not missing.size:
            delta[ell] = d_e
            continue
        pm, _, tm = _ChannelTabulator(pot, ell, zeros, max_refine_depth).evaluate(missing)
        pos = np.searchsorted(lam_e, missing)
        d_new = np.empty(missing.size)
        for j in range(missing.size):
            # continue from the neighbour above (or below at the top end)
            nb = min(pos[j], lam_e.size - 1)
            step = _angle_step(t_e[nb], tm[j])
            if step is None and pos[j] > 0:
                nb = pos[j] - 1
                step = _angle_step(t_e[nb], tm[j])
            if step is None:
                step = pm[j] - d_e[nb]
                step -= np.pi * np.round(step / np.pi)
            d_new[j] = d_e[nb] + step
        lam_join = np.concatenate([lam_e, missing])
        delta[ell] = np.concatenate([d_e, d_new])[np.argsort(lam_join)]
    requested = np.isin(all_lam, lams)
    tail = born_tail(pot, ell_max, all_lam)
    inserted = int(sum(r[1] for r in results))
    return PhaseShiftTable(all_lam, delta, tail, ell_max, grid, requested, moment,
                           {"refined_points": inserted, "backend": _ext.BACKEND})


# --------------------------------------------------------------------------
# zero energy: thresholds and bound-state counting
# --------------------------------------------------------------------------

CLASS_NAMES = {0: "s_resonance", 1: "p_resonance"}


@dataclass
class ThresholdClass:
    """Zero-energy behaviour of one channel outside the support of V.

    ``c_grow`` multiplies ln(r/R) (ell = 0) or (r/R)^ell; ``c_decay``
    multiplies 1 or (R/r)^ell.
    """

    ell: int
    kind: str
    c_grow: float
    c_decay: float
    confidence: float
    condition: float
    r_cut: float

    @property
    def regular(self) -> bool:
        return self.kind == "regular"

    def crossover_energy(self) -> float:
        """Energy below which the decaying branch stops dominating at r_cut.

        Near a threshold the zero-energy solution is mostly the decaying
        branch; the energy correction to it is of relative size lam R^2,
        so the growing part takes over below about |c_grow / c_decay| / R^2.
        """
        R = self.r_cut
        if self.c_decay == 0.0:
            return math.inf
        if self.ell == 0:
            if self.c_grow == 0.0:
                return 0.0
            arg = 2.0 * (self.c_decay / self.c_grow - 0.57721566490153286)
            return 4.0 / R ** 2 * math.exp(min(arg, 700.0))
        return abs(self.c_grow / self.c_decay) / R ** 2

    def near_threshold(self, lam_min: float, margin: float = NEAR_THRESHOLD_MARGIN) -> bool:
        """True when the channel is regular but its crossover is not resolved.

        Only ell >= 1 is flagged: for ell = 0 the logarithmic approach to the
        low-energy limit is handled by the endpoint extrapolation.
        """
        if not self.regular or self.ell == 0:
            return False
        return self.crossover_energy() < margin * lam_min

    def as_dict(self) -> dict:
        return {"ell": self.ell, "class": self.kind, "c_grow": self.c_grow,
                "c_decay": self.c_decay, "confidence": self.confidence,
                "condition": self.condition}


def _classify(ell, f, df, R, tau):
    cg, cd, cond = exterior_coefficients(ell, f, df, R)
    if cond > 1e8:
        raise FitConditioningError(f"exterior fit condition number {cond:.3g} in channel {ell}")
    denom = abs(cg) + abs(cd)
    conf = abs(cg) / denom if denom > 0 else 1.0
    if conf < tau:
        kind = CLASS_NAMES.get(ell, "zero_eigenvalue")
    else:
        kind = "regular"
    return ThresholdClass(ell, kind, cg, cd, conf, cond, R)


def classify_threshold(pot: RadialPotential, ell_max: int, tau: float = TAU_RES,
                       solutions=None) -> list:
    """Classify every channel 0..ell_max at zero energy."""
    out = []
    for ell in range(ell_max + 1):
        if pot.is_zero:
            # free solution: 1 and (r/R)^ell are the pure growing branch
            out.append(ThresholdClass(ell, "regular", 1.0, 0.0, 1.0, 1.0, pot.r_cut))
            continue
        sol = solutions[ell] if solutions is not None else integrate_channel(pot, ell, 0.0, rtol=1e-10)
        out.append(_classify(ell, sol.f, sol.df, pot.r_cut, tau))
    return out


@dataclass
class SpectralCount:
    """Negative eigenvalues per channel plus zero-energy eigenvalue flags."""

    nodes: list                 # N_ell
    zero_flags: list            # 1 if channel ell >= 2 has a zero-energy eigenvalue
    thresholds: list            # ThresholdClass per channel
    oracle: list | None = None  # dense-matrix counts, when checked

    @property
    def total(self) -> int:
        return int(sum(multiplicity(ell) * (n + z)
                       for ell, (n, z) in enumerate(zip(self.nodes, self.zero_flags))))

    @property
    def negative_total(self) -> int:
        return int(sum(multiplicity(ell) * n for ell, n in enumerate(self.nodes)))

    @property
    def p_dim(self) -> int:
        """Dimension of the p-resonance space: both ell = +-1 waves or none."""
        th = self.thresholds
        return 2 if len(th) > 1 and th[1].kind == "p_resonance" else 0

    def as_dict(self) -> dict:
        return {"total": self.total, "nodes": list(self.nodes),
                "zero_flags": list(self.zero_flags), "p_dim": self.p_dim,
                "oracle": None if self.oracle is None else list(self.oracle)}


class OracleMismatchError(RadialError):
    """Sturm node count and dense-matrix count disagree."""


def channel_bound_count(pot: RadialPotential, ell: int, tau: float = TAU_RES):
    """(negative eigenvalues in channel ell, its ThresholdClass)."""
    if pot.is_zero:
        return 0, classify_threshold(pot, ell, tau)[ell]
    sol = integrate_channel(pot, ell, 0.0, rtol=1e-10)
    tc = _classify(ell, sol.f, sol.df, pot.r_cut, tau)
    return int(sol.interior_nodes + (sol.exterior_nodes if tc.regular else 0)), tc


def count_bound_states(pot: RadialPotential, ell_max: int, tau: float = TAU_RES,
                       check_oracle: bool = False) -> SpectralCount:
    """Bound states from zero-energy node counts (Sturm oscillation).

    Exterior zeros of the free zero-energy continuation are included, which
    matters in the plane: a weakly bound s-state has its node far outside
    the well. At a threshold the exterior zero sits at infinity and is not
    counted; a zero-energy eigenvalue (ell >= 2) is flagged separately.
    """
    if pot.is_zero:
        th = classify_threshold(pot, ell_max, tau)
        zeros = [0] * (ell_max + 1)
        return SpectralCount(zeros, list(zeros), th, list(zeros) if check_oracle else None)
    nodes, flags, th = [], [], []
    for ell in range(ell_max + 1):
        n, tc = channel_bound_count(pot, ell, tau)
        nodes.append(n)
        flags.append(1 if tc.kind == "zero_eigenvalue" else 0)
        th.append(tc)
    if nodes[-1] or flags[-1]:
        raise RadialError(f"channel ell_max={ell_max} still binds; raise ell_max")
    oracle = None
    if check_oracle:
        oracle = dense_oracle_counts(pot, ell_max)
        for ell, (a, b) in enumerate(zip(nodes, oracle)):
            if a != b and th[ell].regular:
                raise OracleMismatchError(
                    f"channel {ell}: node count {a} but dense oracle finds {b}")
    return SpectralCount(nodes, flags, th, oracle)


def dense_oracle_counts(pot: RadialPotential, ell_max: int, points: int = 4096,
                        span: float = 4.0) -> list:
    """Negative eigenvalues per channel from a finite-element discretisation.

    Linear elements in f on [0, L], L = span * r_cut, with the weight r of the
    plane. At r = L the zero-energy exterior map f'/f = -ell/L closes the box
    (Neumann for ell = 0), so the discrete count converges to the half-line
    count rather than the Dirichlet-box one, which misses shallow s-states.
    The number of negative eigenvalues of the stiffness matrix equals that of
    the generalised problem because the mass matrix is positive definite.
    """
    L = span * pot.r_cut
    r = np.linspace(0.0, L, points + 1)
    h = r[1] - r[0]
    xg, wg = np.polynomial.legendre.leggauss(4)
    a, b = r[:-1], r[1:]
    rq = 0.5 * (a + b)[:, None] + 0.5 * h * xg
    wq = 0.5 * h * wg
    pa = (b[:, None] - rq) / h          # shape function of the left node
    pb = (rq - a[:, None]) / h
    vq = pot.evaluate(rq.ravel()).reshape(rq.shape)
    kin = 0.5 * (a + b) / h             # int r phi' phi' over an element
    counts = []
    for ell in range(ell_max + 1):
        wpot = wq * (vq * rq + (ell * ell / rq))
        m_aa = (wpot * pa * pa).sum(axis=1)
        m_bb = (wpot * pb * pb).sum(axis=1)
        m_ab = (wpot * pa * pb).sum(axis=1)
        diag = np.zeros(points + 1)
        diag[:-1] += kin + m_aa
        diag[1:] += kin + m_bb
        off = -kin + m_ab
        diag[-1] += ell
        if ell > 0:
            diag, off = diag[1:], off[1:]
        ev = eigvalsh_tridiagonal(diag, off, select="v", select_range=(-np.inf, 0.0))
        counts.append(int(np.sum(ev < 0)))
    return counts
