"""The six edge symbols of the hexagon and the winding of their determinant.

The truncated scattering matrix acts on the channels ell = 0, -1, +1, -2,
+2, ... up to ell_max, plus one lumped channel that stands for every
ell > ell_max: its phase is twice the Born tail plus tr A(lam), so the
regulariser beta is carried by that channel and det of the regularised
matrix equals det(S beta). Each edge value is a 2 x 2 block matrix over
this space.

Parametrisation (start -> end, lower left corner first):

    G1  s   -inf -> +inf   I + 1/2 (S(1) - I) (x) [[1, phi], [conj phi, 1]]
    G2  l   0 -> +inf      I + 1/2 (S(e^{2l}) - I) (x) [[1, -1], [-1, 1]]
    G3  xi  +inf -> 0      I
    G4  s   +inf -> -inf   I - (1 + 2is)^{-1} [[1, 1], [1, 1]] (x) P_p
    G5  xi  0 -> +inf      I
    G6  l   +inf -> 0      I + 1/2 (S(e^{-2l}) - I) (x) [[1, 1], [1, 1]]

Endpoints at l = +inf are the limits lam -> inf (for G2) and lam -> 0 (for
G6), where the regularised matrix is the identity.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .levinson import channel_zero_limits, regularizer_trace
from .radial_engine import PhaseShiftTable
from .threshold_algebra import PPProjection

S_SAMPLES = 512
INCONCLUSIVE_RESIDUAL = 0.1


class ExtrapolationError(ValueError):
    """An energy outside the tabulated range was requested."""


class InconclusiveWindingError(RuntimeError):
    def __init__(self, residual, budget):
        super().__init__(f"hexagon winding off-integer by {residual:.3g}; budget {budget}")
        self.residual = residual
        self.budget = budget


def phi_symbol(s: float) -> complex:
    if math.isinf(s):
        return complex(-math.copysign(1.0, s), 0.0)
    return complex(-math.tanh(math.pi * s), 1.0 / math.cosh(math.pi * s))


def vartheta_symbol(s: float) -> float:
    if math.isinf(s):
        return 0.0 if s > 0 else 1.0
    return 0.5 * (1.0 - math.tanh(math.pi * s))


def channel_labels(ell_max: int) -> list[int]:
    """Angular momenta in the order used for the truncated matrices."""
    out = [0]
    for ell in range(1, ell_max + 1):
        out += [-ell, ell]
    return out


class ScatteringProvider:
    """Regularised partial-wave phases at arbitrary energies of the table.

    Between grid points the branch-continuous phases are interpolated
    linearly in ln(lam). lam = 0 and lam = inf return the limits.
    """

    def __init__(self, table: PhaseShiftTable, thresholds=None):
        self.table = table
        self.labels = channel_labels(table.ell_max)
        self._loglam = np.log(table.lam)
        self._zero = channel_zero_limits(table, thresholds)

    @property
    def dim(self) -> int:
        return len(self.labels) + 1

    def _regularised(self, delta, tail, lam):
        ph = np.empty(self.dim)
        ph[:-1] = 2.0 * delta[np.abs(self.labels)]
        ph[-1] = 2.0 * tail + regularizer_trace(self.table.moment, lam)
        return ph

    def phases(self, lam: float) -> np.ndarray:
        """Eigenphases (lifted) of the regularised matrix, lumped channel last."""
        t = self.table
        if lam == 0.0:
            return self._regularised(self._zero, 0.0, 0.0)
        if math.isinf(lam):
            # every channel closes; the lumped channel tends to -M/2 + M/2
            return np.zeros(self.dim)
        if not (t.lam[0] * (1 - 1e-12) <= lam <= t.lam[-1] * (1 + 1e-12)):
            raise ExtrapolationError(
                f"lambda={lam:.6g} outside the table range [{t.lam[0]:.3g}, {t.lam[-1]:.3g}]")
        x = math.log(lam)
        delta = np.array([np.interp(x, self._loglam, t.delta[ell]) for ell in range(t.ell_max + 1)])
        tail = float(np.interp(x, self._loglam, t.tail))
        return self._regularised(delta, tail, lam)

    def matrix(self, lam: float) -> np.ndarray:
        return np.diag(np.exp(1j * self.phases(lam)))


def embed_p_projection(p_proj: PPProjection, dim: int) -> np.ndarray:
    """P_p placed on the ell = -1, +1 channels (positions 1 and 2)."""
    out = np.zeros((dim, dim), dtype=complex)
    if p_proj.dim:
        out[1:3, 1:3] = p_proj.matrix
    return out


EDGE_PARAMETERS = {
    1: ("s", -math.inf, math.inf),
    2: ("l", 0.0, math.inf),
    3: ("xi", math.inf, 0.0),
    4: ("s", math.inf, -math.inf),
    5: ("xi", 0.0, math.inf),
    6: ("l", math.inf, 0.0),
}


def _energy(edge: int, t: float) -> float:
    if edge == 2:
        return math.inf if math.isinf(t) else math.exp(2.0 * t)
    return 0.0 if math.isinf(t) else math.exp(-2.0 * t)


def _block(u, m2):
    n = u.shape[0]
    return np.eye(2 * n, dtype=complex) + 0.5 * np.kron(m2, u - np.eye(n))


def edge_value(edge: int, t: float, provider: ScatteringProvider,
               p_proj: PPProjection) -> np.ndarray:
    n = provider.dim
    if edge == 1:
        f = phi_symbol(t)
        return _block(provider.matrix(1.0), np.array([[1, f], [f.conjugate(), 1]]))
    if edge == 2:
        return _block(provider.matrix(_energy(2, t)), np.array([[1, -1], [-1, 1]]))
    if edge in (3, 5):
        return np.eye(2 * n, dtype=complex)
    if edge == 4:
        if math.isinf(t):
            return np.eye(2 * n, dtype=complex)
        p = embed_p_projection(p_proj, n)
        return np.eye(2 * n, dtype=complex) - np.kron(np.ones((2, 2)), p) / (1 + 2j * t)
    if edge == 6:
        return _block(provider.matrix(_energy(6, t)), np.array([[1, 1], [1, 1]]))
    raise ValueError(f"edge must be 1..6, got {edge}")


def reduced_determinant(edge: int, t: float, provider: ScatteringProvider,
                        p_dim: int) -> complex:
    if edge in (3, 5):
        return 1.0 + 0.0j
    if edge == 4:
        if p_dim == 0 or math.isinf(t):
            return 1.0 + 0.0j
        return ((2j * t - 1) / (2j * t + 1)) ** p_dim
    lam = 1.0 if edge == 1 else _energy(edge, t)
    return complex(np.exp(1j * provider.phases(lam).sum()))


def edge_determinant(edge: int, t: float, provider: ScatteringProvider,
                     p_proj: PPProjection, method: str = "reduced") -> complex:
    """det of the edge value, from the closed forms or from the block matrix."""
    if method == "block":
        return complex(np.linalg.det(edge_value(edge, t, provider, p_proj)))
    if method != "reduced":
        raise ValueError("method must be 'reduced' or 'block'")
    return reduced_determinant(edge, t, provider, p_proj.dim)


def s_grid(samples: int = S_SAMPLES, reverse: bool = False) -> np.ndarray:
    """s = tan(u) for u equally spaced on [-pi/2, pi/2], endpoints at +-inf."""
    u = np.linspace(-math.pi / 2, math.pi / 2, samples)
    s = np.tan(u[1:-1])
    s = np.concatenate([[-math.inf], s, [math.inf]])
    return s[::-1] if reverse else s


@dataclass
class EdgeTrace:
    edge: int
    parameter: np.ndarray
    det: np.ndarray
    arg: np.ndarray       # accumulated unwrapped argument along the loop

    @property
    def increment(self) -> float:
        return float(self.arg[-1] - self.arg[0])


@dataclass
class HexagonTrace:
    edges: list[EdgeTrace]
    accumulated: float          # counter-clockwise argument change over the samples
    winding: int                # clockwise winding number
    residual: float
    budget: dict = field(default_factory=dict)

    @property
    def gamma4_winding(self) -> float:
        return self.edges[3].increment / (2 * math.pi)

    def max_modulus_defect(self) -> float:
        return max(float(np.max(np.abs(np.abs(e.det) - 1.0))) for e in self.edges)

    def write_csv(self, path, header: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["edge", "parameter", "re_det", "im_det", "unwrapped_arg"])
            for e in self.edges:
                for t, d, a in zip(e.parameter, e.det, e.arg):
                    w.writerow([e.edge, repr(float(t)), repr(float(d.real)),
                                repr(float(d.imag)), repr(float(a))])

    def as_dict(self) -> dict:
        return {
            "winding": self.winding,
            "accumulated_arg": self.accumulated,
            "residual": self.residual,
            "edge_windings": {str(e.edge): e.increment / (2 * math.pi) for e in self.edges},
            "budget": self.budget,
        }


def _edge_lambdas(table: PhaseShiftTable, edge: int) -> np.ndarray:
    lam = table.lam
    if edge == 2:
        inner = lam[lam > 1.0]
        return np.concatenate([[1.0], inner, [math.inf]])
    inner = lam[lam < 1.0]
    return np.concatenate([[0.0], inner, [1.0]])


def hexagon_winding(table: PhaseShiftTable, p_proj: PPProjection, thresholds=None,
                    s_samples: int = S_SAMPLES, strict: bool = True) -> HexagonTrace:
    """Traverse G1..G6 and return the winding of the determinant loop.

    Along the energy edges the argument is the lifted phase of det(S beta)
    from the table, so the stretch below lam_min (where the s-wave phase is
    still creeping toward its limit) is bridged by the channel limits rather
    than by guessing a 2 pi branch. On the other edges the argument is
    unwrapped sample by sample. The counter-clockwise total is -2 pi times
    the bound-state count; the reported winding is clockwise. The residual
    is the distance of the sampled total from that integer, i.e. what the
    final step from lam_max to infinity has to close.
    """
    prov = ScatteringProvider(table, thresholds)
    p_dim = p_proj.dim
    edges = []
    arg = float(prov.phases(1.0).sum())
    budget = {}

    # G1: constant determinant det S(1) beta(1)
    s = s_grid(s_samples)
    d1 = np.full(s.size, np.exp(1j * arg))
    edges.append(EdgeTrace(1, s, d1, np.full(s.size, arg)))

    # G2: lam = e^{2l} from 1 to inf
    lam2 = _edge_lambdas(table, 2)
    ph2 = np.array([prov.phases(x).sum() for x in lam2[:-1]])
    end = ph2[-1] - (math.remainder(ph2[-1], 2 * math.pi))
    budget["high_energy_gap"] = abs(math.remainder(ph2[-1], 2 * math.pi)) / (2 * math.pi)
    ph2 = np.concatenate([ph2, [end]])
    l2 = np.where(np.isinf(lam2), math.inf, 0.5 * np.log(lam2))
    edges.append(EdgeTrace(2, l2, np.exp(1j * ph2), ph2 - ph2[0] + arg))
    arg = edges[-1].arg[-1]

    # G3: identity
    edges.append(EdgeTrace(3, np.array([math.inf, 0.0]), np.ones(2, dtype=complex),
                           np.full(2, arg)))

    # G4: ((2is - 1)/(2is + 1))^p from s = +inf to -inf
    s4 = s_grid(s_samples, reverse=True)
    d4 = np.array([reduced_determinant(4, x, prov, p_dim) for x in s4])
    a4 = np.unwrap(np.angle(d4))
    edges.append(EdgeTrace(4, s4, d4, a4 - a4[0] + arg))
    arg = edges[-1].arg[-1]

    # G5: identity
    edges.append(EdgeTrace(5, np.array([0.0, math.inf]), np.ones(2, dtype=complex),
                           np.full(2, arg)))

    # G6: lam = e^{-2l} from 0 to 1
    lam6 = _edge_lambdas(table, 6)
    ph6 = np.array([prov.phases(x).sum() for x in lam6])
    l6 = np.where(lam6 == 0.0, math.inf, -0.5 * np.log(np.where(lam6 > 0, lam6, 1.0)))
    edges.append(EdgeTrace(6, l6, np.exp(1j * ph6), ph6 - ph6[0] + arg))
    budget["low_energy_bridge"] = abs(ph6[1] - ph6[0]) / (2 * math.pi)

    # the closing step lam_max -> inf is the only one not backed by data;
    # leaving it out makes the off-integer residual a measurement
    closing = float(edges[1].arg[-1] - edges[1].arg[-2])
    total = float(edges[-1].arg[-1] - edges[0].arg[0]) - closing
    wind_ccw = total / (2 * math.pi)
    winding = -int(round(wind_ccw))
    residual = abs(wind_ccw + winding)
    budget.update({f"edge_{e.edge}": e.increment / (2 * math.pi) for e in edges})
    trace = HexagonTrace(edges, total, winding, residual, budget)
    if strict and residual > INCONCLUSIVE_RESIDUAL:
        raise InconclusiveWindingError(residual, budget)
    return trace


def vertex_gaps(provider: ScatteringProvider, p_proj: PPProjection) -> list[float]:
    """max |difference| between consecutive edge endpoint values, six vertices."""
    ends = []
    for edge, (_, a, b) in EDGE_PARAMETERS.items():
        ends.append((edge_value(edge, a, provider, p_proj), edge_value(edge, b, provider, p_proj)))
    return [float(np.max(np.abs(ends[i][1] - ends[(i + 1) % 6][0]))) for i in range(6)]


def radial_p_projection(thresholds) -> PPProjection:
    """For a radial potential a p-resonance occupies both ell = -1 and +1."""
    if len(thresholds) > 1 and thresholds[1].kind == "p_resonance":
        return PPProjection.full()
    return PPProjection.zero()
