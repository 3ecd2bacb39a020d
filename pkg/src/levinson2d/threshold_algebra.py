"""Finite-dimensional algebra around the zero-energy threshold.

Conventions: ``inner(a, b)`` is antilinear in its first argument and
``ket_bra(a, b)`` is the rank-one map x -> inner(b, x) a. Two-component
objects are written in the ordered basis (xi_{-1}, xi_{+1}) of the ell = -1
and ell = +1 angular waves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEPENDENCE_RTOL = 1e-8
DEGENERACY_RTOL = 1e-12


class DegeneracyError(ValueError):
    """The two vectors are (numerically) linearly dependent."""


def inner(a, b) -> complex:
    return complex(np.vdot(a, b))


def ket_bra(a, b) -> np.ndarray:
    return np.outer(a, np.conj(b))


def rank2_pseudo_inverse(phi, psi, c: complex = 1.0) -> np.ndarray:
    """Closed-form inverse of T = |phi><phi| + c |psi><psi| on its range.

    The result satisfies T T^+ = T^+ T = projection onto span{phi, psi}, and
    <phi, T^+ phi> = 1, <psi, T^+ psi> = conj(c), with vanishing cross terms.
    """
    phi = np.asarray(phi, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    if abs(abs(c) - 1.0) > 1e-12:
        raise ValueError("c must be unimodular")
    a2 = inner(phi, phi).real
    b2 = inner(psi, psi).real
    g = inner(phi, psi)
    k = a2 * b2 - abs(g) ** 2
    if not k > DEGENERACY_RTOL * a2 * b2:
        raise DegeneracyError(f"k = {k:.3e} below {DEGENERACY_RTOL:g} * |phi|^2 |psi|^2")
    gc = g.conjugate()
    m = ((c * b2 * b2 + abs(g) ** 2) * ket_bra(phi, phi)
         - (c * b2 * g + a2 * g) * ket_bra(phi, psi)
         - (c * b2 * gc + a2 * gc) * ket_bra(psi, phi)
         + (a2 * a2 + c * abs(g) ** 2) * ket_bra(psi, psi))
    return m / (c * k * k)


def rank1_pseudo_inverse(phi) -> np.ndarray:
    """Inverse of |phi><phi| on its range: |phi><phi| / |phi|^4."""
    phi = np.asarray(phi, dtype=complex)
    n2 = inner(phi, phi).real
    if n2 == 0.0:
        raise DegeneracyError("zero vector has no rank-one inverse")
    return ket_bra(phi, phi) / (n2 * n2)


@dataclass(frozen=True)
class QPair:
    """Two vectors Q1, Q2 of a common dimension, with their degeneracies."""

    q1: np.ndarray
    q2: np.ndarray

    def __post_init__(self):
        q1 = np.atleast_1d(np.asarray(self.q1, dtype=complex))
        q2 = np.atleast_1d(np.asarray(self.q2, dtype=complex))
        if q1.ndim != 1 or q1.shape != q2.shape or q1.size < 1:
            raise ValueError("Q1 and Q2 must be vectors of one common dimension")
        object.__setattr__(self, "q1", q1)
        object.__setattr__(self, "q2", q2)

    @property
    def n(self) -> int:
        return int(self.q1.size)

    @property
    def q1_zero(self) -> bool:
        return not np.any(self.q1)

    @property
    def q2_zero(self) -> bool:
        return not np.any(self.q2)

    def ratio(self):
        """alpha with Q2 = alpha Q1 when the pair is dependent, else None."""
        if self.q1_zero or self.q2_zero:
            return None
        n1 = inner(self.q1, self.q1).real
        alpha = inner(self.q1, self.q2) / n1
        resid = np.linalg.norm(self.q2 - alpha * self.q1) / np.linalg.norm(self.q2)
        return alpha if resid < DEPENDENCE_RTOL else None

    @property
    def dependent(self) -> bool:
        return self.ratio() is not None


@dataclass(frozen=True)
class PPProjection:
    """Orthogonal projection in span{xi_-1, xi_+1} and its rank."""

    matrix: np.ndarray
    dim: int

    def check(self, tol: float = 1e-12) -> None:
        m = self.matrix
        if np.abs(m @ m - m).max() > tol or np.abs(m - m.conj().T).max() > tol:
            raise AssertionError("not an orthogonal projection")
        if abs(np.trace(m).real - self.dim) > 1e-10:
            raise AssertionError("trace differs from the stated rank")

    @classmethod
    def zero(cls) -> "PPProjection":
        return cls(np.zeros((2, 2), dtype=complex), 0)

    @classmethod
    def full(cls) -> "PPProjection":
        return cls(np.eye(2, dtype=complex), 2)


def build_p_projection(q: QPair) -> PPProjection:
    """The p-resonance projection attached to a pair (Q1, Q2)."""
    if q.q1_zero and q.q2_zero:
        return PPProjection.zero()
    if q.q1_zero:
        return PPProjection(0.5 * np.array([[1, -1], [-1, 1]], dtype=complex), 1)
    if q.q2_zero:
        return PPProjection(0.5 * np.array([[1, 1], [1, 1]], dtype=complex), 1)
    alpha = q.ratio()
    if alpha is not None:
        ac = alpha.conjugate()
        v = np.array([1 + 1j * ac, 1 - 1j * ac]) / math.sqrt(2 * (1 + abs(alpha) ** 2))
        return PPProjection(ket_bra(v, v), 1)
    return PPProjection.full()


def resonance_projection_bruteforce(q: QPair) -> np.ndarray:
    """-1/2 G* T^+ G with G = |Q1 - iQ2><xi_-1| + |Q1 + iQ2><xi_+1|.

    T = |Q1><Q1| + |Q2><Q2| is inverted on its range with the rank-two
    formula, falling back to the rank-one inverse when the pair is
    dependent. The result should equal minus the p-resonance projection.
    """
    if q.q1_zero and q.q2_zero:
        raise ValueError("Q1 and Q2 both vanish")
    g = np.column_stack([q.q1 - 1j * q.q2, q.q1 + 1j * q.q2])
    if q.q1_zero or q.q2_zero:
        tinv = rank1_pseudo_inverse(q.q2 if q.q1_zero else q.q1)
    else:
        alpha = q.ratio()
        if alpha is None:
            try:
                tinv = rank2_pseudo_inverse(q.q1, q.q2, 1.0)
            except DegeneracyError:
                alpha = inner(q.q1, q.q2) / inner(q.q1, q.q1).real
        if alpha is not None:
            # T = (1 + |alpha|^2) |Q1><Q1|
            tinv = rank1_pseudo_inverse(q.q1) / (1 + abs(alpha) ** 2)
    return -0.5 * g.conj().T @ tinv @ g


def block_unitary_embed_det(u, c: complex = 1.0):
    """B = 1 + 1/2 (U - 1) (x) [[1, c], [conj c, 1]] and det B (= det U)."""
    u = np.atleast_2d(np.asarray(u, dtype=complex))
    n = u.shape[0]
    if u.shape != (n, n):
        raise ValueError("U must be square")
    if np.abs(u.conj().T @ u - np.eye(n)).max() > 1e-12:
        raise ValueError("U must be unitary to 1e-12")
    if abs(abs(c) - 1.0) > 1e-12:
        raise ValueError("c must be unimodular")
    m2 = np.array([[1, c], [np.conj(c), 1]], dtype=complex)
    b = np.eye(2 * n, dtype=complex) + 0.5 * np.kron(m2, u - np.eye(n))
    return b, complex(np.linalg.det(b))


def gamma4_det(s: float, p_dim: int) -> complex:
    """((2is - 1) / (2is + 1))^p_dim, with limit 1 at s = +-inf."""
    if p_dim not in (0, 1, 2):
        raise ValueError("p_dim must be 0, 1 or 2")
    if p_dim == 0 or math.isinf(s):
        return 1.0 + 0.0j
    z = (2j * s - 1) / (2j * s + 1)
    return z ** p_dim
