"""Integer-order Bessel functions on the positive real axis.

All functions accept scalars or numpy arrays for ``x`` and return values of the
same shape. Only integer orders are supported, which is all the partial-wave
expansion in the plane ever needs.

Evaluation strategy
-------------------
* ``x <= MILLER_SWITCH``: Miller backward recurrence for J_n normalised with
  ``J_0 + 2 sum J_2k = 1``; Y_0 and Y_1 from the Neumann series in the J_n.
* ``x > MILLER_SWITCH``: Hankel asymptotic expansion for orders 0 and 1.
* Higher orders from forward recurrence (always stable for Y, stable for J
  because the supported orders stay below the switch point).
* K_n from the trapezoidal rule applied to ``int_0^inf exp(-x cosh t) cosh(nt) dt``,
  which converges geometrically in the step size.
"""

from __future__ import annotations

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061
MILLER_SWITCH = 25.0
MAX_ORDER = 60

__all__ = [
    "bessel_j",
    "bessel_y",
    "bessel_j_deriv",
    "bessel_y_deriv",
    "bessel_k",
    "bessel_jy_table",
    "BesselValue",
]


class BesselDomainError(ValueError):
    """Argument outside the domain of the requested Bessel function."""


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise BesselDomainError("Bessel argument must be finite")
    return arr


def _check_order(n):
    if int(n) != n or n < 0:
        raise BesselDomainError(f"order must be a non-negative integer, got {n!r}")
    if n > MAX_ORDER:
        raise BesselDomainError(f"order {n} exceeds supported maximum {MAX_ORDER}")
    return int(n)


def _miller_j(x, nmax):
    """J_0..J_nstore for 0 < x <= MILLER_SWITCH by backward recurrence.

    Returns an array of shape (nstore + 1, len(x)) where nstore is large enough
    for the Neumann series of Y_0, Y_1 to converge.
    """
    xmax = float(np.max(x))
    nstore = max(nmax + 1, int(xmax) + 40)
    nstart = nstore + 2 * int(math.sqrt(40 * (nstore + 1))) + 20
    nstart += nstart % 2
    out = np.zeros((nstore + 1, x.size))
    jp1 = np.zeros_like(x)
    jk = np.full_like(x, 1e-300)
    norm = np.zeros_like(x)
    for k in range(nstart, 0, -1):
        jm1 = (2.0 * k / x) * jk - jp1
        if k <= nstore:
            out[k] = jk
        if k % 2 == 0:
            norm += 2.0 * jk
        jp1, jk = jk, jm1
        big = np.abs(jk) > 1e250
        if np.any(big):
            scale = np.where(big, 1e-250, 1.0)
            jk = jk * scale
            jp1 = jp1 * scale
            norm = norm * scale
            out[k - 1:] *= scale
    out[0] = jk
    norm += jk
    return out / norm


def _hankel_01(x):
    """J_0, J_1, Y_0, Y_1 for large x from the Hankel asymptotic series."""
    res = []
    for nu in (0, 1):
        mu = 4.0 * nu * nu
        p = np.ones_like(x)
        q = np.zeros_like(x)
        term = np.ones_like(x)
        z8 = 8.0 * x
        k = 1
        while k < 60:
            term = term * (mu - (2 * k - 1) ** 2) / (k * z8)
            if k % 2 == 1:
                q = q + term * (1 if (k // 2) % 2 == 0 else -1)
            else:
                p = p + term * (-1 if (k // 2) % 2 == 1 else 1)
            if np.all(np.abs(term) < 1e-17):
                break
            k += 1
        chi = x - (0.5 * nu + 0.25) * math.pi
        amp = np.sqrt(2.0 / (math.pi * x))
        res.append((amp * (p * np.cos(chi) - q * np.sin(chi)),
                    amp * (p * np.sin(chi) + q * np.cos(chi))))
    (j0, y0), (j1, y1) = res
    return j0, j1, y0, y1


def bessel_jy_table(nmax, x):
    """Return arrays ``J[n]``, ``Y[n]`` for n = 0..nmax at positive ``x``.

    The returned arrays have shape ``(nmax + 1,) + np.shape(x)``.
    """
    nmax = _check_order(nmax)
    xa = _as_array(x)
    if np.any(xa <= 0):
        raise BesselDomainError("Y_n requires x > 0")
    flat = xa.ravel()
    J = np.empty((nmax + 1, flat.size))
    Y = np.empty((nmax + 1, flat.size))

    small = flat <= MILLER_SWITCH
    if np.any(small):
        xs = flat[small]
        jt = _miller_j(xs, nmax)
        J[:, small] = jt[: nmax + 1]
        lg = np.log(0.5 * xs) + EULER_GAMMA
        kmax = (jt.shape[0] - 2) // 2
        sgn = (-1.0) ** np.arange(1, kmax + 1)
        ks = np.arange(1, kmax + 1)
        s0 = np.einsum("k,kx->x", sgn / ks, jt[2: 2 * kmax + 1: 2])
        y0 = (2.0 / math.pi) * (lg * jt[0] - 2.0 * s0)
        s1 = np.einsum("k,kx->x", sgn / ks,
                       jt[1: 2 * kmax: 2] - jt[3: 2 * kmax + 2: 2])
        y1 = (2.0 / math.pi) * (lg * jt[1] + s1) - 2.0 * jt[0] / (math.pi * xs)
        Y[0, small] = y0
        if nmax >= 1:
            Y[1, small] = y1
        for n in range(1, nmax):
            Y[n + 1, small] = (2.0 * n / xs) * Y[n, small] - Y[n - 1, small]

    large = ~small
    if np.any(large):
        xl = flat[large]
        j0, j1, y0, y1 = _hankel_01(xl)
        J[0, large], Y[0, large] = j0, y0
        if nmax >= 1:
            J[1, large], Y[1, large] = j1, y1
        for n in range(1, nmax):
            J[n + 1, large] = (2.0 * n / xl) * J[n, large] - J[n - 1, large]
            Y[n + 1, large] = (2.0 * n / xl) * Y[n, large] - Y[n - 1, large]

    shape = (nmax + 1,) + xa.shape
    return J.reshape(shape), Y.reshape(shape)


def _scalar_or_array(values, x):
    return float(values) if np.ndim(x) == 0 else values


def bessel_j(order, x):
    """Bessel function of the first kind J_order(x) for x >= 0."""
    n = _check_order(order)
    xa = _as_array(x)
    if np.any(xa < 0):
        raise BesselDomainError("bessel_j is defined here for x >= 0 only")
    out = np.where(xa == 0, 1.0 if n == 0 else 0.0, 0.0)
    pos = xa > 0
    if np.any(pos):
        J, _ = bessel_jy_table(n, xa[pos])
        out = np.array(out, dtype=float)
        out[pos] = J[n]
    return _scalar_or_array(out, x)


def bessel_y(order, x):
    """Bessel function of the second kind Y_order(x) for x > 0."""
    n = _check_order(order)
    _, Y = bessel_jy_table(n, x)
    return _scalar_or_array(Y[n], x)


def bessel_j_deriv(order, x):
    """d/dx J_order(x), from ``J_n' = (J_{n-1} - J_{n+1}) / 2``."""
    n = _check_order(order)
    xa = _as_array(x)
    if np.any(xa < 0):
        raise BesselDomainError("bessel_j_deriv requires x >= 0")
    if np.any(xa == 0):
        val = np.where(xa == 0, 0.5 if n == 1 else 0.0, 0.0)
        pos = xa > 0
        if np.any(pos):
            val = np.array(val, dtype=float)
            val[pos] = bessel_j_deriv(n, xa[pos])
        return _scalar_or_array(val, x)
    J, _ = bessel_jy_table(n + 1, xa)
    d = -J[1] if n == 0 else 0.5 * (J[n - 1] - J[n + 1])
    return _scalar_or_array(d, x)


def bessel_y_deriv(order, x):
    """d/dx Y_order(x) for x > 0."""
    n = _check_order(order)
    _, Y = bessel_jy_table(n + 1, x)
    d = -Y[1] if n == 0 else 0.5 * (Y[n - 1] - Y[n + 1])
    return _scalar_or_array(d, x)


def bessel_k(order, x):
    """Modified Bessel function of the second kind K_order(x) for x > 0."""
    n = _check_order(order)
    xa = _as_array(x)
    if np.any(xa <= 0):
        raise BesselDomainError("bessel_k requires x > 0")
    flat = xa.ravel()
    out = np.empty_like(flat)
    h = 0.05
    for i, xv in enumerate(flat):
        # integrand exp(-x cosh t + n t) is negligible once it drops below 1e-18
        # of its peak; the peak sits at sinh t = n / x
        tpk = math.asinh(n / xv) if n > 0 else 0.0
        logpk = -xv * math.cosh(tpk) + n * tpk
        tmax = tpk + 1.0
        while -xv * math.cosh(tmax) + n * tmax > logpk - 45.0:
            tmax += 1.0
        t = np.arange(0.0, tmax + h, h)
        f = np.exp(-xv * np.cosh(t) - logpk) * np.cosh(n * t)
        out[i] = h * (f.sum() - 0.5 * f[0]) * math.exp(logpk)
    return _scalar_or_array(out.reshape(xa.shape), x)


class BesselValue:
    """Value and derivative of J or Y of integer order at a positive argument."""

    __slots__ = ("order", "argument", "value", "derivative", "kind")

    def __init__(self, kind: str, order: int, argument: float):
        if kind not in ("J", "Y"):
            raise ValueError("kind must be 'J' or 'Y'")
        self.kind = kind
        self.order = _check_order(order)
        self.argument = float(argument)
        if kind == "J":
            self.value = bessel_j(order, argument)
            self.derivative = bessel_j_deriv(order, argument)
        else:
            self.value = bessel_y(order, argument)
            self.derivative = bessel_y_deriv(order, argument)

    def __repr__(self):
        return (f"BesselValue({self.kind}_{self.order}({self.argument:g}) = "
                f"{self.value:.16g}, d/dx = {self.derivative:.16g})")
