"""Pure numpy Numerov sweep, vectorised over energies."""

import numpy as np

RESCALE_AT = 1e150
# Lagrange weights for the value half a step back from the newest of six
# equally spaced samples (newest first)
HALF_STEP_WEIGHTS = np.array([63, 315, -210, 126, -45, 7]) / 256.0


def check_plan(n_end, stride0, breaks):
    """Raise ValueError unless the stride plan lands on n_end + 1 with stride 1.

    Works on the segment arithmetic only, so both kernels can reject a bad
    plan before reading past the arrays.
    """
    st = int(stride0)
    if st < 1:
        raise ValueError("invalid stride plan: stride must be positive")
    i = st
    for b in breaks:
        b = int(b)
        if b < i or b > n_end or (b - i) % st:
            raise ValueError(f"invalid stride plan: break {b} is not visited")
        if 2 + (b - i) // st < 6 or st == 1:
            raise ValueError(f"invalid stride plan: cannot halve at index {b}")
        i = b
        st //= 2
    if st != 1 or i > n_end + 1:
        raise ValueError("invalid stride plan: sweep must reach the ghost point with stride 1")


def numerov_sweep(q0, e2x, lams, ell2, dx, f0, f1, stride0=1, breaks=()):
    """Integrate f'' = g f on a uniform grid in x = ln r for many energies.

    ``g_i = ell2 + q0[i] - e2x[i] * lam`` on a fine grid of spacing ``dx``.
    The sweep starts with stride ``stride0`` (``f0``, ``f1`` are the values at
    indices 0 and ``stride0``) and halves the stride at each fine index in
    ``breaks``, restarting from a six-point interpolated half-step value.
    The grid has ``n + 2`` points where ``n`` is the matching point and
    ``n + 1`` a ghost point; the stride must be 1 when the sweep gets there.

    Returns ``(f_before, f_match, f_ghost, nodes)``, each of length
    ``len(lams)``; the three values share one arbitrary scale. ``nodes`` counts
    sign changes of f over the visited points up to index ``n``.
    """
    q0 = np.asarray(q0, dtype=float)
    e2x = np.asarray(e2x, dtype=float)
    lams = np.asarray(lams, dtype=float)
    n_end = q0.size - 2
    breaks = [int(b) for b in breaks]
    check_plan(n_end, stride0, breaks)

    def g(i):
        return ell2 + q0[i] - e2x[i] * lams

    st = int(stride0)
    i = st
    hist = [np.array(f0, dtype=float), np.array(f1, dtype=float)]
    nodes = np.zeros(lams.size, dtype=np.int64)
    last_sign = np.sign(hist[0])
    s = np.sign(hist[1])
    nodes += (s != 0) & (last_sign != 0) & (s != last_sign)
    last_sign = np.where(s != 0, s, last_sign)
    gm, gc = g(0), g(st)
    bi = 0
    while i <= n_end:
        if bi < len(breaks) and i == breaks[bi]:
            fh = sum(w * hist[-1 - j] for j, w in enumerate(HALF_STEP_WEIGHTS))
            st //= 2
            hist = [fh, hist[-1]]
            gm = g(i - st)
            bi += 1
        h12 = (dx * st) ** 2 / 12.0
        gn = g(i + st)
        fn = (2.0 * (1.0 + 5.0 * h12 * gc) * hist[-1] - (1.0 - h12 * gm) * hist[-2]) / (1.0 - h12 * gn)
        if i + st <= n_end:
            s = np.sign(fn)
            nodes += (s != 0) & (last_sign != 0) & (s != last_sign)
            last_sign = np.where(s != 0, s, last_sign)
        big = np.abs(fn) > RESCALE_AT
        if big.any():
            scale = np.where(big, 1.0 / RESCALE_AT, 1.0)
            fn = fn * scale
            hist = [h * scale for h in hist]
        hist.append(fn)
        if len(hist) > 6:
            hist.pop(0)
        gm, gc = gc, gn
        i += st
    return hist[-3], hist[-2], hist[-1], nodes
