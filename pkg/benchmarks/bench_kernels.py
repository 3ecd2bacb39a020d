#!/usr/bin/env python3
"""Time the compiled Numerov kernel against the numpy fallback.

Two workloads are measured for each backend:

* ``kernel``: a single ``numerov_sweep`` call on the production log grid of
  a potential, for a block of energies, with the real stride plan;
* ``table``: a full ``build_phase_table`` run, with the radial engine's
  kernel swapped in place.

Example:
    python3 benchmarks/bench_kernels.py --depth 20 --energies 256 --repeat 5
    python3 benchmarks/bench_kernels.py --json bench.json --table-count 512
"""

import argparse
import json
import platform
import statistics
import sys
import time

import numpy as np

from levinson2d import EnergyGrid, _ext, build_phase_table, gaussian, square_well
from levinson2d._ext import _fallback
from levinson2d import radial_engine as re_

try:
    from levinson2d._ext import _numerov
except ImportError:
    _numerov = None


def kernel_inputs(pot, ell, n_energies):
    lams = np.geomspace(1e-5, 1e4, n_energies) * pot.depth_scale
    n = re_._steps_for(pot, ell, float(lams[-1]))
    grid = re_._log_grid(pot, n)
    st0, breaks = re_._plan(pot, ell, n, re_._level_top(pot, ell, n))
    f0, f1 = re_._start_values(pot, grid, ell, lams, st0)
    return (grid.q0, grid.e2x, lams, float(ell * ell), grid.dx, f0, f1, st0, breaks), n


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times), out


def bench_kernel(backends, pot, ells, n_energies, repeat):
    rows = []
    for ell in ells:
        args, n = kernel_inputs(pot, ell, n_energies)
        results = {}
        for name, sweep in backends.items():
            best, med, out = best_of(lambda: sweep(*args), repeat)
            results[name] = out
            rows.append({"workload": "kernel", "backend": name, "ell": ell, "grid_steps": n,
                         "energies": n_energies, "best_s": best, "median_s": med})
        if len(results) == 2:
            a, b = results.values()
            dev = max(float(np.max(np.abs(x - y) / np.maximum(np.abs(x), 1e-300)))
                      for x, y in zip(a[:3], b[:3]))
            rows[-1]["max_rel_deviation"] = dev
            rows[-1]["nodes_equal"] = bool(np.array_equal(a[3], b[3]))
    return rows


def bench_table(backends, pot, ell_max, count, repeat):
    rows = []
    saved = _ext.numerov_sweep
    grid = EnergyGrid.for_potential(pot, count=count)
    tables = {}
    try:
        for name, sweep in backends.items():
            _ext.numerov_sweep = sweep
            re_._grid_cache.clear()
            best, med, tab = best_of(lambda: build_phase_table(pot, ell_max, grid), repeat)
            tables[name] = tab
            rows.append({"workload": "table", "backend": name, "ell_max": ell_max,
                         "energies": count, "best_s": best, "median_s": med})
    finally:
        _ext.numerov_sweep = saved
    if len(tables) == 2:
        a, b = tables.values()
        same_grid = a.lam.shape == b.lam.shape and np.array_equal(a.lam, b.lam)
        rows[-1]["max_abs_delta_deviation"] = (
            float(np.max(np.abs(a.delta - b.delta))) if same_grid else None)
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--potential", choices=["square_well", "gaussian"], default="square_well")
    p.add_argument("--depth", type=float, default=20.0)
    p.add_argument("--ells", type=int, nargs="+", default=[0, 4, 12])
    p.add_argument("--energies", type=int, default=256, help="energies per kernel call")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--table-count", type=int, default=256,
                   help="grid size for the table workload (0 skips it)")
    p.add_argument("--json", help="write the measurements to this file")
    args = p.parse_args(argv)

    backends = {"python": _fallback.numerov_sweep}
    if _numerov is not None:
        backends["cython"] = _numerov.numerov_sweep
    else:
        print("compiled kernel not built; timing the fallback only", file=sys.stderr)

    pot = square_well(args.depth) if args.potential == "square_well" else gaussian(args.depth)
    rows = bench_kernel(backends, pot, args.ells, args.energies, args.repeat)
    if args.table_count:
        rows += bench_table(backends, pot, 12, args.table_count, max(1, args.repeat // 2))

    print(f"{'workload':8} {'backend':8} {'detail':>22} {'best [s]':>10} {'median [s]':>11}")
    for r in rows:
        detail = (f"ell={r['ell']} n={r['grid_steps']}" if r["workload"] == "kernel"
                  else f"ell_max={r['ell_max']} N={r['energies']}")
        print(f"{r['workload']:8} {r['backend']:8} {detail:>22} {r['best_s']:10.4f} {r['median_s']:11.4f}")
    if "cython" in backends:
        for work in ("kernel", "table"):
            py = sum(r["best_s"] for r in rows if r["workload"] == work and r["backend"] == "python")
            cy = sum(r["best_s"] for r in rows if r["workload"] == work and r["backend"] == "cython")
            if py and cy:
                print(f"speed-up ({work}): {py / cy:.1f}x")
        devs = [r["max_rel_deviation"] for r in rows if "max_rel_deviation" in r]
        if devs:
            print(f"largest relative deviation between backends: {max(devs):.2e}")

    if args.json:
        meta = {"python": platform.python_version(), "machine": platform.machine(),
                "numpy": np.__version__, "potential": pot.describe(), "repeat": args.repeat}
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"meta": meta, "rows": rows}, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
