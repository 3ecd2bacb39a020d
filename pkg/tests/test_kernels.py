import importlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levinson2d import _ext
from levinson2d._ext import _fallback

try:
    from levinson2d._ext import _numerov
except ImportError:  # extension not built
    _numerov = None

BACKENDS = [pytest.param(_fallback.numerov_sweep, id="python")]
if _numerov is not None:
    BACKENDS.append(pytest.param(_numerov.numerov_sweep, id="cython"))

needs_ext = pytest.mark.skipif(_numerov is None, reason="compiled kernel not built")


def _problem(rng, size=202, m=5):
    x = np.linspace(-4.0, 0.0, size)
    e2x = np.exp(2 * x)
    q0 = -rng.uniform(0.5, 20.0) * e2x * np.exp(-e2x)
    lams = rng.uniform(0.0, 30.0, m)
    return q0, e2x, lams, x[1] - x[0]


@pytest.mark.parametrize("sweep", BACKENDS)
def test_exponential_solution(sweep):
    # g = kappa^2 everywhere: f = exp(kappa x) up to O(h^4)
    n = 401
    dx = 0.01
    kappa = 1.3
    q0 = np.full(n, kappa ** 2)
    e2x = np.zeros(n)
    f_b, f_n, f_g, nodes = sweep(q0, e2x, np.array([0.0]), 0.0, dx, [1.0], [np.exp(kappa * dx)])
    xn = (n - 2) * dx
    assert f_n[0] == pytest.approx(np.exp(kappa * xn), rel=1e-8)
    assert f_g[0] / f_n[0] == pytest.approx(np.exp(kappa * dx), rel=1e-10)
    assert nodes[0] == 0


@pytest.mark.parametrize("sweep", BACKENDS)
def test_oscillator_node_count(sweep):
    # g = -w^2: f = sin(w x), nodes at multiples of pi / w
    n, dx, w = 2002, 0.005, 7.0
    q0 = np.zeros(n)
    e2x = np.ones(n)
    _, f_n, _, nodes = sweep(q0, e2x, np.array([w * w]), 0.0, dx, [0.0], [np.sin(w * dx)])
    x_end = (n - 2) * dx
    assert nodes[0] == int(x_end * w / np.pi)
    assert f_n[0] == pytest.approx(np.sin(w * x_end), abs=1e-6)


@needs_ext
@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1), st.sampled_from([1, 2, 4]),
       st.integers(min_value=0, max_value=6))
def test_backends_agree(seed, stride0, ell):
    rng = np.random.default_rng(seed)
    q0, e2x, lams, dx = _problem(rng)
    breaks = []
    st_, i = stride0, stride0
    # halve at the first admissible index past 40 and 80
    for target in (40, 80):
        if st_ == 1:
            break
        while i < target:
            i += st_
        breaks.append(i)
        st_ //= 2
    while st_ > 1:
        i += st_ * 6
        breaks.append(i)
        st_ //= 2
    f0 = np.full(lams.size, 1e-3)
    f1 = f0 * np.exp(ell * dx * stride0)
    a = _fallback.numerov_sweep(q0, e2x, lams, ell * ell, dx, f0, f1, stride0, breaks)
    b = _numerov.numerov_sweep(q0, e2x, lams, ell * ell, dx, f0, f1, stride0, breaks)
    for u, v in zip(a[:3], b[:3]):
        assert np.allclose(u, v, rtol=1e-12, atol=0.0)
    assert np.array_equal(a[3], b[3])


@pytest.mark.parametrize("sweep", BACKENDS)
def test_invalid_plan_rejected(sweep):
    rng = np.random.default_rng(0)
    q0, e2x, lams, dx = _problem(rng)
    f = np.ones(lams.size)
    with pytest.raises(ValueError):
        sweep(q0, e2x, lams, 0.0, dx, f, f, 2, ())          # never reaches stride 1
    with pytest.raises(ValueError):
        sweep(q0, e2x, lams, 0.0, dx, f, f, 2, (4,))        # too little history
    with pytest.raises(ValueError):
        sweep(q0, e2x, lams, 0.0, dx, f, f, 1, (40,))       # stride 1 cannot halve


@pytest.mark.parametrize("sweep", BACKENDS)
def test_rescaling_keeps_ratios(sweep):
    n, dx = 10002, 0.02
    q0 = np.full(n, 16.0)                   # growth e^{4 x}: overflows without rescaling
    e2x = np.zeros(n)
    f_b, f_n, f_g, _ = sweep(q0, e2x, np.array([0.0]), 0.0, dx, [1.0], [np.exp(0.08)])
    assert np.isfinite(f_n[0])
    assert f_g[0] / f_n[0] == pytest.approx(np.exp(0.08), rel=1e-8)
    assert f_n[0] / f_b[0] == pytest.approx(np.exp(0.08), rel=1e-8)


def test_backend_selection_env():
    code = "from levinson2d import _ext; print(_ext.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"LEVINSON2D_PURE_PYTHON": "1", "PATH": ""}, check=True)
    assert out.stdout.strip() == "python"
    assert _ext.BACKEND in ("python", "cython")
    assert importlib.import_module("levinson2d").BACKEND == _ext.BACKEND


def test_benchmark_script_runs(tmp_path):
    script = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    out = tmp_path / "bench.json"
    subprocess.run([sys.executable, str(script), "--ells", "0", "--energies", "8", "--repeat", "1",
                    "--table-count", "0", "--json", str(out)], check=True, capture_output=True)
    rows = json.loads(out.read_text())["rows"]
    assert {r["backend"] for r in rows} == {"python", _ext.BACKEND} | {"python"}
    assert all(r.get("nodes_equal", True) for r in rows)
