import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levinson2d.potentials import (
    PotentialFileError,
    RadialPotential,
    gaussian,
    load_tabulated,
    save_tabulated,
    square_well,
    tabulated,
    zero_potential,
)


def test_square_well_shape():
    p = square_well(3.0, 2.0)
    assert p.r_cut == 2.0
    assert p.evaluate(0.0) == -3.0
    assert p.evaluate(1.999) == -3.0
    assert p.evaluate(2.0) == 0.0
    assert p.plane_moment() == pytest.approx(-math.pi * 3.0 * 4.0)
    assert p.depth_scale == 3.0


def test_gaussian_cutoff_and_moment():
    p = gaussian(5.0, 0.5)
    assert p.r_cut == pytest.approx(4.0)
    assert p.evaluate(p.r_cut * 1.01) == 0.0
    assert p(0.0) == -5.0
    assert p.plane_moment() == pytest.approx(-math.pi * 5.0 * 0.25)


def test_zero_potential():
    z = zero_potential()
    assert z.is_zero and z.plane_moment() == 0.0
    assert np.all(z.evaluate(np.linspace(0, 3, 7)) == 0.0)
    assert square_well(0.0).is_zero


def test_invalid_construction():
    with pytest.raises(ValueError):
        RadialPotential("cosine")
    with pytest.raises(ValueError):
        RadialPotential("square_well", 1.0, 1.0, -1.0)
    with pytest.raises(ValueError):
        square_well(1.0).evaluate(-0.1)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.1, max_value=50.0), st.floats(min_value=0.3, max_value=3.0))
def test_tabulated_moment_matches_analytic(depth, sigma):
    g = gaussian(depth, sigma)
    r = np.linspace(0.0, g.r_cut, 4001)
    v = g.interior(r)
    v[-1] = 0.0
    t = tabulated(r, v)
    assert t.plane_moment() == pytest.approx(g.plane_moment(), rel=1e-6)
    assert t.value_at_origin() == pytest.approx(-depth)


def test_round_trip(tmp_path):
    g = gaussian(2.0)
    path = tmp_path / "v.dat"
    save_tabulated(path, g, n=2000)
    t = load_tabulated(path)
    assert t.kind == "tabulated"
    assert t.r_cut == pytest.approx(g.r_cut)
    r = np.linspace(0, 3, 13)
    assert np.allclose(t.evaluate(r), g.evaluate(r), atol=1e-8)
    assert "gaussian" in path.read_text().splitlines()[0]


def test_square_well_file_keeps_the_jump(tmp_path):
    path = tmp_path / "sq.dat"
    save_tabulated(path, square_well(4.0), n=500)
    t = load_tabulated(path)
    assert t.plane_moment() == pytest.approx(-4.0 * math.pi, rel=1e-6)


@pytest.mark.parametrize("content, needle", [
    ("0 1\n1 2\n2 3\n", "four"),
    ("0 -1\n1 -1\n0.5 -1\n2 0\n", "increasing"),
    ("0 -1\n1 -1\n2 -1\n3 -1\n", "vanish"),
    ("0 -1 7\n1 -1 7\n2 -1 7\n3 0 7\n", "two columns"),
    ("0 -1\n1 x\n", "bad.dat"),
])
def test_malformed_files(tmp_path, content, needle):
    path = tmp_path / "bad.dat"
    path.write_text(content)
    with pytest.raises(PotentialFileError, match=needle):
        load_tabulated(path)


def test_missing_file(tmp_path):
    with pytest.raises(PotentialFileError):
        load_tabulated(tmp_path / "nope.dat")


def test_describe_is_plain():
    d = gaussian(1.5).describe()
    assert d == {"kind": "gaussian", "depth": 1.5, "width": 1.0, "r_cut": 8.0}
