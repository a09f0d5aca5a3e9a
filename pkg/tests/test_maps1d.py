from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singflow.errors import ExpansionError, ParameterError
from singflow.maps1d import (SQRT2, PiecewiseMap1D, affine_branch, compose, doubling_map, quotient_lorenz_map,
                             two_block_doubling, winding_map)


def test_lorenz_map_c2():
    f = quotient_lorenz_map(2.0, 0.75)
    x = np.array([1.0 - 1e-15, -1.0 + 1e-15])
    assert np.allclose(f(x), [1.0, -1.0], atol=1e-12)
    assert np.allclose(f.deriv(np.array([0.999999999, -0.999999999])), 1.5, atol=1e-8)


def test_lorenz_map_c19():
    f = quotient_lorenz_map(1.9, 0.75)
    assert abs(f.one_sided(1.0, -1) - 0.9) < 1e-15
    assert abs(f.min_slope() - 1.425) < 1e-9
    assert f.min_slope() > SQRT2


def test_lorenz_map_one_sided_limits():
    f = quotient_lorenz_map(1.9, 0.75)
    assert f.one_sided(0.0, +1) == -1.0
    assert f.one_sided(0.0, -1) == 1.0
    assert math.isnan(float(f(np.array(0.0))))


def test_lorenz_map_floor():
    with pytest.raises(ExpansionError):
        quotient_lorenz_map(1.5, 0.75, require_expanding=True)
    with pytest.raises(ParameterError):
        quotient_lorenz_map(2.5, 0.75)


def test_winding_examples():
    f = winding_map(3)
    b = f.branches
    # sorted by left end: remainder [0, 1/8), then [1/8, 1/4), [1/4, 1/2), [1/2, 1)
    assert (b[-1].lo, b[-1].hi) == (0.5, 1.0) and abs(b[-1].df(np.array([0.7]))[0] - 2.0) < 1e-15
    assert (b[1].lo, b[1].hi) == (0.125, 0.25) and abs(b[1].df(np.array([0.2]))[0] - 8.0) < 1e-12
    for br in b:
        assert np.allclose(br.image, (0.0, 1.0))


def test_winding_floor():
    with pytest.raises(ExpansionError):
        winding_map(4, base_slope=1.2)
    with pytest.raises(ParameterError):
        winding_map(1)


def test_two_block_is_union():
    f = two_block_doubling()
    x = np.array([0.1, 0.3, 0.6, 0.9])
    y = f(x)
    assert np.all((y[:2] < 0.5) & (y[2:] > 0.5))


def test_compose_affine():
    a = affine_branch(0.0, 0.5, 2.0, 0.0)
    b = affine_branch(0.0, 1.0, 3.0, -1.0)
    c = compose(b, a)
    assert c is not None
    x = np.array([0.1, 0.4])
    assert np.allclose(c.f(x), 3.0 * (2.0 * x) - 1.0)


def test_overlapping_branches_rejected():
    with pytest.raises(ParameterError):
        PiecewiseMap1D((0.0, 1.0), [affine_branch(0.0, 0.6, 2.0, 0.0), affine_branch(0.5, 1.0, 2.0, -1.0)])


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-9, 1.0 - 1e-9), st.sampled_from([1.6, 1.9, 2.0]), st.sampled_from([0.75, 0.8, 0.9]))
def test_lorenz_map_symmetry(x, c, alpha):
    f = quotient_lorenz_map(c, alpha)
    a, b = f(np.array([x, -x]))
    assert abs(a + b) < 1e-14
    assert -1.0 <= a <= 1.0


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1.0, exclude_max=True), st.integers(2, 10))
def test_winding_maps_into_domain(x, N):
    f = winding_map(N)
    y = float(f(np.array(x)))
    assert math.isnan(y) or 0.0 <= y <= 1.0


def test_doubling_orbit_reseeds():
    f = doubling_map()
    xs = f.orbit(0.25, 10)
    assert np.all((xs >= 0) & (xs <= 1))
