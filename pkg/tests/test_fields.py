from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singflow.errors import CompositionError, DomainError, ParameterError
from singflow.fields import (BallRegion, BoxRegion, BumpPartition, ComplementRegion, LorenzParams, PotentialProfile,
                             blend, constant_field, fd_jacobian, linear_field, lorenz_classic, morse_smale_plane,
                             morse_smale_space, smoothstep, suspension_field, tube_field)
from singflow.zoo import glued_suspension


def rel_jac_error(F, X):
    J = F.jac(X)
    Jfd = fd_jacobian(F, X)
    scale = np.maximum(np.abs(J).max(axis=(-2, -1)), 1.0)
    return float(np.max(np.abs(J - Jfd).max(axis=(-2, -1)) / scale))


def test_lorenz_values():
    F = lorenz_classic()
    v = F.eval(np.array([1.0, 2.0, 3.0]))
    assert np.allclose(v, [10.0, 28.0 - 2.0 - 3.0, 2.0 - 8.0])
    assert np.allclose(F.eval(np.zeros(3)), 0.0)


def test_lorenz_params_rejected():
    with pytest.raises(ParameterError):
        LorenzParams(a=-1.0)
    with pytest.raises(ParameterError):
        LorenzParams(r=float("nan"))


def test_suspension_examples():
    F = suspension_field(2)
    rng = np.random.default_rng(0)
    X = F.sample(rng, 500)
    assert np.all(F.eval(X)[:, 2] == 1.0)
    for z in (0.0, 0.3, 0.99, 7.25):
        assert np.allclose(F.eval(np.array([-0.5, 0.0, z])), [0.0, 0.0, 1.0], atol=1e-15)


def test_suspension_has_no_zeros():
    F = suspension_field(1)
    g = np.arange(-1.0, 2.0 + 1e-9, 1e-2)
    X = np.stack(np.meshgrid(g, np.linspace(-1, 1, 21), [0.5], indexing="ij"), axis=-1).reshape(-1, 3)
    assert np.min(np.linalg.norm(F.eval(X), axis=1)) >= 1.0


def test_plane_flow_sinks():
    F = morse_smale_plane(2)
    for s in (-0.5, 1.5, 3.5):
        assert np.allclose(F.eval(np.array([s, 0.0, 0.0])), 0.0, atol=1e-14)
        assert F.jac(np.array([s, 0.0, 0.0]))[0, 0] < 0


def test_morse_smale_space_examples():
    F = morse_smale_space(1)
    assert np.allclose(F.eval(np.array([-5.0, 0.0, 0.0])), 0.0, atol=1e-12)
    assert np.allclose(F.eval(np.array([5.0, 0.0, 0.0])), 0.0, atol=1e-12)
    assert np.allclose(F.eval(np.array([-5.0, 1.0, 1.0])), [0.0, 1.0, -1.0], atol=1e-12)


def test_tube_examples():
    F = tube_field()
    v = F.eval(np.array([[0.0, 0.0, 0.3], [0.0, 0.0, 0.9]]))
    assert np.allclose(v[:, :2], 0.0) and np.all(v[:, 2] == 1.0)
    r = np.sqrt(3.0 / 80.0)
    v = F.eval(np.array([r, 0.0, 0.5]))
    assert abs(v[0]) < 1e-14 and abs(v[1]) < 1e-14
    rng = np.random.default_rng(1)
    X = F.sample(rng, 1000)
    assert np.all(F.eval(X)[:, 2] == 1.0)


def test_tube_domain_error():
    F = tube_field()
    with pytest.raises(DomainError):
        F.eval(np.array([0.9, 0.9, 0.5]))
    with pytest.raises(DomainError):
        F.eval(np.array([0.0, 0.0, 1.5]))


def test_potential_profile_shape():
    p = PotentialProfile()
    assert p.check()
    assert p.dphi(0.0) == 0.0 and p.dphi(1.0) == 0.0


def test_blend_single_field_is_identity():
    F = lorenz_classic()
    G = blend([F], BumpPartition((ComplementRegion(),)))
    X = F.sample(np.random.default_rng(2), 200)
    assert np.array_equal(G.eval(X), F.eval(X))


def test_blend_identical_fields():
    F = linear_field((2.0, -6.0, -1.0))
    part = BumpPartition((BallRegion((0.0, 0.0, 0.0), 0.3, 0.8), ComplementRegion()))
    G = blend([F, F], part)
    X = F.sample(np.random.default_rng(3), 500)
    assert np.allclose(G.eval(X), F.eval(X), atol=1e-14)


def test_blend_equals_weighted_sum():
    A = linear_field((2.0, -6.0, -1.0))
    B = constant_field((0.3, -0.2, 1.0), lo=(-1.5, -1.5, -1.5), hi=(1.5, 1.5, 1.5))
    part = BumpPartition((BallRegion((0.2, 0.0, 0.0), 0.3, 0.9), ComplementRegion()))
    G = blend([A, B], part, domain=A)
    X = A.sample(np.random.default_rng(4), 1000)
    W = part.weights(X)
    ref = W[0][:, None] * A.eval(X) + W[1][:, None] * B.eval(X)
    assert np.max(np.abs(G.eval(X) - ref)) <= 1e-14
    assert np.allclose(W.sum(axis=0), 1.0)


def test_blend_acute_fields_nonvanishing():
    A = constant_field((1.0, 0.2, 0.5))
    B = constant_field((0.4, 1.0, 0.1))
    part = BumpPartition((BoxRegion((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5), (-0.8, -0.8, -0.8), (0.8, 0.8, 0.8)),
                          ComplementRegion()))
    G = blend([A, B], part, domain=A)
    X = A.sample(np.random.default_rng(5), 10_000)
    assert np.min(np.linalg.norm(G.eval(X), axis=1)) > 0.1


def test_blend_length_mismatch():
    F = lorenz_classic()
    with pytest.raises(CompositionError):
        blend([F, F], BumpPartition((ComplementRegion(),)))


def test_blend_uncovered_region():
    small = linear_field((1.0, 1.0, 1.0), lo=(-0.1, -0.1, -0.1), hi=(0.1, 0.1, 0.1))
    big = linear_field((1.0, 1.0, 1.0))
    part = BumpPartition((BallRegion((0.0, 0.0, 0.0), 0.2, 0.5), ComplementRegion()))
    with pytest.raises(CompositionError):
        blend([small, big], part, domain=big)


@pytest.mark.parametrize("build", [
    lambda: lorenz_classic(),
    lambda: morse_smale_space(2),
    lambda: suspension_field(2),
    lambda: tube_field(),
    lambda: glued_suspension(1),
    lambda: glued_suspension(2),
])
def test_jacobian_matches_finite_differences(build):
    F = build()
    X = F.sample(np.random.default_rng(6), 1000, shrink=1e-3)
    assert rel_jac_error(F, X) <= 1e-5


def test_periodic_reduction():
    F = suspension_field(1)
    X = np.array([0.3, 0.2, 0.25])
    assert np.allclose(F.eval(X), F.eval(X + [0.0, 0.0, 3.0]))


@settings(max_examples=60, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(-1.0, 1.0))
def test_smoothstep_bounded(t, _):
    v = float(smoothstep(np.array(t)))
    assert 0.0 <= v <= 1.0


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.9, 1.9), st.floats(-0.9, 0.9), st.floats(0.0, 1.0))
def test_glued_field_third_component_positive(x, y, z):
    F = glued_suspension(1)
    v = F.eval(np.array([x, y, z]))
    assert v[2] > 0.0
