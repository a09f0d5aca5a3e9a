from __future__ import annotations

import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singflow.census import (BirkhoffVector, CensusSettings, Cluster, MeasureCensus, accumulation_sides, birkhoff,
                             census, check_bound, compare_censuses, default_settings, lyapunov_top, observable_fn,
                             single_linkage, support_contains_singularity)
from singflow.errors import CensusUnreliableError, ParameterError
from singflow.fields import linear_field
from singflow.maps1d import quotient_lorenz_map
from singflow.ulam import density_mean, invariant_densities, ulam_build
from singflow.zoo import build_entry

from conftest import cached_entry


def _vec(entries, sides, status="ok"):
    return BirkhoffVector(None, np.zeros(6), 1.0, 0.0, status, np.array(entries), np.array(sides))


def _fake_census(n_sing, n_plain, s_L):
    cl = [Cluster(np.zeros(6), 0.1, np.array([0]), {"a": True}, {}) for _ in range(n_sing)]
    cl += [Cluster(np.zeros(6), 0.1, np.array([0]), {"a": False}, {}) for _ in range(n_plain)]
    st_ = CensusSettings(100.0, 1.0, 0.1)
    return MeasureCensus("fake", cl, 0.0, 0.0, ["a"], [], np.ones(6), st_, None, s_L)


def test_settings_validation():
    with pytest.raises(ParameterError):
        CensusSettings(10.0, 20.0, 0.1)
    with pytest.raises(ParameterError):
        CensusSettings(100.0, 1.0, 0.0)
    with pytest.raises(ParameterError):
        CensusSettings(100.0, 1.0, 0.1, gap_tol=-1.0)
    s = default_settings(cached_entry("sharp_1"), horizon=20000.0)
    assert s.horizon == 20000.0 and s.burn_in == 1000 and s.radius_tol == 0.05


def test_birkhoff_at_equilibrium():
    e = cached_entry("lorenz_classic")
    bv = birkhoff(e, np.zeros(3))
    assert np.allclose(bv.averages, observable_fn([np.zeros(3)])(np.zeros((1, 3)))[0])
    assert bv.gap == 0.0


def test_birkhoff_absorbed_dirac():
    e = cached_entry("geometric_lorenz")
    bv = birkhoff(e, ("S", (0.0, 0.3)), horizon=200, burn_in=10)
    assert bv.status == "absorbed"
    assert np.allclose(bv.averages, 0.0)


def test_birkhoff_gap_shrinks_with_horizon():
    e = cached_entry("geometric_lorenz")
    a1 = birkhoff(e, ("S", (0.31, 0.2)), horizon=2000, burn_in=100).averages
    b1 = birkhoff(e, ("S", (-0.57, -0.4)), horizon=2000, burn_in=100).averages
    a2 = birkhoff(e, ("S", (0.31, 0.2)), horizon=32000, burn_in=1600).averages
    b2 = birkhoff(e, ("S", (-0.57, -0.4)), horizon=32000, burn_in=1600).averages
    assert np.max(np.abs(a2 - b2)) < np.max(np.abs(a1 - b1))
    assert np.max(np.abs(a2 - b2)) < 0.02


def test_quotient_average_vs_ulam():
    from singflow.census import quotient_birkhoff
    q = quotient_lorenz_map(1.9, 0.75)
    r = invariant_densities(ulam_build(q, 4096))
    ref = density_mean(r.densities[0], lambda x: np.abs(x), r.op)
    mean, se = quotient_birkhoff(q, np.abs, 10 ** 6, seed=3)
    assert abs(mean - ref) <= 3.0 * se


def test_single_linkage_basic():
    Z = np.array([[0.0, 0.0], [0.04, 0.0], [0.08, 0.0], [1.0, 1.0], [1.02, 1.0]])
    lab = single_linkage(Z, 0.05)
    assert lab[0] == lab[1] == lab[2] and lab[3] == lab[4] and lab[0] != lab[3]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=40), st.floats(0.05, 1.0))
def test_single_linkage_matches_bruteforce(pts, r):
    from scipy.sparse.csgraph import connected_components
    Z = np.array(pts)
    D = np.max(np.abs(Z[:, None] - Z[None]), axis=2) <= r
    n_ref, ref = connected_components(D, directed=False)
    lab = single_linkage(Z, r)
    assert len(np.unique(lab)) == n_ref
    for i in range(len(Z)):
        for j in range(len(Z)):
            assert (lab[i] == lab[j]) == (ref[i] == ref[j])


def test_support_and_sides_from_log():
    vecs = [_vec([12], [[12, 0]]), _vec([15], [[14, 1]]), _vec([2], [[2, 0]])]
    cl = Cluster(np.zeros(6), 1.0, np.array([0, 1, 2]), {}, {})
    assert support_contains_singularity(cl, 0, vecs)
    assert accumulation_sides(cl, 0, vecs) == ("top", "bottom")
    assert accumulation_sides(cl, 0, vecs, side_floor=0.05) == ("top",)
    cl2 = Cluster(np.zeros(6), 1.0, np.array([2]), {}, {})
    assert not support_contains_singularity(cl2, 0, vecs)


def test_support_absorbed_counts():
    vecs = [_vec([0], [[0, 0]], status="absorbed")]
    cl = Cluster(np.zeros(6), 1.0, np.array([0]), {}, {})
    assert support_contains_singularity(cl, 0, vecs)


def test_check_bound_cases():
    v = check_bound(_fake_census(2, 0, 1), 1)
    assert v.ok and v.equality and v.label == "ok"
    v = check_bound(_fake_census(2, 0, 3), 3)
    assert v.ok and not v.equality
    v = check_bound(_fake_census(3, 0, 1), 1)
    assert not v.ok and v.label == "violation"
    v = check_bound(_fake_census(0, 3, 0), 0)
    assert v.ok and v.s_nonsingular == 3


def test_small_census_geometric():
    e = cached_entry("geometric_lorenz")
    c = census(e, horizon=4000, burn_in=400, grid=64)
    assert c.s == 1
    assert abs(sum(cl.fraction for cl in c.clusters) + c.discard_fraction - 1.0) <= 1e-12
    cl = c.clusters[0]
    assert cl.contains["sigma0"] and cl.sides["sigma0"] == ("top",)


def test_two_sided_fixture():
    c = census(cached_entry("two_sided"), horizon=4000, burn_in=400, grid=64)
    assert c.s == 1
    assert c.clusters[0].sides["sigma0"] == ("top", "bottom")


def test_unreliable_census():
    with pytest.raises(CensusUnreliableError) as ei:
        census(cached_entry("geometric_lorenz"), horizon=400, burn_in=40, grid=16, gap_tol=1e-6)
    assert ei.value.discard_fraction > 0.5


def test_census_deterministic_and_serialized(tmp_path):
    e = cached_entry("sharp_1")
    a = census(e, horizon=2000, burn_in=200, grid=36, seed=5)
    b = census(e, horizon=2000, burn_in=200, grid=36, seed=5)
    assert a.to_json() == b.to_json()
    d = json.loads(a.to_json())
    assert d["schema"] == 1 and d["seed"] == 5 and d["verdict"]["verdict"] == "ok"
    p = tmp_path / "v.csv"
    a.write_vectors_csv(p)
    rows = list(csv.reader(open(p)))
    assert rows[0][:4] == ["seed_index", "status", "gap", "cluster"] and len(rows) == len(a.vectors) + 1
    same, drift = compare_censuses(a, b)
    assert same and drift == 0.0


def test_lyapunov_top_linear():
    F = linear_field((2.0, -6.0, -1.0), lo=(-1e9,) * 3, hi=(1e9,) * 3)
    assert abs(lyapunov_top(F, [0.0, 0.0, 0.0], 20.0, tol=1e-12) - 2.0) <= 1e-6


def test_lyapunov_top_quotient_vs_ulam():
    q = quotient_lorenz_map(1.9, 0.75)
    r = invariant_densities(ulam_build(q, 8192))
    ref = density_mean(r.densities[0], lambda x: np.log(np.abs(q.deriv(x))), r.op)
    assert abs(lyapunov_top(q, 0.3, 10 ** 6) - ref) <= 0.01


def test_lyapunov_top_section_graph():
    m = cached_entry("geometric_lorenz").model
    assert abs(lyapunov_top(m, ("S", (0.3, 0.1)), 200_000) - 0.665) <= 0.01


def test_lyapunov_top_periodic_sink_negative():
    e = build_entry("glued_suspension_1")
    assert lyapunov_top(e, [-0.5, 0.05, 0.0], 40.0) < 0.0


def test_lyapunov_bad_model():
    with pytest.raises(ParameterError):
        lyapunov_top("nope", 0.0, 10)
