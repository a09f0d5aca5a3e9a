from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singflow.errors import ExpansionError, ParameterError
from singflow.fields import linear_field
from singflow.integrate import Section, integrate_to_sections
from singflow.maps1d import quotient_lorenz_map
from singflow.section_graph import (LinearSaddleParams, SectionGraphModel, SectionNode, Transition,
                                    build_return_map, linear_passage)
from singflow.zoo import chained_model, double_lorenz_model, geometric_lorenz_model, sharp_model

P0 = LinearSaddleParams(2.0, -6.0, -1.0)


def test_passage_example():
    r = linear_passage(P0, (0.25, 0.5, 1.0))
    assert np.allclose(r.exit, [1.0, 1.0 / 128.0, 0.5], rtol=1e-15)
    assert abs(r.time - math.log(4.0) / 2.0) < 1e-15
    assert r.side_tag == "top" and not r.absorbed


def test_passage_invariant_plane():
    for x in (0.9, -0.3, 1e-6):
        assert linear_passage(P0, (x, 0.0, 1.0)).exit[1] == 0.0


def test_passage_bottom_mirror():
    a = linear_passage(P0, (0.25, 0.5, 1.0))
    b = linear_passage(P0, (0.25, 0.5, -1.0))
    assert np.array_equal(a.exit[:2], b.exit[:2]) and b.exit[2] == -0.5 and b.side_tag == "bottom"


def test_passage_absorbed():
    r = linear_passage(P0, (0.0, 0.3, 1.0))
    assert r.absorbed and r.exit is None and math.isinf(r.time)


def test_passage_bad_entry():
    with pytest.raises(ParameterError):
        linear_passage(P0, (0.2, 0.2, 0.5))


def test_saddle_ordering_enforced():
    with pytest.raises(ParameterError):
        LinearSaddleParams(1.0, -6.0, -2.0)
    with pytest.raises(ParameterError):
        LinearSaddleParams(2.0, -1.0, -6.0)


def test_passage_matches_integration():
    F = linear_field((2.0, -6.0, -1.0))
    rng = np.random.default_rng(11)
    n = 200
    x = rng.choice([-1.0, 1.0], n) * 10 ** rng.uniform(-3, 0, n)
    y = rng.uniform(-1, 1, n)
    zf = rng.choice([-1.0, 1.0], n)
    _, X, j, _ = integrate_to_sections(F, np.stack([x, y, zf], 1), [Section("R", 0, 1.0), Section("L", 0, -1.0)],
                                       10.0, tol=1e-12)
    ref = np.array([linear_passage(P0, e).exit for e in zip(x, y, zf)])
    assert np.all(j >= 0) and np.max(np.abs(X - ref)) <= 1e-8


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 1.0), st.floats(-1.0, 1.0), st.sampled_from([1.0, -1.0]),
       st.sampled_from([(2.0, -6.0, -1.0), (2.0, -6.0, -1.5), (3.0, -5.0, -0.5)]))
def test_exit_exponent_identity(x, y, zf, lam):
    p = LinearSaddleParams(*lam)
    r = linear_passage(p, (x, y, zf))
    assert abs(abs(r.exit[2]) - x ** p.alpha) <= 1e-12 * x ** p.alpha
    assert abs(r.exit[1] - y * x ** p.beta) <= 1e-12 * max(abs(y) * x ** p.beta, 1e-300)
    assert abs(r.time - math.log(1.0 / x) / p.lambda1) <= 1e-12 * max(1.0, r.time)


@pytest.mark.parametrize("build", [geometric_lorenz_model, sharp_model, double_lorenz_model,
                                   lambda: chained_model(2), lambda: chained_model(3)])
def test_models_validate(build):
    assert build().validate()


def test_geometric_return_projects_to_quotient():
    m = geometric_lorenz_model(1.9, 0.75)
    R = build_return_map(m, "S")
    rng = np.random.default_rng(3)
    P = np.column_stack([rng.uniform(-1, 1, 1000), rng.uniform(-1, 1, 1000)])
    res = R(P)
    f = quotient_lorenz_map(1.9, 0.75)
    assert all(s == "returned" for s in res.status)
    assert np.max(np.abs(res.P[:, 0] - f(P[:, 0]))) <= 1e-10


def test_geometric_single_passage_top():
    m = geometric_lorenz_model()
    res = build_return_map(m, "S")(np.array([[0.4, 0.2]]))
    assert res.status[0] == "returned"
    assert res.sides[0] == [("sigma0", "top")]
    x, y = res.P[0]
    assert -1.0 <= x <= 0.9 and 0.25 <= y <= 0.75


def test_absorbed_on_stable_manifold():
    m = geometric_lorenz_model()
    res = build_return_map(m, "S")(np.array([[0.0, 0.2]]))
    assert res.status[0] == "absorbed"


def test_sharp_lower_returns_bottom():
    m = sharp_model()
    rng = np.random.default_rng(5)
    P = np.column_stack([rng.uniform(-1, 1, 200), rng.uniform(-1, 0, 200)])
    res = build_return_map(m, "S-")(P)
    ok = [i for i, s in enumerate(res.status) if s == "returned"]
    assert len(ok) >= 195
    for i in ok:
        assert {s for _, s in res.sides[i]} == {"bottom"}
        assert m.node("S-").contains(res.P[i:i + 1])[0]


def test_return_quotient_matches_lorenz_map():
    m = geometric_lorenz_model(1.9, 0.75)
    q = m.return_quotient("S")
    f = quotient_lorenz_map(1.9, 0.75)
    x = np.linspace(-0.999, 0.999, 1001)
    x = x[x != 0]
    assert len(q.branches) == 2
    assert np.max(np.abs(q(x) - f(x))) <= 1e-12


def test_sharp_quotients_expanding():
    m = sharp_model()
    assert m.return_quotient("S-").min_slope() >= 3.0 - 1e-9
    assert m.return_quotient("S").min_slope() >= 1.5 - 1e-9


@pytest.mark.parametrize("build", [geometric_lorenz_model, sharp_model, double_lorenz_model, lambda: chained_model(3)])
def test_json_round_trip(build):
    m = build()
    s = m.to_json()
    assert SectionGraphModel.from_json(s).to_json() == s


def test_sharp_and_chained_side_tags():
    for m in (sharp_model(), chained_model(2), chained_model(3)):
        for rec in m.singularities:
            if rec.lorenz_like:
                assert m.side_tags(rec.id) == ["bottom", "top"]


def test_image_containment_violation():
    nodes = [SectionNode("A", 2, 1.0, ((-1.0, 1.0), (-1.0, 1.0))), SectionNode("B", 2, 2.0, ((0.0, 0.1), (0.0, 0.1)))]
    tr = [Transition("affine_reinjection", "A", "B", (-1.0, 1.0),
                     {"matrix": [[1.0, 0.0], [0.0, 1.0]], "offset": [0.0, 0.0]}),
          Transition("affine_reinjection", "B", "A", (0.0, 0.1),
                     {"matrix": [[1.0, 0.0], [0.0, 1.0]], "offset": [0.0, 0.0]})]
    with pytest.raises(ParameterError):
        SectionGraphModel("bad", nodes, tr).validate()


def test_slow_winding_rejected():
    nodes = [SectionNode("A", 2, 1.0, ((0.0, 1.0), (0.0, 1.0)))]
    tr = [Transition("winding_map", "A", "A", (0.0, 1.0), {"N": 3, "base_slope": 2.0})]
    assert SectionGraphModel("ok", nodes, tr).validate()
    tr = [Transition("winding_map", "A", "A", (0.0, 1.0), {"N": 3, "base_slope": 1.3})]
    with pytest.raises(ExpansionError):
        SectionGraphModel("slow", nodes, tr).validate()


def test_unknown_node_rejected():
    nodes = [SectionNode("A", 2, 1.0, ((0.0, 1.0), (0.0, 1.0)))]
    with pytest.raises(ParameterError):
        SectionGraphModel("x", nodes, [Transition("affine_reinjection", "A", "Z", (0.0, 1.0), {})])


def test_chained_routes_between_copies():
    m = chained_model(2)
    res = build_return_map(m, "0:S")
    # the wandering strip of copy 0 feeds copy 1
    h = m.advance(np.array([m.node_index["0:D0"]]), np.array([[0.1, 0.2]]))
    assert m.nodes[h.node[0]].id == "1:S"
    assert res.piece.name == "0:upper"
