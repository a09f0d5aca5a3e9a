"""The example models with their expected censuses, trapping regions and checks."""
from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .equilibria import classify, find_equilibria
from .errors import ConfigError, ParameterError
from .fields import (BallRegion, BumpPartition, ComplementRegion, Field3, LorenzParams, attached_disk_field,
                     blend, lorenz_classic, morse_smale_space, rotating_sink, suspension_field)
from .integrate import domain_check, field_rhs, hermite, run
from .section_graph import (LinearSaddleParams, Piece, SectionGraphModel, SectionNode, SingularityRecord,
                            Transition, cube_nodes, lorenz_record, passage, reinjection_params)

# ---------------------------------------------------------------------------
# trapping regions


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple
    periodic: tuple = (False, False, False)

    def contains(self, X):
        X = np.atleast_2d(X)
        ok = np.ones(len(X), dtype=bool)
        for k in range(3):
            if not self.periodic[k]:
                ok &= (X[:, k] >= self.lo[k]) & (X[:, k] <= self.hi[k])
        return ok

    def boundary_samples(self, n, rng):
        """Area-weighted points on the non-periodic faces with outward normals."""
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        span = hi - lo
        faces = []
        for k in range(3):
            if self.periodic[k]:
                continue
            others = [j for j in range(3) if j != k]
            area = span[others[0]] * span[others[1]]
            faces += [(k, -1, area), (k, 1, area)]
        w = np.array([f[2] for f in faces])
        pick = rng.choice(len(faces), size=n, p=w / w.sum())
        X = lo + span * rng.random((n, 3))
        Nrm = np.zeros((n, 3))
        for i, (k, s, _) in enumerate(faces):
            m = pick == i
            X[m, k] = hi[k] if s > 0 else lo[k]
            Nrm[m, k] = s
        return X, Nrm

    def bounding_box(self):
        return np.asarray(self.lo, float), np.asarray(self.hi, float)

    def to_dict(self):
        return {"type": "box", "lo": list(self.lo), "hi": list(self.hi), "periodic": list(self.periodic)}


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float

    def contains(self, X):
        X = np.atleast_2d(X)
        return np.linalg.norm(X - np.asarray(self.center), axis=1) <= self.radius

    def boundary_samples(self, n, rng):
        g = rng.standard_normal((n, 3))
        u = g / np.linalg.norm(g, axis=1, keepdims=True)
        return np.asarray(self.center) + self.radius * u, u

    def bounding_box(self):
        c = np.asarray(self.center, float)
        return c - self.radius, c + self.radius

    def to_dict(self):
        return {"type": "sphere", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Union:
    parts: tuple

    def contains(self, X):
        return np.any([p.contains(X) for p in self.parts], axis=0)

    def boundary_samples(self, n, rng):
        Xs, Ns = [], []
        per = int(math.ceil(n / len(self.parts)))
        for i, p in enumerate(self.parts):
            X, N = p.boundary_samples(per, rng)
            keep = np.ones(len(X), dtype=bool)
            for j, q in enumerate(self.parts):
                if j != i:
                    keep &= ~q.contains(X)
            Xs.append(X[keep])
            Ns.append(N[keep])
        return np.concatenate(Xs)[:n], np.concatenate(Ns)[:n]

    def bounding_box(self):
        bbs = [p.bounding_box() for p in self.parts]
        return np.min([b[0] for b in bbs], axis=0), np.max([b[1] for b in bbs], axis=0)

    def to_dict(self):
        return {"type": "union", "parts": [p.to_dict() for p in self.parts]}


# ---------------------------------------------------------------------------
# entries


@dataclass
class ZooEntry:
    label: str
    kind: str
    model: Any
    trapping_region: Any
    s_expected: int
    s_L_expected: int
    seeds_spec: dict
    horizon: float
    burn_in: float
    radius_tol: float
    settle_time: float = 0.0
    excluded: tuple = ()
    notes: str = ""
    ode_tol: float = 1e-6
    max_step: float = 0.05
    enforce_bound: bool = True
    _equilibria: list | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.enforce_bound and self.s_L_expected > 0 and self.s_expected > 2 * self.s_L_expected:
            raise ParameterError(f"{self.label}: declared census violates s <= 2 s_L")

    def member(self, x):
        """Attracting-set membership: inside the trapping region and outside every excluded ball."""
        x = np.atleast_2d(x)
        ok = self.trapping_region.contains(x)
        for c, r in self.excluded:
            ok &= np.linalg.norm(x - np.asarray(c), axis=1) > r
        return ok

    def equilibria(self):
        if self.kind != "ode":
            return []
        if self._equilibria is None:
            F = self.model
            edges = (F.hi - F.lo)[(F.hi - F.lo) > 0]
            self._equilibria = find_equilibria(F, 0.1 * float(edges.min()))
        return self._equilibria

    def singularities(self):
        """(id, location, weak-stable direction) of Lorenz-like equilibria in the attracting set."""
        if self.kind == "ode":
            out = []
            for i, r in enumerate(self.equilibria()):
                if r.kind == "lorenz_like" and self.member(r.location)[0]:
                    out.append((f"eq{i}", np.asarray(r.location), r.weak_stable_dir))
            return out
        m = self.model
        return [(sid, np.asarray(m.singularities[m.sing_index[sid]].location), None)
                for sid in m.piece_singularities()]

    def s_L(self):
        return len(self.singularities())

    def manifest(self):
        d = {"label": self.label, "kind": self.kind, "s_expected": self.s_expected,
             "s_L_expected": self.s_L_expected, "trapping_region": self.trapping_region.to_dict()}
        if self.kind == "section_graph":
            d["model"] = self.model.to_dict()
        return d


# ---------------------------------------------------------------------------
# section-graph builders

SIGMA0 = "sigma0"


def _section_bounds():
    return Box((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))


def geometric_lorenz_model(c=1.9, alpha=0.75, label="geometric_lorenz") -> SectionGraphModel:
    """One Lorenz cube passage above the singularity, reinjected affinely."""
    sp = _saddle_for_alpha(alpha)
    nodes = cube_nodes("", (0.0, 0.0, 0.0))
    tr = [passage("S", "E+", SIGMA0, "top", True), passage("S", "E-", SIGMA0, "top", False),
          Transition("affine_reinjection", "E+", "S", (0.0, 1.0), reinjection_params(c, 1.0)),
          Transition("affine_reinjection", "E-", "S", (0.0, 1.0), reinjection_params(c, -1.0))]
    return SectionGraphModel(label, nodes, tr, [lorenz_record(SIGMA0, (0, 0, 0), sp)],
                             [Piece("main", ("S", "E+", "E-"), "S")], {"c": c, "alpha": alpha})


def _saddle_for_alpha(alpha, lambda1=2.0, lambda2=-6.0):
    return LinearSaddleParams(lambda1, lambda2, -alpha * lambda1)


def _sharp_parts(prefix, center, sing, c, alpha, N, fiber, wander_to=None):
    """Upper boundary-repeller piece, lower winding piece and a wandering strip for one cube."""
    p = prefix
    nodes = cube_nodes(p, center, halves=("top", "bottom"))
    cx, cy, cz = center
    nodes.append(SectionNode(f"{p}D0", 2, cz + 3.0, ((-1.0, 1.0), (-1.0, 1.0)), 0, (cx, cy + 3.0)))
    tr = [passage(f"{p}S", f"{p}E+", sing, "top", True), passage(f"{p}S", f"{p}E-", sing, "top", False),
          Transition("affine_reinjection", f"{p}E+", f"{p}S", (0.0, 1.0), reinjection_params(c, 1.0)),
          Transition("affine_reinjection", f"{p}E-", f"{p}S", (0.0, 1.0), reinjection_params(c, -1.0)),
          passage(f"{p}S-", f"{p}F+", sing, "bottom", True), passage(f"{p}S-", f"{p}F-", sing, "bottom", False)]
    for sgn, tag in ((1, "+"), (-1, "-")):
        tr.append(Transition("winding_map", f"{p}F{tag}", f"{p}S-", (-1.0, 0.0),
                             {"N": N, "base_slope": 2.0, "accumulate": "hi", "orientation": -sgn,
                              "fiber_scale": fiber, "fiber_offset": 0.5 * sgn, "time": 1.0}))
    tr.append(Transition("tube_routing", f"{p}D0", wander_to or f"{p}S", (-1.0, 1.0),
                         {"matrix": [[0.5, 0.0], [0.0, 0.5]], "offset": [0.0, 0.0], "time": 1.0}))
    pieces = [Piece(f"{p}upper", (f"{p}S", f"{p}E+", f"{p}E-"), f"{p}S"),
              Piece(f"{p}lower", (f"{p}S-", f"{p}F+", f"{p}F-"), f"{p}S-")]
    return nodes, tr, pieces


def sharp_model(c=2.0, alpha=0.75, N=8, fiber=0.25, label="sharp_1") -> SectionGraphModel:
    nodes, tr, pieces = _sharp_parts("", (0.0, 0.0, 0.0), SIGMA0, c, alpha, N, fiber)
    return SectionGraphModel(label, nodes, tr, [lorenz_record(SIGMA0, (0, 0, 0), _saddle_for_alpha(alpha))],
                             pieces, {"c": c, "alpha": alpha, "N": N, "fiber": fiber})


def chained_model(k, c=2.0, alpha=0.75, N=8, fiber=0.25) -> SectionGraphModel:
    """``k`` sharp copies at the Lorenz-like zeros of the spatial Morse-Smale field, chained by wandering tubes."""
    if int(k) != k or k < 1:
        raise ParameterError("chained model needs k >= 1")
    F = morse_smale_space(k)
    nodes, tr, pieces, sings = [], [], [], []
    for i in range(k):
        loc = (40.0 * i - 5.0, 0.0, 0.0)
        rep = classify(loc, F.jac(np.array(loc)[None])[0])
        if rep.kind != "lorenz_like":
            raise ParameterError("spatial field lost its Lorenz-like zero")
        sid = f"sigma{i}"
        sings.append(lorenz_record(sid, loc, _saddle_for_alpha(alpha)))
        nxt = f"{i + 1}:S" if i + 1 < k else None
        n_, t_, p_ = _sharp_parts(f"{i}:", loc, sid, c, alpha, N, fiber, wander_to=nxt)
        nodes += n_
        tr += t_
        pieces += p_
    for i in range(k - 1):
        loc = (40.0 * i + 5.0, 0.0, 0.0)
        rep = classify(loc, F.jac(np.array(loc)[None])[0])
        sings.append(SingularityRecord(f"rho{i}", loc, rep.kind, tuple(float(v.real) for v in rep.eigenvalues)))
    return SectionGraphModel(f"chained_{k}", nodes, tr, sings, pieces,
                             {"k": k, "c": c, "alpha": alpha, "N": N, "fiber": fiber})


def double_lorenz_model(c=1.9, alpha=0.75, gap=3.0, label="double_lorenz") -> SectionGraphModel:
    """Two Lorenz pieces sharing the middle singularity, one passing above it and one below."""
    sp = _saddle_for_alpha(alpha)
    s1, s2 = "sigma1", "sigma2"
    nodes = [
        SectionNode("S1", 2, 1.0, ((-1.0, 1.0), (-1.0, 1.0)), 0),
        SectionNode("E0+", 0, 1.0, ((-1.0, 1.0), (0.0, 1.0)), 1),
        SectionNode("E1-", 0, -gap - 1.0, ((-1.0, 1.0), (0.0, 1.0)), 1),
        SectionNode("S2", 2, -1.0, ((-1.0, 1.0), (-1.0, 1.0)), 0),
        SectionNode("F0+", 0, 1.0, ((-1.0, 1.0), (-1.0, 0.0)), 1),
        SectionNode("F2-", 0, gap - 1.0, ((-1.0, 1.0), (-1.0, 0.0)), 1),
    ]
    tr = [passage("S1", "E0+", SIGMA0, "top", True), passage("S1", "E1-", s1, "top", False),
          Transition("affine_reinjection", "E0+", "S1", (0.0, 1.0), reinjection_params(c, 1.0)),
          Transition("affine_reinjection", "E1-", "S1", (0.0, 1.0), reinjection_params(c, -1.0)),
          passage("S2", "F0+", SIGMA0, "bottom", True), passage("S2", "F2-", s2, "bottom", False),
          Transition("affine_reinjection", "F0+", "S2", (-1.0, 0.0), reinjection_params(c, 1.0, "bottom")),
          Transition("affine_reinjection", "F2-", "S2", (-1.0, 0.0), reinjection_params(c, -1.0, "bottom"))]
    sings = [lorenz_record(SIGMA0, (0, 0, 0), sp), lorenz_record(s1, (-gap, 0, 0), sp), lorenz_record(s2, (gap, 0, 0), sp)]
    return SectionGraphModel(label, nodes, tr, sings,
                             [Piece("H1", ("S1", "E0+", "E1-"), "S1"), Piece("H2", ("S2", "F0+", "F2-"), "S2")],
                             {"c": c, "alpha": alpha})


def two_sided_model(c=1.9, alpha=0.75) -> SectionGraphModel:
    """One transitive piece that alternates between the top and bottom sides of the same singularity."""
    sp = _saddle_for_alpha(alpha)
    nodes = cube_nodes("", (0.0, 0.0, 0.0), halves=("top", "bottom"))
    tr = [passage("S", "E+", SIGMA0, "top", True), passage("S", "E-", SIGMA0, "top", False),
          Transition("affine_reinjection", "E+", "S-", (0.0, 1.0), reinjection_params(c, 1.0)),
          Transition("affine_reinjection", "E-", "S-", (0.0, 1.0), reinjection_params(c, -1.0)),
          passage("S-", "F+", SIGMA0, "bottom", True), passage("S-", "F-", SIGMA0, "bottom", False),
          Transition("affine_reinjection", "F+", "S", (-1.0, 0.0), reinjection_params(c, 1.0, "bottom")),
          Transition("affine_reinjection", "F-", "S", (-1.0, 0.0), reinjection_params(c, -1.0, "bottom"))]
    return SectionGraphModel("two_sided", nodes, tr, [lorenz_record(SIGMA0, (0, 0, 0), sp)],
                             [Piece("main", tuple(n.id for n in nodes), "S")], {"c": c, "alpha": alpha})


def synthetic_violation_model(c=1.9, alpha=0.75) -> SectionGraphModel:
    """Three separate Lorenz pieces all declared to pass the same singularity (not realizable by a flow)."""
    sp = _saddle_for_alpha(alpha)
    nodes, tr, pieces = [], [], []
    for name, side, center in (("A", "top", (0.0, 0.0, 0.0)), ("B", "bottom", (0.0, 0.0, 0.0)),
                               ("C", "top", (0.0, 6.0, 0.0))):
        p = f"{name}:"
        nn = cube_nodes(p, center, halves=(side,))
        nodes += nn
        s, e = (f"{p}S", "E") if side == "top" else (f"{p}S-", "F")
        dom = (0.0, 1.0) if side == "top" else (-1.0, 0.0)
        tr += [passage(s, f"{p}{e}+", SIGMA0, side, True), passage(s, f"{p}{e}-", SIGMA0, side, False),
               Transition("affine_reinjection", f"{p}{e}+", s, dom, reinjection_params(c, 1.0, side)),
               Transition("affine_reinjection", f"{p}{e}-", s, dom, reinjection_params(c, -1.0, side))]
        pieces.append(Piece(name, tuple(n.id for n in nn), s))
    return SectionGraphModel("synthetic_violation", nodes, tr, [lorenz_record(SIGMA0, (0, 0, 0), sp)], pieces,
                             {"c": c, "alpha": alpha})


# ---------------------------------------------------------------------------
# ODE builders


def glued_suspension(k, eps=0.25, disk=None) -> Field3:
    """Suspension of the planar Morse-Smale flow with a disk flow attached around each sink column."""
    base = suspension_field(k)
    disk = rotating_sink() if disk is None else disk
    sinks = [2.0 * i - 0.5 for i in range(k + 1)]
    fields, regions = [], []
    for s in sinks:
        fields.append(attached_disk_field((s, 0.0), eps, disk))
        regions.append(BallRegion((s, 0.0, 0.0), 0.5 * eps, eps, (True, True, False)))
    fields.append(base)
    regions.append(ComplementRegion())
    F = blend(fields, BumpPartition(tuple(regions)), domain=base, name=f"glued_suspension_{k}")
    object.__setattr__(F, "params", {"k": k, "eps": eps, "sinks": sinks})
    return F


LORENZ_TRAP = Sphere((0.0, 0.0, 38.0), 40.0)


def lorenz_wings(p: LorenzParams):
    w = math.sqrt(p.b * (p.r - 1.0))
    return ((w, w, p.r - 1.0), (-w, -w, p.r - 1.0))


def disjoint_lorenz_fixture(sep=150.0) -> ZooEntry:
    """Two Lorenz copies far apart in one field; its attracting set is disconnected."""
    L = lorenz_classic()
    lo = np.array([-sep - 48.0, -48.0, -10.0])
    hi = np.array([sep + 48.0, 48.0, 86.0])

    def shift(X):
        X = X.copy()
        X[..., 0] -= np.where(X[..., 0] < 0, -sep, sep)
        return X

    F = Field3("disjoint_lorenz", lo, hi, lambda X: L.eval(shift(X)), lambda X: L.jac(shift(X)))
    trap = Union((Sphere((-sep, 0.0, 38.0), 40.0), Sphere((sep, 0.0, 38.0), 40.0)))
    return ZooEntry("disjoint_lorenz", "ode", F, trap, 2, 2, {"grid": 6}, 200.0, 20.0, 2.0, settle_time=20.0)


# ---------------------------------------------------------------------------
# configuration

DEFAULTS = {
    "lorenz_classic": {"a": 10.0, "b": 8.0 / 3.0, "r": 28.0, "horizon": 400.0, "burn_in": 20.0, "radius_tol": 10.0, "grid": 20},
    "geometric_lorenz": {"c": 1.9, "alpha": 0.75, "horizon": 10000, "burn_in": 1000, "radius_tol": 0.05, "per_node": 256},
    "double_lorenz": {"c": 1.9, "alpha": 0.75, "horizon": 10000, "burn_in": 1000, "radius_tol": 0.05, "per_node": 256},
    "sharp": {"c": 2.0, "alpha": 0.75, "N": 8, "fiber": 0.25, "horizon": 10000, "burn_in": 1000, "radius_tol": 0.05, "per_node": 256},
    "chained": {"c": 2.0, "alpha": 0.75, "N": 8, "fiber": 0.25, "horizon": 10000, "burn_in": 1000, "radius_tol": 0.05, "per_node": 256},
    "glued_suspension": {"eps": 0.25, "omega": 2.0, "horizon": 60.0, "burn_in": 6.0, "grid": 20},
}


def load_config(path) -> dict:
    """Read an INI file with one section per model family; unknown keys are a config error."""
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for sec in cp.sections():
        if sec in ("experiment",):
            out[sec] = dict(cp[sec])
            continue
        if sec not in DEFAULTS:
            raise ConfigError(f"unknown config section [{sec}]")
        vals = {}
        for key, raw in cp[sec].items():
            if key not in DEFAULTS[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            try:
                vals[key] = type(DEFAULTS[sec][key])(float(raw)) if isinstance(DEFAULTS[sec][key], int) else float(raw)
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key} = {raw!r} is not a number") from exc
        out[sec] = vals
    return out


def _opts(config, family):
    d = dict(DEFAULTS[family])
    d.update((config or {}).get(family, {}))
    return d


def _sg_entry(label, model, s, sL, o, enforce=True):
    model.validate()
    return ZooEntry(label, "section_graph", model, _section_bounds(), s, sL, {"per_node": int(o["per_node"])},
                    float(o["horizon"]), float(o["burn_in"]), float(o["radius_tol"]), enforce_bound=enforce)


def build_entry(label, config=None) -> ZooEntry:
    if label == "lorenz_classic":
        o = _opts(config, "lorenz_classic")
        p = LorenzParams(o["a"], o["b"], o["r"])
        wings = tuple((w, 2.0) for w in lorenz_wings(p))
        return ZooEntry(label, "ode", lorenz_classic(p), LORENZ_TRAP, 1, 1, {"grid": int(o["grid"])},
                        float(o["horizon"]), float(o["burn_in"]), float(o["radius_tol"]), settle_time=20.0,
                        excluded=wings, max_step=0.05,
                        notes="s = 1 rests on the computer-assisted proof that these parameters give a geometric Lorenz attractor")
    if label == "geometric_lorenz":
        o = _opts(config, "geometric_lorenz")
        return _sg_entry(label, geometric_lorenz_model(o["c"], o["alpha"]), 1, 1, o)
    if label == "double_lorenz":
        o = _opts(config, "double_lorenz")
        return _sg_entry(label, double_lorenz_model(o["c"], o["alpha"]), 2, 3, o)
    if label == "sharp_1":
        o = _opts(config, "sharp")
        return _sg_entry(label, sharp_model(o["c"], o["alpha"], int(o["N"]), o["fiber"]), 2, 1, o)
    if label.startswith("chained_"):
        k = _label_int(label)
        o = _opts(config, "chained")
        return _sg_entry(label, chained_model(k, o["c"], o["alpha"], int(o["N"]), o["fiber"]), 2 * k, k, o)
    if label.startswith("glued_suspension_"):
        k = _label_int(label)
        o = _opts(config, "glued_suspension")
        F = glued_suspension(k, o["eps"], rotating_sink(o["omega"]))
        trap = Box((-1.0, -1.0, 0.0), (2.0 * k, 1.0, 1.0), (False, False, True))
        return ZooEntry(label, "ode", F, trap, k + 1, 0, {"grid": int(o["grid"])}, float(o["horizon"]),
                        float(o["burn_in"]), 0.05, settle_time=2.0, max_step=0.05)
    if label == "synthetic_violation":
        o = _opts(config, "geometric_lorenz")
        # deliberately inconsistent table, so the guard is off
        return _sg_entry(label, synthetic_violation_model(o["c"], o["alpha"]), 3, 1, o, enforce=False)
    if label == "two_sided":
        o = _opts(config, "geometric_lorenz")
        return _sg_entry(label, two_sided_model(o["c"], o["alpha"]), 1, 1, o)
    raise ConfigError(f"unknown model label {label!r}")


def _label_int(label):
    try:
        k = int(label.rsplit("_", 1)[1])
    except ValueError as exc:
        raise ConfigError(f"bad model label {label!r}") from exc
    if k < 1:
        raise ConfigError(f"bad model label {label!r}")
    return k


ZOO_LABELS = ("lorenz_classic", "geometric_lorenz", "double_lorenz", "sharp_1", "chained_1", "chained_2",
              "chained_3", "glued_suspension_1", "glued_suspension_2")
FIXTURE_LABELS = ("two_sided", "synthetic_violation")


def zoo(config=None) -> list:
    return [build_entry(lbl, config) for lbl in ZOO_LABELS]


def manifest_json(entries=None) -> str:
    entries = zoo() if entries is None else entries
    return json.dumps({"schema": 1, "entries": [e.manifest() for e in entries]}, sort_keys=True)


# ---------------------------------------------------------------------------
# checks on ODE entries


@dataclass
class TrapReport:
    passed: bool
    inward_fraction: float
    worst_margin: float
    worst_point: list
    n_samples: int


def trapping_check(entry: ZooEntry, n=10_000, seed=0, region=None) -> TrapReport:
    """Sample the trapping-region boundary and test the sign of the outward normal velocity."""
    if entry.kind != "ode":
        raise ParameterError("trapping_check applies to ODE entries")
    region = entry.trapping_region if region is None else region
    rng = np.random.default_rng(seed)
    X, N = region.boundary_samples(n, rng)
    V = entry.model.eval(X)
    speed = np.linalg.norm(V, axis=1)
    dot = np.einsum("ij,ij->i", V, N) / np.maximum(speed, 1e-300)
    inward = float(np.mean(dot < 0))
    w = int(np.argmax(dot))
    worst = float(dot[w])
    passed = inward >= 0.999 and worst <= 0.0
    return TrapReport(passed, inward, worst, [float(v) for v in X[w]], len(X))


@dataclass
class ConnectReport:
    passed: bool
    n_components: int
    representatives: list
    n_points: int


def _late_points(entry, X0, T, settle, spacing):
    """Integrate ``X0`` to ``T``; sample each step after ``settle`` at arc-length ``spacing``."""
    F = entry.model
    pts = []

    def hook(idx, t_old, y_old, f_old, t_new, y_new, f_new, h):
        live = t_new > settle
        if not live.any():
            return None
        r = np.nonzero(live)[0]
        d = y_new[r] - y_old[r]
        if any(F.periodic):
            per = np.asarray(F.periodic)
            span = np.where(per, F.hi - F.lo, 1.0)
            d = d - np.where(per, span * np.round(d / span), 0.0)
        m = np.ceil(np.linalg.norm(d, axis=1) / spacing).astype(int)
        m = np.clip(m, 1, 200)
        for j in range(1, int(m.max()) + 1):
            q = r[m >= j]
            th = j / m[m >= j]
            pts.append(hermite(y_old[q], f_old[q], y_new[q], f_new[q], h[q], th))
        return None

    st = run(field_rhs(F), X0, 0.0, float(T), entry.ode_tol, max_step=entry.max_step, on_step=hook,
             check=domain_check(F), raise_errors=False)
    P = np.concatenate(pts + [st.y]) if pts else st.y
    return F.reduce(P), st.y, st.status


def _components(P, eps, boxsize=None):
    """Connected components of the eps-graph on ``P`` after voxel downsampling."""
    cell = 0.5 * eps
    keys = np.floor(P / cell).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    Q = P[np.sort(first)]
    if boxsize is not None:
        Q = np.mod(Q, boxsize)
        tree = cKDTree(Q, boxsize=boxsize)
    else:
        tree = cKDTree(Q)
    pairs = tree.query_pairs(eps, output_type="ndarray")
    A = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(Q), len(Q)))
    nc, lab = connected_components(A, directed=False)
    return Q, nc, lab


def connectedness_check(entry: ZooEntry, T, eps, grid=6, spacing=None, seed=0, max_depth=50) -> ConnectReport:
    """Connectivity of the eps-graph of late trajectory points from a seed grid.

    When the cloud splits, grid edges whose endpoints settle into different
    pieces are bisected; orbits from near the separating stable manifold
    visit the connecting saddle before settling and bridge the gap.
    """
    if entry.kind != "ode":
        raise ParameterError("connectedness_check applies to ODE entries")
    F = entry.model
    rng = np.random.default_rng(seed)
    lo, hi = entry.trapping_region.bounding_box()
    lo = np.maximum(lo, F.lo)
    hi = np.minimum(hi, F.hi)
    spacing = 0.25 * eps if spacing is None else spacing
    axes = [lo[k] + (hi[k] - lo[k]) * (np.arange(grid) + 0.5 + 0.2 * (rng.random(grid) - 0.5)) / grid for k in range(3)]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    G = G[entry.trapping_region.contains(G)]
    settle = entry.settle_time
    boxsize = None
    if any(F.periodic):
        # map to a box where periodic axes wrap; others get a huge period
        span = F.hi - F.lo
        boxsize = np.where(F.periodic, span, 1e9)
    # periodic trees need nonnegative coordinates
    shift = F.lo - 1.0 if boxsize is not None else np.zeros(3)
    P, ends, status = _late_points(entry, G, T, settle, spacing)
    clouds = [P]
    for _ in range(3):
        Q, nc, lab = _components(np.concatenate(clouds) - shift, eps, boxsize)
        if nc == 1:
            break
        # label each seed by the component of its end point
        endQ = ends - shift
        if boxsize is not None:
            endQ = np.mod(endQ, boxsize)
        tree = cKDTree(Q, boxsize=boxsize) if boxsize is not None else cKDTree(Q)
        _, nn = tree.query(endQ)
        comp = lab[nn]
        gshape = [len(a) for a in axes]
        full = np.full(int(np.prod(gshape)), -1)
        inside = entry.trapping_region.contains(np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3))
        full[np.nonzero(inside)[0]] = comp
        full = full.reshape(gshape)
        Gfull = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        A, B = [], []
        for ax in range(3):
            sl_a = [slice(None)] * 3
            sl_b = [slice(None)] * 3
            sl_a[ax] = slice(0, -1)
            sl_b[ax] = slice(1, None)
            ca, cb = full[tuple(sl_a)], full[tuple(sl_b)]
            m = (ca >= 0) & (cb >= 0) & (ca != cb)
            A.append(Gfull[tuple(sl_a)][m])
            B.append(Gfull[tuple(sl_b)][m])
        A, B = np.concatenate(A), np.concatenate(B)
        if len(A) == 0:
            break
        if len(A) > 64:
            pick = rng.choice(len(A), 64, replace=False)
            A, B = A[pick], B[pick]
        def classify_ends(E, tree=tree, lab=lab):
            E = E - shift
            if boxsize is not None:
                E = np.mod(E, boxsize)
            return lab[tree.query(E)[1]]

        new = _bisect_edges(entry, A, B, T, settle, eps, max_depth, classify_ends)
        clouds.append(new)
    Q, nc, lab = _components(np.concatenate(clouds) - shift, eps, boxsize)
    reps = [[float(v) for v in (Q[np.argmax(lab == c)] + shift)] for c in range(nc)]
    return ConnectReport(nc == 1, int(nc), reps, int(len(Q)))


def _bisect_edges(entry, A, B, T, settle, eps, depth, classify_ends):
    """Bisect segments [A, B] towards the boundary between their end components; return the sampled points.

    End states are labelled by ``classify_ends`` (nearest cloud component),
    which is blind to the phase along a periodic attractor.
    """
    horizon = min(T, settle + 20.0)
    ca = classify_ends(_ends(entry, A, horizon))
    for _ in range(depth):
        M = 0.5 * (A + B)
        cm = classify_ends(_ends(entry, M, horizon))
        same = cm == ca
        A = np.where(same[:, None], M, A)
        B = np.where(same[:, None], B, M)
    P1, _, _ = _late_points(entry, A, horizon, settle, 0.25 * eps)
    P2, _, _ = _late_points(entry, B, horizon, settle, 0.25 * eps)
    return np.concatenate([P1, P2])


def _ends(entry, X0, T):
    F = entry.model
    st = run(field_rhs(F), X0, 0.0, float(T), entry.ode_tol, max_step=entry.max_step,
             check=domain_check(F), raise_errors=False)
    return st.y
