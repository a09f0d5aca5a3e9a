"""Geometric flow models as directed graphs of planar cross-sections.

A point on a section is stored as the node index plus two local coordinates
(the in-plane axes in ascending order). Transitions move points between
sections in closed form, so a model orbit is a sequence of cheap vectorized
hops rather than an ODE solve.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ExpansionError, ParameterError
from .maps1d import SQRT2, Branch, PiecewiseMap1D, affine_branch, compose, quotient_lorenz_map, winding_branches, winding_ratio

KINDS = ("linear_passage", "affine_reinjection", "winding_map", "tube_routing")
SIDES = ("none", "top", "bottom")
NOMINAL_TIME = 1.0

OK, ABSORBED, LOST = 0, 1, 2


@dataclass(frozen=True)
class LinearSaddleParams:
    """Rates of a linear saddle diag(lambda1, lambda2, lambda3) in its unit cube."""

    lambda1: float = 2.0
    lambda2: float = -6.0
    lambda3: float = -1.0

    def __post_init__(self):
        l1, l2, l3 = self.lambda1, self.lambda2, self.lambda3
        m = 1e-10
        if not (l3 - l2 > m and -l3 > m and l1 + l3 > m):
            raise ParameterError(f"need lambda2 < lambda3 < 0 < -lambda3 < lambda1, got {(l1, l2, l3)}")

    @property
    def alpha(self):
        return -self.lambda3 / self.lambda1

    @property
    def beta(self):
        return -self.lambda2 / self.lambda1

    def as_list(self):
        return [float(self.lambda1), float(self.lambda2), float(self.lambda3)]


@dataclass
class PassageResult:
    exit: np.ndarray | None
    time: float
    side_tag: str
    absorbed: bool = False


def passage_arrays(p: LinearSaddleParams, x, y, z_face):
    """Vectorized closed-form cube passage: returns (exit y, exit z, time); x = 0 gives NaN."""
    ax = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        ey = y * ax ** p.beta
        ez = z_face * ax ** p.alpha
        t = np.log(1.0 / ax) / p.lambda1
    hit = ax == 0
    return np.where(hit, np.nan, ey), np.where(hit, np.nan, ez), np.where(hit, np.inf, t)


def linear_passage(p: LinearSaddleParams, entry) -> PassageResult:
    """Exit of the linear flow from an entry ``(x, y, +-1)`` on a horizontal face of the unit cube."""
    x, y, zf = (float(v) for v in entry)
    if zf not in (1.0, -1.0):
        raise ParameterError("entry must lie on the z = +1 or z = -1 face")
    if not (abs(x) <= 1.0 and abs(y) <= 1.0):
        raise ParameterError("entry outside the unit face")
    side = "top" if zf > 0 else "bottom"
    if x == 0.0:
        return PassageResult(None, math.inf, side, absorbed=True)
    ey, ez, t = passage_arrays(p, np.array([x]), np.array([y]), zf)
    return PassageResult(np.array([math.copysign(1.0, x), ey[0], ez[0]]), float(t[0]), side)


@dataclass(frozen=True)
class SectionNode:
    """Rectangle in the plane ``x[axis] = offset``.

    ``bounds`` are local ranges of the two in-plane axes (ascending order) and
    ``origin`` shifts them into global coordinates.
    """

    id: str
    axis: int
    offset: float
    bounds: tuple
    quotient: int = 0
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        b = tuple(tuple(float(v) for v in r) for r in self.bounds)
        object.__setattr__(self, "bounds", b)
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        if len(b) != 2 or any(hi <= lo for lo, hi in b):
            raise ParameterError(f"node {self.id}: degenerate bounds")
        if self.axis not in (0, 1, 2) or self.quotient not in (0, 1):
            raise ParameterError(f"node {self.id}: bad axis or quotient index")

    @property
    def in_plane(self):
        return tuple(k for k in range(3) if k != self.axis)

    @property
    def qbounds(self):
        return self.bounds[self.quotient]

    def to_global(self, P):
        P = np.atleast_2d(P)
        G = np.empty((len(P), 3))
        G[:, self.axis] = self.offset
        a, b = self.in_plane
        G[:, a] = self.origin[0] + P[:, 0]
        G[:, b] = self.origin[1] + P[:, 1]
        return G

    def contains(self, P, atol=1e-12):
        P = np.atleast_2d(P)
        (l0, h0), (l1, h1) = self.bounds
        return (P[:, 0] >= l0 - atol) & (P[:, 0] <= h0 + atol) & (P[:, 1] >= l1 - atol) & (P[:, 1] <= h1 + atol)

    def seeds(self, n, rng):
        """Jittered ``m x m`` grid with ``m*m >= n`` cells, truncated to ``n``."""
        m = int(math.ceil(math.sqrt(n)))
        (l0, h0), (l1, h1) = self.bounds
        i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        u = (i.ravel() + rng.random(m * m)) / m
        v = (j.ravel() + rng.random(m * m)) / m
        P = np.stack([l0 + (h0 - l0) * u, l1 + (h1 - l1) * v], axis=1)
        return P[:n]

    def to_dict(self):
        return {"id": self.id, "axis": int(self.axis), "offset": float(self.offset),
                "bounds": [list(r) for r in self.bounds], "quotient": int(self.quotient),
                "origin": list(self.origin)}


@dataclass(frozen=True)
class Transition:
    """Map from the strip ``domain`` (a range of the source quotient coordinate) to ``target``."""

    kind: str
    source: str
    target: str
    domain: tuple
    params: dict = field(default_factory=dict)
    side_tag: str = "none"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown transition kind {self.kind!r}")
        if self.side_tag not in SIDES:
            raise ParameterError(f"unknown side tag {self.side_tag!r}")
        lo, hi = (float(v) for v in self.domain)
        if hi <= lo:
            raise ParameterError("empty transition domain")
        object.__setattr__(self, "domain", (lo, hi))

    @property
    def time(self):
        return float(self.params.get("time", NOMINAL_TIME))

    def to_dict(self):
        return {"kind": self.kind, "source": self.source, "target": self.target,
                "domain": list(self.domain), "params": _plain(self.params), "side_tag": self.side_tag}


@dataclass(frozen=True)
class SingularityRecord:
    id: str
    location: tuple
    kind: str
    rates: tuple = ()

    @property
    def lorenz_like(self):
        return self.kind == "lorenz_like"

    @property
    def saddle(self) -> LinearSaddleParams:
        return LinearSaddleParams(*self.rates)

    def to_dict(self):
        return {"id": self.id, "location": [float(v) for v in self.location], "kind": self.kind,
                "rates": [float(v) for v in self.rates]}


@dataclass(frozen=True)
class Piece:
    name: str
    nodes: tuple
    return_node: str

    def to_dict(self):
        return {"name": self.name, "nodes": list(self.nodes), "return_node": self.return_node}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


@dataclass
class HopResult:
    node: np.ndarray
    P: np.ndarray
    dt: np.ndarray
    side: np.ndarray        # 0 none, 1 top, 2 bottom
    sing: np.ndarray        # singularity index of a passage, -1 otherwise
    xloc: np.ndarray        # |x| at passage entry (NaN otherwise)
    status: np.ndarray
    trans: np.ndarray


class SectionGraphModel:
    """Nodes, transitions, singularity records and declared transitive pieces."""

    def __init__(self, label, nodes, transitions, singularities=(), pieces=(), meta=None):
        self.label = label
        self.nodes = list(nodes)
        self.transitions = list(transitions)
        self.singularities = list(singularities)
        self.pieces = list(pieces)
        self.meta = dict(meta or {})
        self.node_index = {n.id: i for i, n in enumerate(self.nodes)}
        if len(self.node_index) != len(self.nodes):
            raise ParameterError("duplicate node ids")
        self.sing_index = {s.id: i for i, s in enumerate(self.singularities)}
        for t in self.transitions:
            if t.source not in self.node_index or t.target not in self.node_index:
                raise ParameterError(f"transition {t.source}->{t.target} names an unknown node")
            if t.kind == "linear_passage" and t.params.get("singularity") not in self.sing_index:
                raise ParameterError("linear passage without a singularity record")
        self._build_lookup()

    # -- lookup ---------------------------------------------------------------
    def _build_lookup(self):
        keys = []
        for ti, t in enumerate(self.transitions):
            node = self.nodes[self.node_index[t.source]]
            qlo, qhi = node.qbounds
            keys.append((self.node_index[t.source], (t.domain[0] - qlo) / (qhi - qlo),
                         (t.domain[1] - qlo) / (qhi - qlo), ti))
        keys.sort()
        self._key_lo = np.array([k[0] + 0.5 * k[1] for k in keys]) if keys else np.zeros(0)
        self._key_hi = np.array([k[0] + 0.5 * k[2] for k in keys]) if keys else np.zeros(0)
        self._key_t = np.array([k[3] for k in keys], dtype=int)
        self._qlo = np.array([n.qbounds[0] for n in self.nodes])
        self._qspan = np.array([n.qbounds[1] - n.qbounds[0] for n in self.nodes])
        self._qidx = np.array([n.quotient for n in self.nodes])

    def node(self, node_id) -> SectionNode:
        return self.nodes[self.node_index[node_id]]

    def out_transitions(self, node_id):
        return [t for t in self.transitions if t.source == node_id]

    def piece_of(self, node_id):
        for p in self.pieces:
            if node_id in p.nodes:
                return p
        return None

    def transition_for(self, nidx, P):
        """Index of the transition applying to each point, -1 where none does."""
        q = P[np.arange(len(P)), self._qidx[nidx]]
        s = (q - self._qlo[nidx]) / self._qspan[nidx]
        key = nidx + 0.5 * s
        k = np.searchsorted(self._key_lo, key, side="right") - 1
        ok = k >= 0
        kk = np.clip(k, 0, max(len(self._key_lo) - 1, 0))
        ok &= key <= self._key_hi[kk] + 1e-15
        ok &= np.floor(self._key_lo[kk] + 1e-12) == nidx
        return np.where(ok, self._key_t[kk], -1)

    # -- transitions ---------------------------------------------------------
    def apply(self, ti, P):
        """Apply transition ``ti`` to local points ``P`` at its source node.

        Returns (P_out, dt, xloc) with NaN rows for points absorbed by a singularity.
        """
        t = self.transitions[ti]
        src = self.node(t.source)
        dst = self.node(t.target)
        n = len(P)
        out = np.empty((n, 2))
        xloc = np.full(n, np.nan)
        if t.kind == "linear_passage":
            sp = self.singularities[self.sing_index[t.params["singularity"]]].saddle
            xi = int(t.params.get("x_index", 0))
            x = P[:, xi] - float(t.params.get("entry_shift", 0.0))
            ey, ez, dt = passage_arrays(sp, x, P[:, 1 - xi], float(t.params["z_face"]))
            out[:, 0], out[:, 1] = ey, ez
            xloc = np.abs(x)
        elif t.kind in ("affine_reinjection", "tube_routing"):
            M = np.asarray(t.params["matrix"], dtype=float)
            b = np.asarray(t.params["offset"], dtype=float)
            out = P @ M.T + b
            dt = np.full(n, t.time)
        else:
            sq, tq = src.quotient, dst.quotient
            u0, u1 = t.domain
            t0, t1 = dst.qbounds
            N = int(t.params["N"])
            r = winding_ratio(float(t.params.get("base_slope", 2.0)))
            acc = t.params.get("accumulate", "lo")
            q = P[:, sq]
            s = (q - u0) / (u1 - u0) if acc == "lo" else (u1 - q) / (u1 - u0)
            s = np.clip(s, 0.0, 1.0)
            with np.errstate(divide="ignore"):
                k = np.floor(np.log(s) / math.log(r))
            k = np.where(s >= 1.0, 0, k)
            rem = k >= N
            kk = np.where(rem, 0, k)
            w = np.where(rem, s / r ** N, (s - r ** (kk + 1)) / (r ** kk - r ** (kk + 1)))
            w = np.clip(w, 0.0, 1.0)
            wq = w if acc == "lo" else 1.0 - w
            tv = t0 + wq * (t1 - t0) if int(t.params.get("orientation", 1)) > 0 else t1 - wq * (t1 - t0)
            out[:, tq] = tv
            out[:, 1 - tq] = float(t.params.get("fiber_scale", 0.25)) * P[:, 1 - sq] + float(t.params.get("fiber_offset", 0.0))
            dt = np.full(n, t.time)
            dead = s == 0.0
            if dead.any():
                out[dead] = np.nan
        return out, dt, xloc

    def advance(self, nidx, P):
        """One hop for every point; the vectorized workhorse of orbits and return maps."""
        nidx = np.asarray(nidx, dtype=int)
        P = np.asarray(P, dtype=float)
        n = len(P)
        res = HopResult(np.full(n, -1), np.full((n, 2), np.nan), np.zeros(n), np.zeros(n, dtype=np.int8),
                        np.full(n, -1), np.full(n, np.nan), np.zeros(n, dtype=np.int8), np.full(n, -1))
        ti = self.transition_for(nidx, P)
        res.trans = ti
        res.status[ti < 0] = LOST
        order = np.argsort(ti, kind="stable")
        sorted_ti = ti[order]
        bounds = np.searchsorted(sorted_ti, np.arange(-1, len(self.transitions) + 1))
        for k in range(len(self.transitions)):
            rows = order[bounds[k + 1]:bounds[k + 2]]
            if rows.size == 0:
                continue
            t = self.transitions[k]
            Pout, dt, xloc = self.apply(k, P[rows])
            res.P[rows] = Pout
            res.dt[rows] = dt
            res.node[rows] = self.node_index[t.target]
            if t.kind == "linear_passage":
                res.side[rows] = SIDES.index(t.side_tag)
                res.sing[rows] = self.sing_index[t.params["singularity"]]
                res.xloc[rows] = xloc
            dead = ~np.isfinite(Pout[:, 0])
            if dead.any():
                res.status[rows[dead]] = ABSORBED
                res.node[rows[dead]] = -1
        return res

    # -- 1-D quotient --------------------------------------------------------
    def quotient_branches(self, t: Transition):
        src, dst = self.node(t.source), self.node(t.target)
        lo, hi = t.domain
        if t.kind == "linear_passage":
            sp = self.singularities[self.sing_index[t.params["singularity"]]].saddle
            a = sp.alpha
            zf = float(t.params["z_face"])
            sh = float(t.params.get("entry_shift", 0.0))
            sgn = 1.0 if lo >= sh else -1.0
            return [Branch(lo, hi,
                           lambda x: zf * np.abs(x - sh) ** a,
                           lambda x: zf * sgn * a * np.abs(x - sh) ** (a - 1.0),
                           lambda v: sh + sgn * np.abs(v) ** (1.0 / a),
                           zf * sgn > 0)]
        if t.kind in ("affine_reinjection", "tube_routing"):
            M = np.asarray(t.params["matrix"], dtype=float)
            b = np.asarray(t.params["offset"], dtype=float)
            return [affine_branch(lo, hi, float(M[dst.quotient, src.quotient]), float(b[dst.quotient]))]
        return winding_branches(int(t.params["N"]), float(t.params.get("base_slope", 2.0)), (lo, hi),
                                dst.qbounds, t.params.get("accumulate", "lo"), int(t.params.get("orientation", 1)))

    def return_quotient(self, node_id, max_depth=12) -> PiecewiseMap1D:
        """1-D quotient of the first-return map to ``node_id`` within its piece."""
        piece = self.piece_of(node_id)
        allowed = set(piece.nodes) if piece else set(self.node_index)
        found = []

        def walk(branch, nid, depth):
            if depth > 0 and nid == node_id:
                found.append(branch)
                return
            if depth >= max_depth:
                return
            for t in self.out_transitions(nid):
                if t.target not in allowed:
                    continue
                for qb in self.quotient_branches(t):
                    c = qb if branch is None else compose(qb, branch)
                    if c is not None:
                        walk(c, t.target, depth + 1)

        walk(None, node_id, 0)
        return PiecewiseMap1D(self.node(node_id).qbounds, found, name=f"{self.label}:{node_id}")

    # -- checks ---------------------------------------------------------------
    def validate(self, floor=SQRT2, grid=64):
        """Image containment, skewness, coverage, expansion and piece connectivity."""
        for t in self.transitions:
            src, dst = self.node(t.source), self.node(t.target)
            qlo, qhi = src.qbounds
            if t.domain[0] < qlo - 1e-12 or t.domain[1] > qhi + 1e-12:
                raise ParameterError(f"{t.source}->{t.target}: domain outside the source node")
            if t.kind == "linear_passage":
                sh = float(t.params.get("entry_shift", 0.0))
                if t.domain[0] < sh < t.domain[1]:
                    raise ParameterError("passage domain straddles the stable manifold")
                if src.quotient != int(t.params.get("x_index", 0)) or dst.quotient != 1:
                    raise ParameterError("passage must carry x to the exit height")
                if t.side_tag not in ("top", "bottom") or (t.side_tag == "top") != (float(t.params["z_face"]) > 0):
                    raise ParameterError("passage side tag must match its face")
            if t.kind in ("affine_reinjection", "tube_routing"):
                M = np.asarray(t.params["matrix"], dtype=float)
                if abs(M[dst.quotient, 1 - src.quotient]) > 0:
                    raise ParameterError(f"{t.source}->{t.target}: target quotient depends on the fiber")
            if t.kind == "winding_map":
                N = int(t.params["N"])
                if N < 1:
                    raise ParameterError("winding map needs N >= 1")
                for b in self.quotient_branches(t):
                    if b.min_slope() < floor:
                        raise ExpansionError(f"{t.source}->{t.target}: winding branch slope below floor")
            # 64 x 64 cell centres of the strip
            c = (np.arange(grid) + 0.5) / grid
            qq = t.domain[0] + (t.domain[1] - t.domain[0]) * c
            ob = src.bounds[1 - src.quotient]
            oo = ob[0] + (ob[1] - ob[0]) * c
            Q, O = np.meshgrid(qq, oo, indexing="ij")
            P = np.empty((grid * grid, 2))
            P[:, src.quotient] = Q.ravel()
            P[:, 1 - src.quotient] = O.ravel()
            ti = self.transitions.index(t)
            Pout, _, _ = self.apply(ti, P)
            live = np.isfinite(Pout[:, 0])
            if not np.all(dst.contains(Pout[live], atol=1e-12)):
                raise ParameterError(f"{t.source}->{t.target}: image leaves the target rectangle")
        for nd in self.nodes:
            outs = self.out_transitions(nd.id)
            if not outs:
                raise ParameterError(f"node {nd.id} has no outgoing transition")
            covered = sum(t.domain[1] - t.domain[0] for t in outs)
            span = nd.qbounds[1] - nd.qbounds[0]
            if abs(covered - span) > 1e-12 * max(1.0, span):
                raise ParameterError(f"node {nd.id}: transitions do not cover the section")
        for p in self.pieces:
            if not self.strongly_connected(p):
                raise ParameterError(f"piece {p.name} is not strongly connected")
        return True

    def strongly_connected(self, piece: Piece):
        ids = list(piece.nodes)
        pos = {v: i for i, v in enumerate(ids)}
        rows, cols = [], []
        for t in self.transitions:
            if t.source in pos and t.target in pos:
                rows.append(pos[t.source])
                cols.append(pos[t.target])
        A = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(ids), len(ids)))
        nc, _ = connected_components(A, directed=True, connection="strong")
        return nc == 1

    # -- singular bookkeeping ------------------------------------------------
    def piece_singularities(self):
        """Lorenz-like records reached by a passage inside some declared piece."""
        inside = {n for p in self.pieces for n in p.nodes}
        ids = []
        for t in self.transitions:
            if t.kind == "linear_passage" and t.source in inside:
                sid = t.params["singularity"]
                if self.singularities[self.sing_index[sid]].lorenz_like and sid not in ids:
                    ids.append(sid)
        return ids

    def side_tags(self, sing_id):
        return sorted({t.side_tag for t in self.transitions
                       if t.kind == "linear_passage" and t.params.get("singularity") == sing_id})

    # -- serialization ---------------------------------------------------------
    def to_dict(self):
        return {"label": self.label, "nodes": [n.to_dict() for n in self.nodes],
                "transitions": [t.to_dict() for t in self.transitions],
                "singularities": [s.to_dict() for s in self.singularities],
                "pieces": [p.to_dict() for p in self.pieces], "meta": _plain(self.meta)}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        nodes = [SectionNode(n["id"], n["axis"], n["offset"], tuple(tuple(r) for r in n["bounds"]),
                             n["quotient"], tuple(n["origin"])) for n in d["nodes"]]
        trans = [Transition(t["kind"], t["source"], t["target"], tuple(t["domain"]), t["params"], t["side_tag"])
                 for t in d["transitions"]]
        sings = [SingularityRecord(s["id"], tuple(s["location"]), s["kind"], tuple(s["rates"]))
                 for s in d["singularities"]]
        pieces = [Piece(p["name"], tuple(p["nodes"]), p["return_node"]) for p in d["pieces"]]
        return cls(d["label"], nodes, trans, sings, pieces, d.get("meta"))

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))


# ---------------------------------------------------------------------------
# return maps

@dataclass
class ReturnResult:
    P: np.ndarray
    time: np.ndarray
    status: list
    itinerary: list
    sides: list


class ReturnMap:
    """First-return map to one node, evaluated by hopping until the orbit comes back."""

    def __init__(self, model: SectionGraphModel, node_id, max_hops=64):
        piece = model.piece_of(node_id)
        if piece is None:
            raise ParameterError(f"node {node_id} is not in a declared transitive piece")
        self.model = model
        self.node_id = node_id
        self.piece = piece
        self.max_hops = max_hops

    def __call__(self, P) -> ReturnResult:
        m = self.model
        P = np.atleast_2d(np.asarray(P, dtype=float))
        n = len(P)
        home = m.node_index[self.node_id]
        allowed = np.zeros(len(m.nodes), dtype=bool)
        allowed[[m.node_index[v] for v in self.piece.nodes]] = True
        cur = np.full(n, home)
        X = P.copy()
        T = np.zeros(n)
        status = ["pending"] * n
        itin = [[self.node_id] for _ in range(n)]
        sides = [[] for _ in range(n)]
        live = np.ones(n, dtype=bool)
        for _ in range(self.max_hops):
            idx = np.nonzero(live)[0]
            if idx.size == 0:
                break
            h = m.advance(cur[idx], X[idx])
            for r, g in enumerate(idx):
                if h.status[r] == ABSORBED:
                    status[g] = "absorbed"
                    live[g] = False
                    sides[g].append((m.singularities[h.sing[r]].id, SIDES[h.side[r]]))
                    continue
                if h.status[r] == LOST:
                    status[g] = "lost"
                    live[g] = False
                    continue
                tgt = m.nodes[h.node[r]].id
                itin[g].append(tgt)
                if h.sing[r] >= 0:
                    sides[g].append((m.singularities[h.sing[r]].id, SIDES[h.side[r]]))
                T[g] += h.dt[r]
                X[g] = h.P[r]
                cur[g] = h.node[r]
                if not allowed[h.node[r]]:
                    status[g] = f"routed:{tgt}"
                    live[g] = False
                elif h.node[r] == home:
                    status[g] = "returned"
                    live[g] = False
        for g in np.nonzero(live)[0]:
            status[g] = "no_return"
        X[[s != "returned" and not s.startswith("routed") for s in status]] = np.nan
        return ReturnResult(X, T, status, itin, sides)

    def quotient(self) -> PiecewiseMap1D:
        return self.model.return_quotient(self.node_id)


def build_return_map(model: SectionGraphModel, node_id, max_hops=64) -> ReturnMap:
    return ReturnMap(model, node_id, max_hops)


# ---------------------------------------------------------------------------
# building blocks shared by the zoo

def reinjection_params(c, sign, side="top", time=NOMINAL_TIME):
    """Affine reinjection from an exit face into the entry section.

    Source local coords are (u, v) on the exit face, target (x, y):
    x = sign * (c |v| - 1), y = sign / 2 + u / 4.
    """
    vs = 1.0 if side == "top" else -1.0
    return {"matrix": [[0.0, sign * c * vs], [0.25, 0.0]], "offset": [-sign, 0.5 * sign], "time": time}


def cube_nodes(prefix, center, halves=("top",), entry_origin=(0.0, 0.0)):
    """Entry section(s) and the two exit faces of the unit cube around ``center``."""
    cx, cy, cz = center
    nodes = []
    for side in halves:
        zs = 1.0 if side == "top" else -1.0
        nodes.append(SectionNode(f"{prefix}S{'' if side == 'top' else '-'}", 2, cz + zs,
                                 ((-1.0, 1.0), (-1.0, 1.0)), 0, (cx + entry_origin[0], cy + entry_origin[1])))
        for sgn in (1, -1):
            vb = (0.0, 1.0) if side == "top" else (-1.0, 0.0)
            tag = ("E" if side == "top" else "F") + ("+" if sgn > 0 else "-")
            nodes.append(SectionNode(f"{prefix}{tag}", 0, cx + sgn, ((-1.0, 1.0), vb), 1, (cy, cz)))
    return nodes


def passage(src, dst, sing, side, x_positive, shift=0.0):
    zf = 1.0 if side == "top" else -1.0
    dom = (shift, 1.0 + shift) if x_positive else (-1.0 + shift, shift)
    return Transition("linear_passage", src, dst, dom,
                      {"singularity": sing, "z_face": zf, "x_index": 0, "entry_shift": shift}, side)


def lorenz_record(sid, location, params: LinearSaddleParams | None = None):
    p = LinearSaddleParams() if params is None else params
    return SingularityRecord(sid, tuple(float(v) for v in location), "lorenz_like", tuple(p.as_list()))


__all__ = [
    "LinearSaddleParams", "PassageResult", "linear_passage", "passage_arrays", "SectionNode", "Transition",
    "SingularityRecord", "Piece", "SectionGraphModel", "ReturnMap", "ReturnResult", "build_return_map",
    "reinjection_params", "cube_nodes", "passage", "lorenz_record", "quotient_lorenz_map",
]
