"""Counting ergodic physical measures by clustering Birkhoff averages over a seed grid."""
from __future__ import annotations

import csv
import json
import math
import multiprocessing as mp
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import CensusUnreliableError, NumericError, ParameterError
from .fields import Field3
from .integrate import domain_check, field_rhs, lyapunov_top_flow, run
from .integrate import sectional_expansion_estimate  # noqa: F401  re-exported
from .maps1d import PiecewiseMap1D
from .section_graph import ABSORBED, LOST, SIDES, SectionGraphModel
from .zoo import ZooEntry

def _field_of(entry):
    return entry.model if entry.kind == "ode" else None


OBSERVABLES = ("x", "y", "z", "x2", "absx_absz", "dist_sing")
SIDE_NAMES = ("top", "bottom")


def observable_fn(sing_locs, field=None):
    """Default observable vector; the last entry is the distance to the nearest listed singularity.

    A periodic coordinate of ``field`` enters through ``lo + span * (1 - cos(2 pi u)) / 2``
    with ``u`` its phase, so the observables stay continuous across the wrap.
    """
    S = np.asarray(sing_locs, dtype=float).reshape(-1, 3)
    per = [] if field is None else [k for k, p in enumerate(field.periodic) if p]

    def obs(X):
        X = np.atleast_2d(X)
        if per:
            X = X.copy()
            for k in per:
                lo, span = field.lo[k], field.hi[k] - field.lo[k]
                X[:, k] = lo + 0.5 * span * (1.0 - np.cos(2.0 * np.pi * (X[:, k] - lo) / span))
        out = np.empty((len(X), 6))
        out[:, 0] = X[:, 0]
        out[:, 1] = X[:, 1]
        out[:, 2] = X[:, 2]
        out[:, 3] = X[:, 0] ** 2
        out[:, 4] = np.abs(X[:, 0]) * np.abs(X[:, 2])
        if len(S):
            out[:, 5] = np.min(np.linalg.norm(X[:, None, :] - S[None], axis=2), axis=1)
        else:
            out[:, 5] = 0.0
        return out

    return obs


@dataclass
class CensusSettings:
    horizon: float
    burn_in: float
    radius_tol: float
    gap_tol: float = 0.01
    cluster_tol: float = 0.05
    side_floor: float = 0.01
    min_entries: int = 10
    seed: int = 0
    workers: int = 1
    grid: int | None = None
    weighting: str = "time"

    def __post_init__(self):
        for k in ("radius_tol", "gap_tol", "cluster_tol", "side_floor"):
            if not getattr(self, k) > 0:
                raise ParameterError(f"{k} must be positive")
        if not self.horizon > self.burn_in or self.burn_in < 0:
            raise ParameterError("horizon must exceed burn_in >= 0")
        if self.horizon < 10 * self.burn_in:
            raise ParameterError("horizon must be at least ten times burn_in")


def default_settings(entry: ZooEntry, **over) -> CensusSettings:
    base = dict(horizon=entry.horizon, burn_in=entry.burn_in, radius_tol=entry.radius_tol)
    base.update({k: v for k, v in over.items() if v is not None})
    return CensusSettings(**base)


@dataclass
class BirkhoffVector:
    seed: object
    averages: np.ndarray
    horizon: float
    gap: float
    status: str = "ok"           # ok, absorbed, exited
    entries: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    side_counts: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    final_node: str | None = None


@dataclass
class Cluster:
    centroid: np.ndarray
    fraction: float
    members: np.ndarray
    contains: dict
    sides: dict
    piece: str | None = None

    @property
    def singular(self):
        return any(self.contains.values())


@dataclass
class Verdict:
    ok: bool
    s: int
    s_singular: int
    s_nonsingular: int
    s_L: int
    equality: bool

    @property
    def label(self):
        return "ok" if self.ok else "violation"

    def to_dict(self):
        return {"verdict": self.label, "s": self.s, "s_singular": self.s_singular,
                "s_nonsingular": self.s_nonsingular, "s_L": self.s_L, "equality": self.equality}


@dataclass
class MeasureCensus:
    label: str
    clusters: list
    discard_fraction: float
    exit_fraction: float
    singularities: list
    vectors: list
    scales: np.ndarray
    settings: CensusSettings
    s_expected: int | None = None
    s_L: int = 0

    @property
    def s(self):
        return len(self.clusters)

    def to_dict(self):
        v = check_bound(self, self.s_L)
        return {
            "schema": 1, "label": self.label, "seed": self.settings.seed, "s": self.s, "s_L": self.s_L,
            "s_expected": self.s_expected, "discard_fraction": self.discard_fraction,
            "exit_fraction": self.exit_fraction,
            "settings": {"horizon": self.settings.horizon, "burn_in": self.settings.burn_in,
                         "radius_tol": self.settings.radius_tol, "gap_tol": self.settings.gap_tol,
                         "cluster_tol": self.settings.cluster_tol},
            "observables": list(OBSERVABLES),
            "clusters": [{"centroid": [float(x) for x in c.centroid], "fraction": c.fraction,
                          "contains": [sid for sid, b in c.contains.items() if b],
                          "sides": {sid: list(sd) for sid, sd in c.sides.items()},
                          "piece": c.piece, "size": int(len(c.members))} for c in self.clusters],
            "verdict": v.to_dict(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def write_vectors_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["seed_index", "status", "gap", "cluster"] + list(OBSERVABLES))
            lab = np.full(len(self.vectors), -1)
            for j, c in enumerate(self.clusters):
                lab[c.members] = j
            for i, bv in enumerate(self.vectors):
                wr.writerow([i, bv.status, repr(float(bv.gap)), int(lab[i])] + [repr(float(a)) for a in bv.averages])


# ---------------------------------------------------------------------------
# scales and seeds


def observable_scales(entry: ZooEntry, obs, n=4096, seed=12345):
    """Per-observable range over a uniform sample of the trapping region (or of the sections), floor 1."""
    rng = np.random.default_rng(seed)
    if entry.kind == "ode":
        lo, hi = entry.trapping_region.bounding_box()
        F = entry.model
        lo, hi = np.maximum(lo, F.lo), np.minimum(hi, F.hi)
        X = lo + (hi - lo) * rng.random((4 * n, 3))
        X = X[entry.trapping_region.contains(X)][:n]
    else:
        m = entry.model
        X = np.concatenate([nd.to_global(nd.seeds(max(16, n // len(m.nodes)), rng)) for nd in m.nodes])
    V = obs(X)
    return np.maximum(V.max(axis=0) - V.min(axis=0), 1.0)


def ode_seeds(entry: ZooEntry, grid, rng):
    lo, hi = entry.trapping_region.bounding_box()
    F = entry.model
    lo, hi = np.maximum(lo, F.lo), np.minimum(hi, F.hi)
    i = np.stack(np.meshgrid(*([np.arange(grid)] * 3), indexing="ij"), axis=-1).reshape(-1, 3)
    X = lo + (hi - lo) * (i + rng.random(i.shape)) / grid
    return X[entry.trapping_region.contains(X) & F.contains(X)]


def sg_seeds(entry: ZooEntry, per_node, rng):
    m = entry.model
    nidx, P = [], []
    for k, nd in enumerate(m.nodes):
        S = nd.seeds(per_node, rng)
        nidx.append(np.full(len(S), k))
        P.append(S)
    return np.concatenate(nidx), np.concatenate(P)


# ---------------------------------------------------------------------------
# Birkhoff averages


def _ode_averages(entry: ZooEntry, X0, st: CensusSettings, obs, sings):
    """Time averages over [burn_in, H/2] and [burn_in, H] plus near-singularity passage logs."""
    F = entry.model
    n, H, B = len(X0), float(st.horizon), float(st.burn_in)
    half = 0.5 * H
    I1 = np.zeros((n, 6))
    I2 = np.zeros((n, 6))
    ns = len(sings)
    S = np.array([s[1] for s in sings]).reshape(-1, 3)
    E = np.array([s[2] for s in sings]).reshape(-1, 3)
    inside = np.zeros((n, ns), dtype=bool)
    entries = np.zeros((n, ns), dtype=int)
    dmin = np.full((n, ns), np.inf)
    sgn = np.zeros((n, ns))
    sides = np.zeros((n, ns, 2), dtype=int)
    exited = np.zeros(n, dtype=bool)
    r = st.radius_tol

    prev = obs(X0)

    def quad(idx, t_old, h, g0, g1, a, b, acc):
        # trapezoid on the linear interpolant of the observables over [a, b]
        m = b > a
        if not m.any():
            return
        q = np.nonzero(m)[0]
        ta = ((a[q] - t_old[q]) / h[q])[:, None]
        tb = ((b[q] - t_old[q]) / h[q])[:, None]
        ga = g0[q] + ta * (g1[q] - g0[q])
        gb = g0[q] + tb * (g1[q] - g0[q])
        acc[idx[q]] += (0.5 * (b[q] - a[q]))[:, None] * (ga + gb)

    def hook(idx, t_old, y_old, f_old, t_new, y_new, f_new, h):
        out = ~entry.trapping_region.contains(y_new)
        if out.any():
            exited[idx[out]] = True
        g1 = obs(y_new)
        g0 = prev[idx]
        prev[idx] = g1
        a = np.maximum(t_old, B)
        quad(idx, t_old, h, g0, g1, a, np.minimum(t_new, half), I1)
        quad(idx, t_old, h, g0, g1, np.maximum(a, half), t_new, I2)
        if ns:
            late = t_new > B
            for j in range(ns):
                d = np.linalg.norm(y_new - S[j], axis=1)
                now = d < r
                was = inside[idx, j]
                new_in = now & ~was & late
                entries[idx[new_in], j] += 1
                closer = now & (d < dmin[idx, j])
                dmin[idx[closer], j] = d[closer]
                sgn[idx[closer], j] = np.sign((y_new[closer] - S[j]) @ E[j])
                left = was & ~now
                if left.any():
                    rows = idx[left]
                    good = late[left]
                    tag = np.where(sgn[rows, j] >= 0, 0, 1)
                    np.add.at(sides[:, j, :], (rows[good], tag[good]), 1)
                    dmin[rows, j] = np.inf
                inside[idx, j] = now
        return out

    stt = run(field_rhs(F), X0, 0.0, H, entry.ode_tol, max_step=entry.max_step, on_step=hook,
              check=domain_check(F), raise_errors=False)
    bad = exited | (stt.status != 0) & (stt.t < H)
    avg_half = I1 / (half - B)
    avg = (I1 + I2) / (H - B)
    return avg, avg_half, bad, entries, sides


def _sg_averages(entry: ZooEntry, nidx, P, st: CensusSettings, obs, sings):
    """Orbit averages along section hops, weighted by transit time, over [burn_in, H/2] and [burn_in, H]."""
    m: SectionGraphModel = entry.model
    n = len(P)
    H, B = int(st.horizon), int(st.burn_in)
    half = H // 2
    ns = len(sings)
    sid_to_col = {m.sing_index[s[0]]: j for j, s in enumerate(sings)}
    col = np.full(len(m.singularities), -1)
    for k, j in sid_to_col.items():
        col[k] = j
    I1, I2 = np.zeros((n, 6)), np.zeros((n, 6))
    W1, W2 = np.zeros(n), np.zeros(n)
    entries = np.zeros((n, ns), dtype=int)
    sides = np.zeros((n, ns, 2), dtype=int)
    absorbed = np.full(n, -1)
    lost = np.zeros(n, dtype=bool)
    # global point = base[node] + u * ea[node] + v * eb[node]
    base = np.zeros((len(m.nodes), 3))
    ea, eb = np.zeros_like(base), np.zeros_like(base)
    for k, nd in enumerate(m.nodes):
        a, b = nd.in_plane
        base[k, nd.axis] = nd.offset
        base[k, a], base[k, b] = nd.origin
        ea[k, a] = eb[k, b] = 1.0
    cur, X = nidx.copy(), P.copy()
    live = np.ones(n, dtype=bool)
    all_rows = np.arange(n)
    for hop in range(H):
        idx = all_rows if live.all() else np.nonzero(live)[0]
        if idx.size == 0:
            break
        ci, Xi = cur[idx], X[idx]
        h = m.advance(ci, Xi)
        ok = h.status == 0
        if not ok.all():
            ab = h.status == ABSORBED
            absorbed[idx[ab]] = h.sing[ab]
            lost[idx[h.status == LOST]] = True
        if hop >= B:
            G = base[ci] + Xi[:, :1] * ea[ci] + Xi[:, 1:] * eb[ci]
            w = np.where(ok, h.dt if st.weighting == "time" else 1.0, 0.0)
            contrib = np.nan_to_num(obs(G)) * w[:, None]
            if hop < half:
                I1[idx] += contrib
                W1[idx] += w
            else:
                I2[idx] += contrib
                W2[idx] += w
            near = ok & (h.sing >= 0) & (h.xloc < st.radius_tol)
            if near.any() and ns:
                rows = idx[near]
                c = col[h.sing[near]]
                good = c >= 0
                np.add.at(entries, (rows[good], c[good]), 1)
                np.add.at(sides, (rows[good], c[good], h.side[near][good].astype(int) - 1), 1)
        if ok.all():
            cur[idx], X[idx] = h.node, h.P
        else:
            cur[idx[ok]] = h.node[ok]
            X[idx[ok]] = h.P[ok]
            live[idx[~ok]] = False
    with np.errstate(invalid="ignore", divide="ignore"):
        avg_half = I1 / W1[:, None]
        avg = (I1 + I2) / (W1 + W2)[:, None]
    # orbits that fall into a singularity carry its Dirac mass
    for i in np.nonzero(absorbed >= 0)[0]:
        loc = np.asarray(m.singularities[absorbed[i]].location, dtype=float)
        avg[i] = avg_half[i] = obs(loc[None])[0]
    return avg, avg_half, lost, entries, sides, cur, absorbed


def birkhoff(entry: ZooEntry, seed, observables=None, horizon=None, burn_in=None, settings=None) -> BirkhoffVector:
    """Birkhoff vector of one seed: a state for ODE entries, ``(node_id, (u, v))`` for section graphs."""
    st = settings or default_settings(entry, horizon=horizon, burn_in=burn_in)
    sings = entry.singularities()
    obs = observables or observable_fn([s[1] for s in sings], _field_of(entry))
    scales = observable_scales(entry, obs)
    if entry.kind == "ode":
        X0 = np.asarray(seed, dtype=float).reshape(1, 3)
        if np.linalg.norm(entry.model.eval(X0)) == 0.0:
            v = obs(X0)[0]
            return BirkhoffVector(seed, v, st.horizon, 0.0, "ok", np.zeros(len(sings), int), np.zeros((len(sings), 2), int))
        avg, half, bad, ent, sd = _ode_averages(entry, X0, st, obs, sings)
        status = "exited" if bad[0] else "ok"
        fin = None
    else:
        nid, P = seed
        m = entry.model
        avg, half, bad, ent, sd, cur, ab = _sg_averages(entry, np.array([m.node_index[nid]]),
                                                        np.asarray(P, dtype=float).reshape(1, 2), st, obs, sings)
        status = "absorbed" if ab[0] >= 0 else ("lost" if bad[0] else "ok")
        fin = m.nodes[cur[0]].id
    gap = float(np.max(np.abs(avg[0] - half[0]) / scales))
    return BirkhoffVector(seed, avg[0], st.horizon, gap, status, ent[0], sd[0], fin)


# ---------------------------------------------------------------------------
# clustering


def single_linkage(Z, radius):
    """Single-linkage labels in the max norm with linking radius ``radius``.

    Points sharing a grid cell of side ``radius`` are linked outright; pairs
    of neighbouring cells are linked when any cross pair is within radius.
    """
    Z = np.asarray(Z, dtype=float)
    n, d = Z.shape
    if n == 0:
        return np.zeros(0, dtype=int)
    keys = np.floor(Z / radius).astype(np.int64)
    uk, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.ravel()
    cells = {tuple(k): i for i, k in enumerate(uk)}
    members = [[] for _ in range(len(uk))]
    for i, c in enumerate(inv):
        members[c].append(i)
    trees = {}

    def tree(c):
        if c not in trees:
            trees[c] = cKDTree(Z[members[c]])
        return trees[c]

    offs = np.stack(np.meshgrid(*([np.array([-1, 0, 1])] * d), indexing="ij"), axis=-1).reshape(-1, d)
    rows, cols = [], []
    for a, k in enumerate(uk):
        for o in offs:
            b = cells.get(tuple(k + o))
            if b is None or b <= a:
                continue
            dist, _ = tree(b).query(Z[members[a]], k=1, p=np.inf, distance_upper_bound=radius * (1 + 1e-12))
            if np.any(np.isfinite(dist)):
                rows.append(a)
                cols.append(b)
    A = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(uk), len(uk)))
    _, lab = connected_components(A, directed=False)
    return lab[inv]


def census(entry: ZooEntry, settings: CensusSettings | None = None, **over) -> MeasureCensus:
    """Seed the entry, compute Birkhoff vectors, discard non-converged seeds and cluster the rest."""
    st = settings or default_settings(entry, **over)
    rng = np.random.default_rng(st.seed)
    sings = entry.singularities()
    obs = observable_fn([s[1] for s in sings], _field_of(entry))
    scales = observable_scales(entry, obs)
    if entry.kind == "ode":
        X0 = ode_seeds(entry, st.grid or entry.seeds_spec.get("grid", 20), rng)
        avg, half, bad, ent, sd = _parallel(_ode_chunk, entry, st, (X0,), st.workers)
        status = np.where(bad, "exited", "ok")
        seeds = list(X0)
        fin = [None] * len(X0)
        absorbed = np.full(len(X0), -1)
    else:
        nidx, P = sg_seeds(entry, st.grid or entry.seeds_spec.get("per_node", 256), rng)
        avg, half, bad, ent, sd, cur, absorbed = _parallel(_sg_chunk, entry, st, (nidx, P), st.workers)
        status = np.where(absorbed >= 0, "absorbed", np.where(bad, "exited", "ok"))
        seeds = [(entry.model.nodes[k].id, tuple(p)) for k, p in zip(nidx, P)]
        fin = [entry.model.nodes[c].id if c >= 0 else None for c in cur]
    n = len(avg)
    with np.errstate(invalid="ignore"):
        gap = np.max(np.abs(avg - half) / scales, axis=1)
    gap = np.where(np.isfinite(gap), gap, np.inf)
    vectors = [BirkhoffVector(seeds[i], avg[i], st.horizon, float(gap[i]), str(status[i]), ent[i], sd[i], fin[i])
               for i in range(n)]
    keep = (status != "exited") & (gap <= st.gap_tol)
    exit_frac = float(np.mean(status == "exited")) if n else 0.0
    discard = 1.0 - float(np.mean(keep)) if n else 1.0
    if discard > 0.5:
        raise CensusUnreliableError(f"{entry.label}: {discard:.1%} of seeds discarded; raise the horizon", discard)
    kept = np.nonzero(keep)[0]
    lab = single_linkage(avg[kept] / scales, st.cluster_tol)
    clusters = []
    for c in range(lab.max() + 1 if len(lab) else 0):
        mem = kept[lab == c]
        cl = Cluster(avg[mem].mean(axis=0), len(mem) / n, mem, {}, {})
        for j, s in enumerate(sings):
            cl.contains[s[0]] = support_contains_singularity(cl, j, vectors, st.min_entries)
            cl.sides[s[0]] = accumulation_sides(cl, j, vectors, st.side_floor)
        if entry.kind == "section_graph":
            names = [entry.model.piece_of(vectors[i].final_node).name if vectors[i].final_node and
                     entry.model.piece_of(vectors[i].final_node) else "none" for i in mem]
            u, cnt = np.unique(names, return_counts=True)
            cl.piece = str(u[np.argmax(cnt)])
        clusters.append(cl)
    clusters.sort(key=lambda c: (-c.fraction, tuple(np.round(c.centroid, 9))))
    return MeasureCensus(entry.label, clusters, discard, exit_frac, [s[0] for s in sings], vectors, scales, st,
                         entry.s_expected, entry.s_L())


_SHARED = {}


def _ode_chunk(lo, hi):
    entry, st, (X0,) = _SHARED["job"]
    sings = entry.singularities()
    return _ode_averages(entry, X0[lo:hi], st, observable_fn([s[1] for s in sings], _field_of(entry)), sings)


def _sg_chunk(lo, hi):
    entry, st, (nidx, P) = _SHARED["job"]
    sings = entry.singularities()
    return _sg_averages(entry, nidx[lo:hi], P[lo:hi], st, observable_fn([s[1] for s in sings], _field_of(entry)), sings)


def _parallel(fn, entry, st, arrays, workers):
    """Run ``fn`` over contiguous seed chunks; forked workers inherit the job, results are concatenated in order."""
    n = len(arrays[0])
    _SHARED["job"] = (entry, st, arrays)
    try:
        if workers <= 1 or n < 2 or "fork" not in mp.get_all_start_methods():
            parts = [fn(0, n)]
        else:
            cuts = np.linspace(0, n, workers + 1).astype(int)
            with mp.get_context("fork").Pool(workers) as pool:
                parts = pool.starmap(fn, [(int(a), int(b)) for a, b in zip(cuts[:-1], cuts[1:]) if b > a])
    finally:
        _SHARED.pop("job", None)
    return tuple(np.concatenate([p[k] for p in parts]) for k in range(len(parts[0])))


# ---------------------------------------------------------------------------
# support diagnostics and verdicts


def support_contains_singularity(cluster: Cluster, sing, vectors, min_entries=10) -> bool:
    """True when most members enter the singularity's neighbourhood at least ``min_entries`` times."""
    e = np.array([vectors[i].entries[sing] if len(vectors[i].entries) else 0 for i in cluster.members])
    absorbed_here = np.array([vectors[i].status == "absorbed" for i in cluster.members])
    if len(e) == 0:
        return False
    return bool(np.mean((e >= min_entries) | absorbed_here) > 0.5)


def accumulation_sides(cluster: Cluster, sing, vectors, side_floor=0.01) -> tuple:
    """Sides from which members pass near the singularity, each with frequency above ``side_floor``."""
    tot = np.zeros(2)
    for i in cluster.members:
        sc = vectors[i].side_counts
        if len(sc):
            tot += sc[sing]
    if tot.sum() == 0:
        return ()
    frac = tot / tot.sum()
    return tuple(SIDE_NAMES[k] for k in range(2) if frac[k] > side_floor)


def check_bound(c: MeasureCensus, s_L: int) -> Verdict:
    """The inequality on singular clusters; vacuous when there are no Lorenz-like singularities."""
    s_sing = sum(1 for cl in c.clusters if cl.singular)
    ok = s_L == 0 or s_sing <= 2 * s_L
    return Verdict(bool(ok), c.s, s_sing, c.s - s_sing, int(s_L), bool(s_L > 0 and s_sing == 2 * s_L))


def pieces_cluster_counts(c: MeasureCensus) -> dict:
    out = {}
    for cl in c.clusters:
        out[cl.piece] = out.get(cl.piece, 0) + 1
    return out


def compare_censuses(a: MeasureCensus, b: MeasureCensus):
    """Count agreement and the largest normalized centroid drift after greedy matching."""
    if a.s != b.s:
        return False, math.inf
    A = [cl.centroid / a.scales for cl in a.clusters]
    B = [cl.centroid / b.scales for cl in b.clusters]
    used, drift = set(), 0.0
    for x in A:
        best = min((j for j in range(len(B)) if j not in used), key=lambda j: np.max(np.abs(B[j] - x)))
        used.add(best)
        drift = max(drift, float(np.max(np.abs(B[best] - x))))
    return True, drift


# ---------------------------------------------------------------------------
# 1-D quotients and Lyapunov exponents


def quotient_birkhoff(fmap: PiecewiseMap1D, observable, n, x0=None, burn_in=1000, batches=50, seed=0):
    """Orbit average of ``observable`` with a batch-means standard error."""
    rng = np.random.default_rng(seed)
    lo, hi = fmap.domain
    chains = 64
    X = lo + (hi - lo) * rng.random(chains) if x0 is None else np.full(chains, float(x0))
    per = int(math.ceil((n + burn_in * chains) / chains))
    tot = np.zeros(chains)
    steps = per - burn_in
    if steps <= 0:
        raise ParameterError("orbit too short for the burn-in")
    for i in range(per):
        if i >= burn_in:
            tot += observable(X)
        Y = fmap(X)
        bad = ~np.isfinite(Y)
        if bad.any():
            Y[bad] = lo + (hi - lo) * rng.random(int(bad.sum()))
        X = Y
    means = tot / steps
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(chains))


def lyapunov_top(model, seed, horizon, **kw) -> float:
    """Largest exponent: tangent renormalization for flows, mean log|f'| for 1-D quotients."""
    if isinstance(model, ZooEntry):
        model = model.model
    if isinstance(model, Field3):
        return lyapunov_top_flow(model, seed, horizon, **kw)
    if isinstance(model, SectionGraphModel):
        nid, P = seed
        q = model.return_quotient(nid)
        x0 = float(np.asarray(P, dtype=float).ravel()[model.node(nid).quotient])
        return lyapunov_top(q, x0, horizon, **kw)
    if isinstance(model, PiecewiseMap1D):
        # 64 chains, the first started at ``seed``
        rng = np.random.default_rng(kw.get("seed", 0))
        lo, hi = model.domain
        x0 = np.concatenate([[float(seed)], lo + (hi - lo) * rng.random(63)])
        xs = model.orbit_batch(x0, int(math.ceil(horizon / 64)), rng=rng)
        d = np.abs(model.deriv(xs.ravel()))
        d = d[np.isfinite(d)]
        if len(d) == 0:
            raise NumericError("orbit never met a differentiable point")
        val = float(np.mean(np.log(d)))
        if not np.isfinite(val):
            raise NumericError("non-finite Lyapunov estimate")
        return val
    raise ParameterError(f"unsupported model type {type(model).__name__}")
