"""Ulam discretization of 1-D transfer operators and their fixed densities."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from .errors import ExpansionError, NumericError, ParameterError
from .maps1d import SQRT2, PiecewiseMap1D


@dataclass(frozen=True)
class UlamOperator:
    n: int
    matrix: csr_matrix
    edges: np.ndarray

    @property
    def width(self):
        return float(self.edges[1] - self.edges[0])

    @property
    def midpoints(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def row_sums(self):
        return np.asarray(self.matrix.sum(axis=1)).ravel()


def ulam_build(fmap: PiecewiseMap1D, n: int, floor: float = SQRT2) -> UlamOperator:
    """Bin-to-bin transition fractions from exact images of monotone branches.

    Each branch domain is cut at the bin edges and at the preimages of the
    bin edges; every resulting piece lies in one source bin and maps into one
    target bin, so its length divided by the bin width is an exact entry.
    """
    if int(n) != n or n < 64:
        raise ParameterError("ulam_build needs n >= 64 bins")
    for i, b in enumerate(fmap.branches):
        s = b.min_slope()
        if s < floor:
            raise ExpansionError(f"branch {i} of {fmap.name} has slope {s:.6g} below {floor:.6g}")
    lo, hi = map(float, fmap.domain)
    edges = np.linspace(lo, hi, n + 1)
    w = (hi - lo) / n
    rows, cols, vals = [], [], []
    for b in fmap.branches:
        ilo, ihi = b.image
        inner = edges[(edges > b.lo) & (edges < b.hi)]
        tgt = edges[(edges > ilo) & (edges < ihi)]
        pre = b.finv(tgt) if tgt.size else np.zeros(0)
        cuts = np.unique(np.concatenate([[b.lo, b.hi], inner, np.clip(pre, b.lo, b.hi)]))
        a, c = cuts[:-1], cuts[1:]
        keep = c > a
        a, c = a[keep], c[keep]
        mid = 0.5 * (a + c)
        src = np.clip(np.floor((mid - lo) / w).astype(int), 0, n - 1)
        dst = np.clip(np.floor((b.f(mid) - lo) / w).astype(int), 0, n - 1)
        rows.append(src)
        cols.append(dst)
        vals.append((c - a) / w)
    M = coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()
    M.sum_duplicates()
    return UlamOperator(int(n), M, edges)


@dataclass
class UlamDensities:
    count: int
    densities: list
    lambda2: float
    residual: float
    op: UlamOperator


def _iterate(A, V, tol, max_iter):
    """Lazy power iteration ``V <- (V + A V) / 2`` until every column is fixed to ``tol``."""
    for it in range(max_iter):
        W = 0.5 * (V + A @ V)
        W /= np.maximum(np.abs(W).sum(axis=0, keepdims=True), 1e-300)
        res = np.abs(W - V).sum(axis=0).max()
        V = W
        if res <= tol:
            return V, res
    return V, res


def invariant_densities(op: UlamOperator, eig_tol: float = 1e-10, starts: int = 64, max_iter: int = 20000) -> UlamDensities:
    """Fixed densities of the transposed Ulam matrix and the number of ergodic components.

    Block-indicator start vectors are iterated to the fixed space. Every bin
    of an ergodic support sees one density only, so the rows of a basis of
    that space point in one direction per component; bins are grouped by
    direction; a group must cover more than one bin to count.
    """
    if not (1e-12 <= eig_tol <= 1e-6):
        raise ParameterError("eig_tol must lie in [1e-12, 1e-6]")
    n = op.n
    PT = op.matrix.T.tocsr()
    k = min(starts, n)
    blocks = np.minimum((np.arange(n) * k) // n, k - 1)
    V0 = np.zeros((n, k + 1))
    V0[np.arange(n), blocks] = 1.0
    V0[:, k] = 1.0
    V0 /= V0.sum(axis=0, keepdims=True)
    V, res = _iterate(PT, V0, eig_tol, max_iter)
    if res > eig_tol:
        raise NumericError(f"no fixed vector within {eig_tol:g} after {max_iter} iterations (residual {res:.3g})")
    U, sv, _ = np.linalg.svd(V, full_matrices=False)
    d = int(np.sum(sv > 1e-8 * sv[0]))
    B = U[:, :d] * sv[:d]
    rn = np.linalg.norm(B, axis=1)
    live = rn > 1e-8 * rn.max()
    dirs = np.zeros_like(B)
    dirs[live] = B[live] / rn[live, None]
    # fix the sign so parallel rows agree
    piv = np.argmax(np.abs(dirs), axis=1)
    dirs *= np.sign(dirs[np.arange(n), piv])[:, None]
    labels = np.full(n, -1)
    reps = []
    for i in np.nonzero(live)[0]:
        for j, u in enumerate(reps):
            if dirs[i] @ u > 1.0 - 1e-6:
                labels[i] = j
                break
        else:
            reps.append(dirs[i])
            labels[i] = len(reps) - 1
    # single-bin groups are roundoff smear, not components
    groups = [np.nonzero(labels == j)[0] for j in range(len(reps))]
    groups = [g for g in groups if g.size > 1]
    dens = []
    w = op.width
    for j, g in enumerate(groups):
        u = reps[int(labels[g[0]])]
        rho = np.zeros(n)
        rho[g] = np.abs(B[g] @ u)
        rho /= rho.sum() * w
        dens.append(rho)
    lam2 = _second_modulus(op, dens)
    return UlamDensities(len(dens), dens, lam2, float(res), op)


def _second_modulus(op, dens, iters=200, seed=0):
    """Decay rate of P^T on the complement of the fixed space (diagnostic only)."""
    n = op.n
    P, PT = op.matrix, op.matrix.T.tocsr()
    w = op.width
    H = []
    for rho in dens:
        h = (rho > 0).astype(float)
        for _ in range(iters):
            h = P @ h
        H.append(h)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)

    def deflate(x):
        for rho, h in zip(dens, H):
            x = x - rho * w * (h @ x)
        return x

    v = deflate(v)
    v /= np.linalg.norm(v)
    rates = []
    for _ in range(iters):
        x = deflate(PT @ v)
        nx = np.linalg.norm(x)
        if nx < 1e-300:
            return 0.0
        rates.append(nx)
        v = x / nx
    tail = np.array(rates[iters // 2:])
    return float(np.exp(np.mean(np.log(tail))))


def density_mean(density, observable, op: UlamOperator | None = None, edges=None) -> float:
    """Bin-midpoint quadrature of ``observable`` against a density."""
    e = op.edges if op is not None else np.asarray(edges, dtype=float)
    mid = 0.5 * (e[:-1] + e[1:])
    return float(np.sum(np.asarray(density) * observable(mid) * np.diff(e)))


def write_density_csv(result: UlamDensities, path_prefix) -> list:
    """One CSV per component with header ``bin_midpoint,density``; returns the paths."""
    paths = []
    mid = result.op.midpoints
    for j, rho in enumerate(result.densities):
        p = f"{path_prefix}_component{j}.csv"
        with open(p, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["bin_midpoint", "density"])
            for m, r in zip(mid, rho):
                wr.writerow([repr(float(m)), repr(float(r))])
        paths.append(p)
    return paths
