"""Piecewise monotone interval maps: branches, composition and the model quotient maps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ExpansionError, ParameterError

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Branch:
    """A strictly monotone C^1 map from ``[lo, hi]`` onto its image."""

    lo: float
    hi: float
    f: Callable
    df: Callable
    finv: Callable
    increasing: bool

    @property
    def image(self):
        a, b = float(self.f(np.array([self.lo]))[0]), float(self.f(np.array([self.hi]))[0])
        return (a, b) if a <= b else (b, a)

    def restrict(self, lo, hi):
        return Branch(max(lo, self.lo), min(hi, self.hi), self.f, self.df, self.finv, self.increasing)

    def min_slope(self, samples=257):
        # interior points only: one-sided endpoint limits may be singular
        t = (np.arange(samples) + 0.5) / samples
        x = self.lo + (self.hi - self.lo) * t
        x = np.concatenate([x, [self.lo + 1e-12 * (self.hi - self.lo), self.hi - 1e-12 * (self.hi - self.lo)]])
        return float(np.min(np.abs(self.df(x))))


def affine_branch(lo, hi, a, b):
    """x -> a x + b on [lo, hi]."""
    if a == 0:
        raise ParameterError("affine branch needs a nonzero slope")
    return Branch(lo, hi, lambda x: a * x + b, lambda x: np.full(np.shape(x), float(a)),
                  lambda y: (y - b) / a, a > 0)


def compose(outer: Branch, inner: Branch) -> Branch | None:
    """``outer o inner`` on the part of ``inner``'s domain mapped into ``outer``'s domain."""
    ilo, ihi = inner.image
    lo, hi = max(ilo, outer.lo), min(ihi, outer.hi)
    if hi <= lo:
        return None
    a, b = float(inner.finv(np.array([lo]))[0]), float(inner.finv(np.array([hi]))[0])
    dlo, dhi = (a, b) if a <= b else (b, a)
    dlo, dhi = max(dlo, inner.lo), min(dhi, inner.hi)
    if dhi <= dlo:
        return None
    return Branch(
        dlo, dhi,
        lambda x, o=outer, i=inner: o.f(i.f(x)),
        lambda x, o=outer, i=inner: o.df(i.f(x)) * i.df(x),
        lambda y, o=outer, i=inner: i.finv(o.finv(y)),
        outer.increasing == inner.increasing,
    )


@dataclass
class PiecewiseMap1D:
    """Interval map given by disjoint monotone branches; the gaps are the discontinuity set."""

    domain: tuple
    branches: list
    name: str = "map"

    def __post_init__(self):
        self.branches = sorted(self.branches, key=lambda b: b.lo)
        lo, hi = self.domain
        prev = lo
        for b in self.branches:
            if b.hi <= b.lo:
                raise ParameterError("empty branch")
            if b.lo < prev - 1e-12 or b.hi > hi + 1e-12:
                raise ParameterError("branches must be disjoint and inside the domain")
            prev = b.hi

    @property
    def breakpoints(self):
        pts = sorted({b.lo for b in self.branches} | {b.hi for b in self.branches})
        return np.array(pts)

    def branch_index(self, x):
        x = np.asarray(x, dtype=float)
        los = np.array([b.lo for b in self.branches])
        his = np.array([b.hi for b in self.branches])
        k = np.searchsorted(los, x, side="right") - 1
        k = np.clip(k, 0, len(los) - 1)
        ok = (x > los[k]) & (x < his[k])
        return np.where(ok, k, -1)

    def __call__(self, x):
        """Map value; NaN marks a discontinuity point or a gap."""
        x = np.asarray(x, dtype=float)
        k = self.branch_index(x)
        out = np.full(x.shape, np.nan)
        for j, b in enumerate(self.branches):
            m = k == j
            if np.any(m):
                out[m] = b.f(x[m])
        return out

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        k = self.branch_index(x)
        out = np.full(x.shape, np.nan)
        for j, b in enumerate(self.branches):
            m = k == j
            if np.any(m):
                out[m] = b.df(x[m])
        return out

    def one_sided(self, x, side):
        """Limit of the map at ``x`` from the left (``side=-1``) or right (``+1``)."""
        for b in self.branches:
            if side > 0 and b.lo <= x < b.hi:
                return float(b.f(np.array([x]))[0]) if x > b.lo else float(b.f(np.array([b.lo]))[0])
            if side < 0 and b.lo < x <= b.hi:
                return float(b.f(np.array([b.hi if x == b.hi else x]))[0])
        return float("nan")

    def min_slope(self):
        return min(b.min_slope() for b in self.branches)

    def check_expanding(self, floor=SQRT2):
        for i, b in enumerate(self.branches):
            s = b.min_slope()
            if s < floor:
                raise ExpansionError(f"{self.name}: branch {i} on [{b.lo:.6g}, {b.hi:.6g}] has slope {s:.6g} < {floor:.6g}")
        return True

    def orbit(self, x0, n, rng=None, reseed=True):
        """Forward orbit of length ``n``; a point landing on a discontinuity is re-drawn at random."""
        xs = np.empty(n)
        x = float(x0)
        lo, hi = self.domain
        rng = np.random.default_rng(0) if rng is None else rng
        for i in range(n):
            xs[i] = x
            y = float(self(np.array([x]))[0])
            if not np.isfinite(y):
                if not reseed:
                    return xs[: i + 1]
                y = lo + (hi - lo) * rng.random()
            x = y
        return xs

    def orbit_batch(self, x0, n, rng=None):
        """Orbits of many starting points, shape ``(n, len(x0))``."""
        X = np.empty((n, len(x0)))
        x = np.asarray(x0, dtype=float).copy()
        lo, hi = self.domain
        rng = np.random.default_rng(0) if rng is None else rng
        for i in range(n):
            X[i] = x
            y = self(x)
            bad = ~np.isfinite(y)
            if bad.any():
                y[bad] = lo + (hi - lo) * rng.random(int(bad.sum()))
            x = y
        return X


def quotient_lorenz_map(c: float = 1.9, alpha: float = 0.75, require_expanding=False) -> PiecewiseMap1D:
    """f(x) = sgn(x) (c |x|^alpha - 1) on [-1, 1] minus the origin."""
    if not (1.0 < c <= 2.0) or not (0.0 < alpha < 1.0):
        raise ParameterError("need c in (1, 2] and alpha in (0, 1)")
    if require_expanding and c * alpha <= SQRT2:
        raise ExpansionError(f"c*alpha = {c * alpha:.6g} does not exceed sqrt(2)")
    right = Branch(0.0, 1.0,
                   lambda x: c * np.abs(x) ** alpha - 1.0,
                   lambda x: c * alpha * np.abs(x) ** (alpha - 1.0),
                   lambda y: ((y + 1.0) / c) ** (1.0 / alpha),
                   True)
    left = Branch(-1.0, 0.0,
                  lambda x: 1.0 - c * np.abs(x) ** alpha,
                  lambda x: c * alpha * np.abs(x) ** (alpha - 1.0),
                  lambda y: -((1.0 - y) / c) ** (1.0 / alpha),
                  True)
    return PiecewiseMap1D((-1.0, 1.0), [left, right], name=f"lorenz_map(c={c}, alpha={alpha})")


def winding_ratio(base_slope):
    if base_slope < SQRT2:
        raise ExpansionError(f"winding base slope {base_slope:.6g} below sqrt(2)")
    return 1.0 - 1.0 / base_slope


def winding_branches(N, base_slope=2.0, domain=(0.0, 1.0), target=(0.0, 1.0), accumulate="lo", orientation=1):
    """Full affine branches on intervals shrinking geometrically towards one end of ``domain``.

    Branch k occupies normalized positions ``[r^(k+1), r^k)`` with ``r = 1 - 1/base_slope``;
    the remainder ``[0, r^N)`` is one more full branch with the last branch's slope.
    """
    if int(N) != N or N < 1:
        raise ParameterError("winding map needs N >= 1")
    r = winding_ratio(base_slope)
    u0, u1 = map(float, domain)
    t0, t1 = map(float, target)
    L = u1 - u0
    edges = [r ** k for k in range(N + 1)] + [0.0]
    out = []
    for k in range(N + 1):
        s_hi, s_lo = edges[k], edges[k + 1]
        if accumulate == "lo":
            lo, hi = u0 + s_lo * L, u0 + s_hi * L
        else:
            lo, hi = u1 - s_hi * L, u1 - s_lo * L
        a = (t1 - t0) / (hi - lo)
        if orientation > 0:
            out.append(affine_branch(lo, hi, a, t0 - a * lo))
        else:
            out.append(affine_branch(lo, hi, -a, t1 + a * lo))
    for b in out:
        if abs(b.df(np.array([b.lo]))[0]) < SQRT2:
            raise ExpansionError("winding branch below the expansion floor")
    return out


def winding_map(N: int = 8, base_slope: float = 2.0, domain=(0.0, 1.0), accumulate="lo", orientation=1) -> PiecewiseMap1D:
    """Expanding map with ``N`` shrinking full branches plus a full remainder branch."""
    if N < 2:
        raise ParameterError("winding_map needs N >= 2")
    br = winding_branches(N, base_slope, domain, domain, accumulate, orientation)
    return PiecewiseMap1D(tuple(domain), br, name=f"winding_map(N={N})")


def doubling_map(domain=(0.0, 1.0)) -> PiecewiseMap1D:
    a, b = domain
    m = 0.5 * (a + b)
    return PiecewiseMap1D((a, b), [affine_branch(a, m, 2.0, -a), affine_branch(m, b, 2.0, a - 2.0 * m)],
                          name="doubling")


def disjoint_union(maps: Sequence[PiecewiseMap1D], name="union") -> PiecewiseMap1D:
    lo = min(m.domain[0] for m in maps)
    hi = max(m.domain[1] for m in maps)
    return PiecewiseMap1D((lo, hi), [b for m in maps for b in m.branches], name=name)


def two_block_doubling() -> PiecewiseMap1D:
    """Doubling maps on [0, 1/2] and [1/2, 1] side by side: two ergodic components."""
    left = PiecewiseMap1D((0.0, 0.5), [affine_branch(0.0, 0.25, 2.0, 0.0), affine_branch(0.25, 0.5, 2.0, -0.5)])
    right = PiecewiseMap1D((0.5, 1.0), [affine_branch(0.5, 0.75, 2.0, -0.5), affine_branch(0.75, 1.0, 2.0, -1.0)])
    return disjoint_union([left, right], name="two_block_doubling")
