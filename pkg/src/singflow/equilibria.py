"""Equilibrium search and spectral classification of 3-D vector fields."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .errors import ParameterError
from .fields import Field3

HYP_TOL = 1e-8
KINDS = ("lorenz_like", "saddle_focus", "saddle", "sink", "source", "non_hyperbolic")


@dataclass
class EquilibriumReport:
    location: np.ndarray
    eigenvalues: np.ndarray
    kind: str
    lambda_s: float | None = None
    lambda_u: float | None = None
    lambda_ss: float | None = None
    weak_stable_dir: np.ndarray | None = None

    def to_dict(self):
        def num(v):
            return None if v is None else float(v)
        return {
            "location": [float(v) for v in self.location],
            "eigenvalues": [{"re": float(z.real), "im": float(z.imag)} for z in self.eigenvalues],
            "kind": self.kind,
            "lambda_s": num(self.lambda_s),
            "lambda_u": num(self.lambda_u),
            "lambda_ss": num(self.lambda_ss),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def char_poly(J):
    """Monic coefficients of det(lambda I - J) for a 3x3 matrix."""
    J = np.asarray(J, dtype=float)
    tr = np.trace(J)
    m2 = (J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
          + J[0, 0] * J[2, 2] - J[0, 2] * J[2, 0]
          + J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1])
    return np.array([1.0, -tr, m2, -np.linalg.det(J)])


def eigenvalues_3x3(J):
    """Roots of the characteristic cubic via the companion matrix, Newton-polished."""
    c = char_poly(J)
    roots = np.roots(c).astype(complex)
    dc = np.polyder(c)
    for i, z in enumerate(roots):
        for _ in range(3):
            d = np.polyval(dc, z)
            if d == 0:
                break
            step = np.polyval(c, z) / d
            z = z - step
            if abs(step) <= 1e-16 * max(1.0, abs(z)):
                break
        roots[i] = z
    # tidy: exact reals where the imaginary part is roundoff
    scale = max(1.0, float(np.max(np.abs(roots))))
    roots = np.where(np.abs(roots.imag) <= 1e-12 * scale, roots.real + 0j, roots)
    return roots[np.lexsort((roots.imag, roots.real))]


def _null_vector(J, lam):
    _, _, vh = np.linalg.svd(J - lam * np.eye(3))
    v = vh[-1]
    return v if v[np.argmax(np.abs(v))] > 0 else -v


def classify(location, jacobian) -> EquilibriumReport:
    """Assign a kind from the spectrum of ``jacobian``.

    lorenz_like needs a real spectrum with lambda_ss < lambda_s < 0 < lambda_u
    and lambda_s + lambda_u > 0, each by more than ``HYP_TOL``.
    """
    J = np.asarray(jacobian, dtype=float)
    ev = eigenvalues_3x3(J)
    re = ev.real
    loc = np.asarray(location, dtype=float)
    real = np.all(ev.imag == 0)
    lam_u = float(re.max()) if np.any(re > 0) else None
    neg = re[re < 0]
    lam_s = float(neg.max()) if neg.size else None
    lam_ss = None
    if real and neg.size >= 2:
        lam_ss = float(neg.min())
    if np.any(np.abs(re) < HYP_TOL):
        return EquilibriumReport(loc, ev, "non_hyperbolic", lam_s, lam_u, lam_ss)
    n_pos = int(np.sum(re > 0))
    if n_pos == 0:
        kind = "sink"
    elif n_pos == 3:
        kind = "source"
    elif not real:
        kind = "saddle_focus"
    else:
        kind = "saddle"
        if n_pos == 1:
            l_ss, l_s, l_u = np.sort(re)
            if (l_s - l_ss > HYP_TOL and -l_s > HYP_TOL and l_u > HYP_TOL
                    and l_s + l_u > HYP_TOL):
                kind = "lorenz_like"
    rep = EquilibriumReport(loc, ev, kind, lam_s, lam_u, lam_ss)
    if kind == "lorenz_like":
        rep.weak_stable_dir = _null_vector(J, lam_s)
    return rep


def _seed_grid(field3: Field3, grid_res):
    axes = []
    for k in range(3):
        lo, hi = field3.lo[k], field3.hi[k]
        if hi - lo <= 0:
            axes.append(np.array([lo]))
            continue
        m = int(np.floor((hi - lo) / grid_res + 1e-9)) + 1
        end = hi if not field3.periodic[k] else hi - (hi - lo) / m
        axes.append(np.linspace(lo, end, m))
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    if field3.inside is not None:
        G = G[field3.inside(G)]
    return G


def _newton_steps(field3: Field3, X, iters=60, max_step=None):
    alive = np.ones(len(X), dtype=bool)
    for _ in range(iters):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        F = field3.eval(X[idx])
        J = field3.jac(X[idx])
        det = np.linalg.det(J)
        jscale = np.max(np.abs(J), axis=(1, 2)) ** 3 + 1e-300
        regular = np.abs(det) > 1e-12 * jscale
        step = np.zeros_like(F)
        if regular.any():
            step[regular] = np.linalg.solve(J[regular], F[regular][..., None])[..., 0]
        if (~regular).any():
            step[~regular] = np.einsum("nij,nj->ni", np.linalg.pinv(J[~regular]), F[~regular])
        if max_step is not None:
            nrm = np.linalg.norm(step, axis=1)
            step *= np.minimum(1.0, max_step / np.maximum(nrm, 1e-300))[:, None]
        Xn = X[idx] - step
        ok = np.all(np.isfinite(Xn), axis=1) & field3.contains(Xn, atol=1e-9 * field3.diameter)
        X[idx] = np.where(ok[:, None], Xn, X[idx])
        alive[idx[~ok]] = False
        small = np.linalg.norm(step, axis=1) <= 1e-15 * max(1.0, field3.diameter)
        alive[idx[small]] = False
    return X


def find_equilibria(field3: Field3, grid_res: float, vscale: float | None = None):
    """All equilibria reachable by damped Newton from a grid of seeds, classified."""
    edges = (field3.hi - field3.lo)[(field3.hi - field3.lo) > 0]
    if grid_res <= 0 or grid_res > 0.1 * edges.min() + 1e-12:
        raise ParameterError("grid_res must be positive and at most a tenth of the smallest box edge")
    X = _seed_grid(field3, grid_res).astype(float)
    X = _newton_steps(field3, X, max_step=2.0 * grid_res)
    if vscale is None:
        vscale = field3.velocity_scale()
    F = np.linalg.norm(field3.eval(X), axis=1)
    inside = field3.contains(X)
    roots = field3.reduce(X[(F <= 1e-10 * vscale) & inside])
    tol = 1e-6 * field3.diameter
    found = []
    for r in roots:
        if all(np.linalg.norm(r - q) > tol for q in found):
            found.append(r)
    found.sort(key=lambda p: tuple(p))
    return [classify(p, field3.jac(p[None])[0]) for p in found]


def count_lorenz_like(reports: Iterable[EquilibriumReport], member: Callable | None = None) -> int:
    """Number of Lorenz-like reports, optionally restricted by an attracting-set membership test."""
    return sum(1 for r in reports if r.kind == "lorenz_like" and (member is None or bool(member(r.location))))
