"""Adaptive Dormand-Prince 5(4) integration with dense output, section events and tangent flows.

Every routine is batched: states are ``(n, d)`` arrays, and each row carries
its own time and step size, so a whole seed grid advances in one numpy loop.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NumericError, ParameterError, StiffnessError
from .fields import Field3

log = logging.getLogger(__name__)

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array(_A[6] + [0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

SAFETY = 0.9
FAC_MIN, FAC_MAX = 0.2, 5.0
UNDERFLOW = 1e-14

OK, EXITED, STIFF, NONFINITE = 0, 1, 2, 3


def rk_step(rhs, y, f0, h):
    """One DOPRI step of per-row length ``h``; returns (y_new, f_new, err)."""
    hh = h[:, None]
    k = [f0]
    for s in range(1, 7):
        acc = None
        for j, a in enumerate(_A[s]):
            if a != 0.0:
                acc = a * k[j] if acc is None else acc + a * k[j]
        k.append(rhs(y + hh * acc))
    y_new = y + hh * sum(b * k[j] for j, b in enumerate(_A[6]) if b != 0.0)
    k[6] = rhs(y_new)
    err = hh * sum(e * kj for e, kj in zip(_E, k) if e != 0.0)
    return y_new, k[6], err


def rowmax_abs(a):
    """``np.abs(a).max(axis=1)`` without the slow short-axis reduction."""
    out = np.abs(a[:, 0])
    for j in range(1, a.shape[1]):
        np.maximum(out, np.abs(a[:, j]), out=out)
    return out


def hermite(y0, f0, y1, f1, h, theta):
    """Cubic Hermite interpolant on a step, ``theta`` in [0, 1] per row."""
    th = theta[:, None]
    hh = h[:, None]
    h00 = (1 + 2 * th) * (1 - th) ** 2
    h10 = th * (1 - th) ** 2
    h01 = th * th * (3 - 2 * th)
    h11 = th * th * (th - 1)
    return h00 * y0 + h10 * hh * f0 + h01 * y1 + h11 * hh * f1


def initial_step(rhs, y, f0, span, tol):
    d0 = np.max(np.abs(y), axis=1) + 1e-300
    d1 = np.max(np.abs(f0), axis=1) + 1e-300
    h = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * np.maximum(d0, 1.0) / d1)
    h = np.minimum(h, 0.01 * np.abs(span) + 1e-300)
    h = np.minimum(h, (tol ** 0.2) * 0.5 / np.maximum(d1 / np.maximum(d0, 1.0), 1e-300))
    return np.maximum(h, 1e-10 * np.abs(span))


@dataclass
class RunState:
    """Mutable per-row state of a batched run."""

    y: np.ndarray
    f: np.ndarray
    t: np.ndarray
    h: np.ndarray
    status: np.ndarray
    active: np.ndarray
    nsteps: int = 0


def run(rhs, y0, t0, t1, tol, *, h0=None, max_step=np.inf, on_step=None, check=None,
        raise_errors=True, max_steps=50_000_000):
    """Advance all rows of ``y0`` from ``t0`` to ``t1`` (either direction).

    ``on_step(idx, t_old, y_old, f_old, t_new, y_new, f_new, h)`` sees every
    accepted step; it may return a boolean mask of rows to stop.
    ``check(y_new)`` returns a mask of rows still inside the domain.
    """
    if not (1e-14 <= tol <= 1e-3):
        raise ParameterError(f"tol {tol} outside the supported range")
    y = np.array(y0, dtype=float, copy=True)
    if y.ndim != 2:
        raise ParameterError("batched state must be 2-D")
    n = y.shape[0]
    span = float(t1 - t0)
    direction = 1.0 if span >= 0 else -1.0
    f = rhs(y)
    t = np.full(n, float(t0))
    if h0 is None:
        h = initial_step(rhs, y, f, span, tol)
    else:
        h = np.broadcast_to(np.abs(np.asarray(h0, dtype=float)), (n,)).copy()
    st = RunState(y, f, t, h, np.zeros(n, dtype=int), np.full(n, span != 0.0))
    floor = UNDERFLOW * max(abs(t1), abs(span), 1e-300)
    tiny = 1e-12 * max(abs(t1), abs(t0), 1.0)
    all_rows = np.arange(n)
    while True:
        if st.active.all():
            idx = all_rows
        else:
            idx = np.nonzero(st.active)[0]
            if idx.size == 0:
                break
        remaining = direction * (t1 - st.t[idx])
        hs = np.minimum(np.minimum(st.h[idx], max_step), remaining)
        last = hs >= remaining - tiny
        hs[last] = remaining[last]
        ys, fs = st.y[idx], st.f[idx]
        y_new, f_new, err = rk_step(rhs, ys, fs, direction * hs)
        with np.errstate(invalid="ignore", over="ignore"):
            scale = tol * (1.0 + np.maximum(rowmax_abs(ys), rowmax_abs(y_new)))
            enorm = rowmax_abs(err) / scale
            finite = np.isfinite(enorm) & np.isfinite(rowmax_abs(f_new))
            acc = finite & (enorm <= 1.0)
            fac = SAFETY * np.maximum(enorm, 1e-10) ** -0.2
        fac = np.where(finite, np.clip(fac, FAC_MIN, FAC_MAX), FAC_MIN)
        fac[~acc] = np.minimum(fac[~acc], 1.0)
        new_h = hs * fac
        if last.any():
            keep = acc & last
            new_h[keep] = np.maximum(st.h[idx][keep], new_h[keep])
        underflow = ~acc & (new_h < floor)
        if underflow.any():
            rows = idx[underflow]
            if raise_errors:
                if not finite[underflow].any() and not np.isfinite(ys[underflow]).all():
                    raise NumericError("non-finite state")
                if not finite[underflow].any():
                    raise NumericError("non-finite state during step")
                raise StiffnessError(f"step size underflow at t={st.t[rows[0]]:.6g}")
            st.status[rows] = np.where(finite[underflow], STIFF, NONFINITE)
            st.active[rows] = False
            new_h[underflow] = st.h[rows]
        st.h[idx] = new_h
        if not acc.any():
            continue
        if acc.all():
            ai, yn, fn, hs_acc, last_acc = idx, y_new, f_new, hs, last
        else:
            ai, yn, fn, hs_acc, last_acc = idx[acc], y_new[acc], f_new[acc], hs[acc], last[acc]
        t_old = st.t[ai]
        y_old, f_old = st.y[ai], st.f[ai]
        t_new = t_old + direction * hs_acc
        t_new[last_acc] = float(t1)
        st.y[ai], st.f[ai], st.t[ai] = yn, fn, t_new
        st.nsteps += 1
        if st.nsteps > max_steps:
            raise StiffnessError("step budget exhausted")
        stop = last_acc.copy()
        if check is not None:
            out = ~check(yn)
            if out.any():
                st.status[ai[out]] = EXITED
                stop |= out
        if on_step is not None:
            r = on_step(ai, t_old, y_old, f_old, t_new, yn, fn, direction * hs_acc)
            if r is not None:
                stop |= r
        if stop.any():
            st.active[ai[stop]] = False
    return st


def field_rhs(field3: Field3):
    return lambda Y: field3.eval(Y)


def domain_check(field3: Field3):
    return lambda Y: field3.contains(Y[:, :3])


# ---------------------------------------------------------------------------
# single trajectories

@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    dense: bool = True
    exited: bool = False

    def at(self, t):
        """Dense-output state(s) at time(s) ``t`` inside the integrated span."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ts = self.times
        forward = ts[-1] >= ts[0]
        key = ts if forward else -ts
        q = t if forward else -t
        if np.any(q < key[0] - 1e-12) or np.any(q > key[-1] + 1e-12):
            raise DomainError("time outside the integrated span")
        i = np.clip(np.searchsorted(key, q, side="right") - 1, 0, len(ts) - 2)
        h = ts[i + 1] - ts[i]
        theta = (t - ts[i]) / h
        return hermite(self.states[i], self.derivs[i], self.states[i + 1], self.derivs[i + 1], h, theta)

    @property
    def t_final(self):
        return float(self.times[-1])

    @property
    def final(self):
        return self.states[-1]


def _collector(times, states, derivs):
    def hook(idx, t_old, y_old, f_old, t_new, y_new, f_new, h):
        times.append(float(t_new[0]))
        states.append(y_new[0, :3].copy())
        derivs.append(f_new[0, :3].copy())
    return hook


def integrate(field3: Field3, x0, t_end, tol=1e-9, max_step=np.inf, dense=True) -> Trajectory:
    """Integrate one trajectory from time 0 to ``t_end``.

    Stops early, with ``exited=True``, the first time the state leaves the
    field's domain.
    """
    x0 = np.asarray(x0, dtype=float).reshape(1, 3)
    if not field3.contains(x0)[0]:
        raise DomainError("initial condition outside the field domain")
    f0 = field3.eval(x0)
    times, states, derivs = [0.0], [x0[0].copy()], [f0[0].copy()]
    st = run(field_rhs(field3), x0, 0.0, float(t_end), tol, max_step=max_step,
             on_step=_collector(times, states, derivs), check=domain_check(field3))
    return Trajectory(np.array(times), np.array(states), np.array(derivs), dense=dense,
                      exited=bool(st.status[0] == EXITED))


def integrate_batch(field3: Field3, X0, t_end, tol=1e-9, max_step=np.inf, on_step=None, raise_errors=False):
    """Endpoints of many trajectories; rows that leave the domain freeze at their exit step."""
    X0 = np.asarray(X0, dtype=float)
    return run(field_rhs(field3), X0, 0.0, float(t_end), tol, max_step=max_step,
               on_step=on_step, check=domain_check(field3), raise_errors=raise_errors)


def write_trajectory_csv(traj: Trajectory, path, stride=0.01):
    """Resample on a uniform grid of spacing ``stride`` and write ``t,x,y,z`` rows."""
    t0, t1 = traj.times[0], traj.times[-1]
    n = int(np.floor(abs(t1 - t0) / stride + 1e-9)) + 1
    ts = t0 + np.sign(t1 - t0 or 1.0) * stride * np.arange(n)
    X = traj.at(ts)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "y", "z"])
        for t, x in zip(ts, X):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x])
    return path


# ---------------------------------------------------------------------------
# cross-sections

@dataclass(frozen=True)
class Section:
    """Axis-aligned rectangle ``{x[axis] = offset}``; ``bounds`` lists the other two axes in order."""

    id: str
    axis: int
    offset: float
    bounds: tuple = ((-np.inf, np.inf), (-np.inf, np.inf))
    direction: int = 0

    @property
    def in_plane(self):
        return tuple(k for k in range(3) if k != self.axis)

    def within(self, X, atol=1e-12):
        X = np.atleast_2d(X)
        ok = np.ones(len(X), dtype=bool)
        for (lo, hi), k in zip(self.bounds, self.in_plane):
            ok &= (X[:, k] >= lo - atol) & (X[:, k] <= hi + atol)
        return ok


@dataclass
class CrossingEvent:
    time: float
    state: np.ndarray
    section_id: str
    direction: int
    grazing: bool = False


GRAZING = 1e-9


def _signed_distance(field3, sec, Y):
    d = Y[:, sec.axis] - sec.offset
    if field3.periodic[sec.axis]:
        P = field3.hi[sec.axis] - field3.lo[sec.axis]
        d = np.mod(d + 0.5 * P, P) - 0.5 * P
    return d


def _polish(field3, sections, sec_idx, t_old, y_old, f_old, s, rounds=6, dtol=1e-13):
    """Newton in the step fraction using fresh RK sub-steps from the step start."""
    rhs = field_rhs(field3)
    axes = np.array([sections[j].axis for j in sec_idx])
    rows = np.arange(len(s))
    for _ in range(rounds):
        y, f, _ = rk_step(rhs, y_old, f_old, s)
        d = np.empty(len(s))
        for j in np.unique(sec_idx):
            m = sec_idx == j
            d[m] = _signed_distance(field3, sections[j], y[m])
        v = f[rows, axes]
        ok = np.abs(v) > 0
        ds = np.where(ok, d / np.where(ok, v, 1.0), 0.0)
        s = s - ds
        if np.all(np.abs(d) <= dtol):
            break
    y, f, _ = rk_step(rhs, y_old, f_old, s)
    return y, f, s


def integrate_to_sections(field3: Field3, X0, sections: Sequence[Section], t_max, tol=1e-10,
                          dead_time=1e-6):
    """First crossing of any of ``sections`` for each row of ``X0``.

    Returns ``(times, states, section_index, grazing)``; rows with no crossing
    before ``t_max`` (or that leave the domain first) get section index -1.
    """
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    n = len(X0)
    sections = list(sections)
    if t_max <= 0:
        raise ParameterError("t_max must be positive")
    times = np.full(n, np.nan)
    states = np.full((n, 3), np.nan)
    which = np.full(n, -1)
    grazing = np.zeros(n, dtype=bool)
    diam = max(field3.diameter, 1.0)
    rhs = field_rhs(field3)

    def hook(idx, t_old, y_old, f_old, t_new, y_new, f_new, h):
        stop = np.zeros(len(idx), dtype=bool)
        best = np.full(len(idx), np.inf)
        best_j = np.full(len(idx), -1)
        for j, sec in enumerate(sections):
            d0 = _signed_distance(field3, sec, y_old)
            d1 = _signed_distance(field3, sec, y_new)
            cand = (d0 * d1 < 0) | ((d1 == 0) & (d0 != 0))
            if field3.periodic[sec.axis]:
                P = field3.hi[sec.axis] - field3.lo[sec.axis]
                cand &= (np.abs(d0) < 0.25 * P) & (np.abs(d1) < 0.25 * P)
            if sec.direction:
                cand &= np.sign(d1 - d0) == sec.direction
            cand &= (t_new - 0.0) * np.sign(h) > dead_time
            if not cand.any():
                continue
            c = np.nonzero(cand)[0]
            # bisection on the Hermite interpolant
            lo = np.zeros(len(c))
            hi = np.ones(len(c))
            s0 = np.sign(d0[c])
            for _ in range(50):
                mid = 0.5 * (lo + hi)
                ym = hermite(y_old[c], f_old[c], y_new[c], f_new[c], h[c], mid)
                dm = _signed_distance(field3, sec, ym)
                same = np.sign(dm) == s0
                lo = np.where(same, mid, lo)
                hi = np.where(same, hi, mid)
            theta = 0.5 * (lo + hi)
            better = theta < best[c]
            best[c[better]] = theta[better]
            best_j[c[better]] = j
        hit = np.nonzero(best_j >= 0)[0]
        if hit.size == 0:
            return stop
        s = best[hit] * h[hit]
        y, f, s = _polish(field3, sections, best_j[hit], t_old[hit], y_old[hit], f_old[hit], s)
        tc = t_old[hit] + s
        for r, row in enumerate(hit):
            sec = sections[best_j[row]]
            if abs(tc[r]) <= dead_time:
                continue
            if not sec.within(y[r:r + 1], atol=1e-12 * diam)[0]:
                continue
            g = idx[row]
            times[g] = tc[r]
            states[g] = y[r]
            which[g] = best_j[row]
            vn = f[r, sec.axis]
            grazing[g] = abs(vn) < GRAZING
            stop[row] = True
        return stop

    run(rhs, X0, 0.0, float(t_max), tol, on_step=hook, check=domain_check(field3), raise_errors=False)
    return times, states, which, grazing


def integrate_to_section(field3: Field3, x0, section: Section | Sequence[Section], t_max, tol=1e-10,
                         dead_time=1e-6):
    """First crossing of ``section`` (or of any section in a list) after ``dead_time``.

    Returns ``None`` on timeout. Grazing crossings are returned with
    ``grazing=True`` and a logged warning.
    """
    secs = [section] if isinstance(section, Section) else list(section)
    t, X, j, g = integrate_to_sections(field3, np.asarray(x0, dtype=float)[None, :], secs, t_max, tol, dead_time)
    if j[0] < 0:
        return None
    sec = secs[j[0]]
    vn = field3.eval(X[0])[sec.axis]
    if g[0]:
        log.warning("grazing crossing of %s at t=%.6g", sec.id, t[0])
    return CrossingEvent(float(t[0]), X[0], sec.id, int(np.sign(vn)), bool(g[0]))


# ---------------------------------------------------------------------------
# tangent dynamics

@dataclass
class TangentLog:
    """Renormalization record: ``log_growth[i]`` is the log norm (vector) or log area (frame) gained on interval i."""

    times: np.ndarray
    log_growth: np.ndarray
    final_tangent: np.ndarray
    exited: bool = False

    @property
    def rate(self):
        span = self.times[-1] - self.times[0] if len(self.times) > 1 else np.nan
        return float(np.sum(self.log_growth) / span)


def _tangent_rhs(field3, m):
    def rhs(Y):
        x = Y[:, :3]
        V = Y[:, 3:].reshape(-1, 3, m)
        dV = np.einsum("nij,njk->nik", field3.jac(x), V)
        return np.concatenate([field3.eval(x), dV.reshape(len(Y), -1)], axis=1)
    return rhs


def _normalize(V, F=None):
    """Orthonormalize columns; returns (Q, log growth). ``F`` projects off the flow first."""
    if F is not None:
        nF = np.linalg.norm(F, axis=1)
        u = F / np.where(nF > 0, nF, 1.0)[:, None]
        use = nF > 1e-12
        proj = np.einsum("ni,nik->nk", u, V)
        V = V - np.where(use[:, None, None], u[:, :, None] * proj[:, None, :], 0.0)
    if V.shape[2] == 1:
        nv = np.linalg.norm(V[:, :, 0], axis=1)
        return V / nv[:, None, None], np.log(nv)
    Q, R = np.linalg.qr(V)
    diag = np.abs(np.diagonal(R, axis1=1, axis2=2))
    return Q, np.sum(np.log(diag), axis=1)


def tangent_batch(field3: Field3, X0, V0, t_end, tol=1e-9, renorm=1.0, project=False, on_step=None):
    """Joint state/tangent flow for a batch; returns ``(x_final, TangentLog list-like arrays)``.

    ``V0`` has shape ``(n, 3)`` or ``(n, 3, m)``. With ``project`` the tangent is
    kept orthogonal to the flow direction (linear Poincare flow), except at
    points where the velocity vanishes.
    """
    X = np.atleast_2d(np.asarray(X0, dtype=float))
    V = np.asarray(V0, dtype=float)
    if V.ndim == 1:
        V = np.broadcast_to(V, (len(X), 3)).copy()
    if V.ndim == 2:
        V = V[:, :, None]
    n, _, m = V.shape
    F0 = field3.eval(X) if project else None
    V, _ = _normalize(V, F0)
    if not np.all(np.isfinite(V)):
        raise ParameterError("tangent data must be nonzero / of full rank")
    rhs = _tangent_rhs(field3, m)
    check = domain_check(field3)
    direction = 1.0 if t_end >= 0 else -1.0
    n_int = int(np.ceil(abs(t_end) / renorm - 1e-12))
    grid = direction * np.minimum(renorm * np.arange(n_int + 1), abs(t_end))
    logs = np.zeros((n, n_int))
    exited = np.zeros(n, dtype=bool)
    h = None
    Y = np.concatenate([X, V.reshape(n, -1)], axis=1)
    alive = np.ones(n, dtype=bool)
    for i in range(n_int):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        st = run(rhs, Y[idx], grid[i], grid[i + 1], tol, h0=None if h is None else h[idx],
                 check=check, on_step=on_step, raise_errors=False)
        if h is None:
            h = np.zeros(n)
        h[idx] = st.h
        bad = st.status != OK
        if np.any(st.status[bad] != EXITED):
            raise NumericError("non-finite tangent growth")
        exited[idx[bad]] = True
        alive[idx[bad]] = False
        good = idx[~bad]
        y = st.y[~bad]
        if len(y) == 0:
            Y[idx[bad]] = st.y[bad]
            continue
        Vi = y[:, 3:].reshape(-1, 3, m)
        F = field3.eval(y[:, :3]) if project else None
        Q, lg = _normalize(Vi, F)
        if not np.all(np.isfinite(lg)):
            raise NumericError("non-finite tangent growth")
        logs[good, i] = lg
        if len(good):
            Y[good] = np.concatenate([y[:, :3], Q.reshape(len(good), -1)], axis=1)
        Y[idx[bad]] = st.y[bad]
    times = grid
    finals = Y[:, 3:].reshape(n, 3, m)
    return Y[:, :3], times, logs, finals, exited


def integrate_with_tangent(field3: Field3, x0, v0, t_end, tol=1e-9, renorm=1.0, project=False):
    """One trajectory plus its tangent vector (shape 3) or frame (shape 3x2)."""
    x0 = np.asarray(x0, dtype=float).reshape(1, 3)
    v0 = np.asarray(v0, dtype=float)[None]
    times, states, derivs = [0.0], [x0[0].copy()], [field3.eval(x0)[0]]
    xf, grid, logs, finals, exited = tangent_batch(field3, x0, v0, t_end, tol, renorm, project,
                                                   on_step=_collector(times, states, derivs))
    # trim the renormalization grid to what was actually integrated
    k = len(grid) if not exited[0] else int(np.searchsorted(np.abs(grid), abs(times[-1]), side="right"))
    traj = Trajectory(np.array(times), np.array(states), np.array(derivs), exited=bool(exited[0]))
    tl = TangentLog(grid[:k], logs[0, :max(k - 1, 0)], finals[0], exited=bool(exited[0]))
    return traj, tl


@dataclass
class SectionalFit:
    K_est: float
    theta_est: float
    residual: float
    inconclusive: bool


def fit_log_growth(times, cumulative):
    """Least-squares ``cumulative ~ log K + theta t``."""
    A = np.stack([np.ones_like(times), times], axis=1)
    coef, *_ = np.linalg.lstsq(A, cumulative, rcond=None)
    resid = cumulative - A @ coef
    rng = float(np.ptp(cumulative)) if len(cumulative) else 0.0
    r = float(np.max(np.abs(resid))) if len(resid) else 0.0
    return SectionalFit(float(np.exp(coef[0])), float(coef[1]), r, bool(r > 0.1 * rng) if rng > 0 else True)


def sectional_expansion_estimate(field3: Field3, seed, frame, horizon, tol=1e-9, renorm=1.0):
    """Fit accumulated log area growth of a 2-frame to ``log K + theta t``."""
    frame = np.asarray(frame, dtype=float)
    if frame.shape != (3, 2):
        raise ParameterError("frame must be 3x2")
    _, tl = integrate_with_tangent(field3, seed, frame, horizon, tol=tol, renorm=renorm)
    cum = np.concatenate([[0.0], np.cumsum(tl.log_growth)])
    return fit_log_growth(tl.times[:len(cum)], cum)


def sectional_expansion_batch(field3: Field3, seeds, frames, horizon, tol=1e-8, renorm=1.0):
    """Vectorized sectional fit over many (seed, frame) pairs; returns a list of SectionalFit."""
    _, grid, logs, _, exited = tangent_batch(field3, seeds, frames, horizon, tol, renorm)
    out = []
    for row, ex in zip(logs, exited):
        cum = np.concatenate([[0.0], np.cumsum(row)])
        out.append(fit_log_growth(grid[:len(cum)], cum))
    return out


def lyapunov_top_flow(field3: Field3, seed, horizon, tol=1e-9, v0=None, renorm=1.0, burn_in=0.0, transient=0.25):
    """Largest Lyapunov exponent transverse to the flow (Benettin renormalization).

    Growth over the first ``transient`` fraction of the horizon, while the
    tangent vector is still turning towards the top direction, is dropped.
    """
    if v0 is None:
        v0 = np.array([0.5773, 0.5774, 0.5775])
    x = np.asarray(seed, dtype=float)
    if burn_in > 0:
        x = integrate(field3, x, burn_in, tol).final
    _, tl = integrate_with_tangent(field3, x, v0, horizon, tol=tol, renorm=renorm, project=True)
    m = len(tl.log_growth)
    if tl.exited or m == 0:
        raise NumericError("trajectory left the domain before a growth estimate was formed")
    k0 = min(int(transient * m), m - 1)
    span = abs(tl.times[m] - tl.times[k0])
    lam = float(np.sum(tl.log_growth[k0:]) / span)
    if not np.isfinite(lam):
        raise NumericError("non-finite Lyapunov estimate")
    return lam
