"""Vector fields on boxes in 3-space and the builders for every model field.

All fields evaluate on arrays of shape ``(..., 3)`` and return velocities of
the same shape; Jacobians come back as ``(..., 3, 3)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import CompositionError, DomainError, ParameterError

PI = np.pi


@dataclass(frozen=True, eq=False)
class Field3:
    """A smooth vector field on an axis-aligned box.

    Periodic axes are reduced modulo the box edge before evaluation, so a
    trajectory may carry an unreduced coordinate (e.g. the suspension's
    circle coordinate) without ever leaving the domain.
    """

    name: str
    lo: np.ndarray
    hi: np.ndarray
    _eval: Callable[[np.ndarray], np.ndarray]
    _jac: Callable[[np.ndarray], np.ndarray]
    periodic: tuple = (False, False, False)
    inside: Callable[[np.ndarray], np.ndarray] | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))
        object.__setattr__(self, "periodic", tuple(bool(p) for p in self.periodic))
        if np.any(self.hi < self.lo):
            raise ParameterError(f"{self.name}: degenerate domain box")

    def reduce(self, X):
        X = np.asarray(X, dtype=float)
        if not any(self.periodic):
            return X
        X = X.copy()
        for k, per in enumerate(self.periodic):
            if per:
                span = self.hi[k] - self.lo[k]
                X[..., k] = self.lo[k] + np.mod(X[..., k] - self.lo[k], span)
        return X

    def eval(self, X):
        return self._eval(self.reduce(X))

    def jac(self, X):
        return self._jac(self.reduce(X))

    __call__ = eval

    @property
    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))

    def contains(self, X, atol=0.0):
        X = self.reduce(X)
        ok = np.ones(X.shape[:-1], dtype=bool)
        for k in range(3):
            if not self.periodic[k]:
                ok &= (X[..., k] >= self.lo[k] - atol) & (X[..., k] <= self.hi[k] + atol)
        if self.inside is not None:
            ok &= self.inside(X)
        return ok

    def sample(self, rng, n, shrink=0.0):
        """Uniform interior samples (rejection against ``inside``)."""
        span = self.hi - self.lo
        lo = self.lo + shrink * span
        hi = self.hi - shrink * span
        out = []
        count = 0
        while count < n:
            X = lo + (hi - lo) * rng.random((2 * n + 16, 3))
            X = X[self.contains(X)]
            out.append(X)
            count += len(X)
        return np.concatenate(out)[:n]

    def velocity_scale(self, n=4096, seed=0):
        X = self.sample(np.random.default_rng(seed), n)
        return float(np.max(np.linalg.norm(self.eval(X), axis=-1)))


@dataclass(frozen=True)
class LorenzParams:
    a: float = 10.0
    b: float = 8.0 / 3.0
    r: float = 28.0

    def __post_init__(self):
        for name in ("a", "b", "r"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"Lorenz parameter {name} must be positive, got {v!r}")


# ---------------------------------------------------------------------------
# bump profiles and partitions of unity

def smoothstep(t):
    """Quintic ramp 0 -> 1 on [0, 1], C^2 at both ends, clamped outside."""
    t = np.clip(t, 0.0, 1.0)
    # clamp guards rounding overshoot near t = 1
    return np.minimum(t * t * t * (t * (6.0 * t - 15.0) + 10.0), 1.0)


def smoothstep_deriv(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * t * t * (1.0 - t) ** 2, 0.0)


@dataclass(frozen=True)
class BallRegion:
    """Weight 1 within ``r_in`` of ``center`` and 0 beyond ``r_out``.

    ``axes`` selects the coordinates the radius is measured in, so
    ``axes=(True, True, False)`` gives a solid cylinder along z.
    """

    center: tuple
    r_in: float
    r_out: float
    axes: tuple = (True, True, True)

    def __post_init__(self):
        if not 0 <= self.r_in < self.r_out:
            raise ParameterError("BallRegion needs 0 <= r_in < r_out")

    def _offset(self, X):
        mask = np.asarray(self.axes, dtype=float)
        return (X - np.asarray(self.center, dtype=float)) * mask

    def weight(self, X):
        d = self._offset(X)
        rho = np.linalg.norm(d, axis=-1)
        return 1.0 - smoothstep((rho - self.r_in) / (self.r_out - self.r_in))

    def gradient(self, X):
        d = self._offset(X)
        rho = np.linalg.norm(d, axis=-1)
        width = self.r_out - self.r_in
        ds = smoothstep_deriv((rho - self.r_in) / width) / width
        safe = np.where(rho > 0, rho, 1.0)
        return -(ds / safe)[..., None] * d

    def outer_bounds(self):
        c = np.asarray(self.center, dtype=float)
        lo = np.where(self.axes, c - self.r_out, -np.inf)
        hi = np.where(self.axes, c + self.r_out, np.inf)
        return lo, hi


def _ramp(x, olo, ilo, ihi, ohi):
    """Per-axis trapezoid: 0 outside [olo, ohi], 1 on [ilo, ihi]."""
    w = np.ones_like(x)
    dw = np.zeros_like(x)
    if np.isfinite(ilo):
        t = (x - olo) / (ilo - olo)
        w = w * smoothstep(t)
        dw = smoothstep_deriv(t) / (ilo - olo)
    if np.isfinite(ihi):
        t = (ohi - x) / (ohi - ihi)
        s, ds = smoothstep(t), -smoothstep_deriv(t) / (ohi - ihi)
        dw = dw * s + w * ds
        w = w * s
    return w, dw


@dataclass(frozen=True)
class BoxRegion:
    """Weight 1 on the inner box, 0 outside the outer box, product ramps between.

    Infinite bounds switch an axis off.
    """

    inner_lo: tuple
    inner_hi: tuple
    outer_lo: tuple
    outer_hi: tuple

    def __post_init__(self):
        for k in range(3):
            if not (self.outer_lo[k] <= self.inner_lo[k] <= self.inner_hi[k] <= self.outer_hi[k]):
                raise ParameterError("BoxRegion bounds must nest outer <= inner")
            if np.isfinite(self.inner_lo[k]) and self.outer_lo[k] == self.inner_lo[k]:
                raise ParameterError("BoxRegion needs a nonzero ramp width")
            if np.isfinite(self.inner_hi[k]) and self.outer_hi[k] == self.inner_hi[k]:
                raise ParameterError("BoxRegion needs a nonzero ramp width")

    def _ramps(self, X):
        parts = [_ramp(X[..., k], self.outer_lo[k], self.inner_lo[k], self.inner_hi[k], self.outer_hi[k])
                 for k in range(3)]
        return [p[0] for p in parts], [p[1] for p in parts]

    def weight(self, X):
        w, _ = self._ramps(np.asarray(X, dtype=float))
        return w[0] * w[1] * w[2]

    def gradient(self, X):
        w, dw = self._ramps(np.asarray(X, dtype=float))
        return np.stack([dw[0] * w[1] * w[2], w[0] * dw[1] * w[2], w[0] * w[1] * dw[2]], axis=-1)

    def outer_bounds(self):
        return np.asarray(self.outer_lo, dtype=float), np.asarray(self.outer_hi, dtype=float)


@dataclass(frozen=True)
class ComplementRegion:
    """Whatever weight the other regions leave over."""

    def outer_bounds(self):
        return np.full(3, -np.inf), np.full(3, np.inf)


@dataclass(frozen=True)
class BumpPartition:
    regions: tuple

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        n_comp = sum(isinstance(r, ComplementRegion) for r in self.regions)
        if n_comp > 1:
            raise ParameterError("at most one complement region is allowed")

    def __len__(self):
        return len(self.regions)

    def weights(self, X):
        X = np.asarray(X, dtype=float)
        out = np.zeros((len(self.regions),) + X.shape[:-1])
        comp = None
        for i, reg in enumerate(self.regions):
            if isinstance(reg, ComplementRegion):
                comp = i
            else:
                out[i] = reg.weight(X)
        if comp is not None:
            out[comp] = 1.0 - out.sum(axis=0)
        return out

    def gradients(self, X):
        X = np.asarray(X, dtype=float)
        out = np.zeros((len(self.regions),) + X.shape)
        comp = None
        for i, reg in enumerate(self.regions):
            if isinstance(reg, ComplementRegion):
                comp = i
            else:
                out[i] = reg.gradient(X)
        if comp is not None:
            out[comp] = -out.sum(axis=0)
        return out


@dataclass(frozen=True)
class PotentialProfile:
    """A C^2 potential on the line, vanishing at 0 and 1 and negative between."""

    phi: Callable = lambda u: -(u ** 2) * (1.0 - u) ** 2
    dphi: Callable = lambda u: -2.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
    d2phi: Callable = lambda u: -2.0 * (1.0 - 6.0 * u + 6.0 * u * u)

    def check(self):
        if self.phi(0.0) != 0.0 or self.phi(1.0) != 0.0:
            raise ParameterError("potential must vanish at 0 and 1")
        grid = np.arange(1, 1000) * 1e-3
        if not np.max(self.phi(grid)) < 0.0:
            raise ParameterError("potential must be negative on (0, 1)")
        return True


# ---------------------------------------------------------------------------
# builders

def lorenz_classic(p: LorenzParams | None = None, lo=(-48.0, -48.0, -10.0), hi=(48.0, 48.0, 86.0)) -> Field3:
    p = LorenzParams() if p is None else p
    if not isinstance(p, LorenzParams):
        raise ParameterError("expected LorenzParams")
    a, b, r = p.a, p.b, p.r

    def f(X):
        x, y, z = X[..., 0], X[..., 1], X[..., 2]
        out = np.empty(X.shape)
        out[..., 0] = a * (y - x)
        out[..., 1] = r * x - y - x * z
        out[..., 2] = x * y - b * z
        return out

    def jac(X):
        x, y, z = X[..., 0], X[..., 1], X[..., 2]
        J = np.zeros(X.shape + (3,))
        J[..., 0, 0] = -a
        J[..., 0, 1] = a
        J[..., 1, 0] = r - z
        J[..., 1, 1] = -1.0
        J[..., 1, 2] = -x
        J[..., 2, 0] = y
        J[..., 2, 1] = x
        J[..., 2, 2] = -b
        return J

    return Field3("lorenz_classic", lo, hi, f, jac, params={"a": a, "b": b, "r": r})


def _check_k(k):
    if int(k) != k or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k!r}")
    return int(k)


def _ms_x(x):
    # descent of g(x) = sin(pi x): sinks at the minima 2i - 1/2
    return -PI * np.cos(PI * x)


def _ms_dx(x):
    return PI * PI * np.sin(PI * x)


def morse_smale_plane(k: int) -> Field3:
    k = _check_k(k)

    def f(X):
        return np.stack([_ms_x(X[..., 0]), -X[..., 1], np.zeros(X.shape[:-1])], axis=-1)

    def jac(X):
        J = np.zeros(X.shape + (3,))
        J[..., 0, 0] = _ms_dx(X[..., 0])
        J[..., 1, 1] = -1.0
        return J

    return Field3(f"morse_smale_plane_{k}", (-1.0, -1.0, 0.0), (2.0 * k, 1.0, 0.0), f, jac, params={"k": k})


def suspension_field(k: int) -> Field3:
    """Morse-Smale plane flow times the circle, circle speed 1."""
    k = _check_k(k)

    def f(X):
        return np.stack([_ms_x(X[..., 0]), -X[..., 1], np.ones(X.shape[:-1])], axis=-1)

    def jac(X):
        J = np.zeros(X.shape + (3,))
        J[..., 0, 0] = _ms_dx(X[..., 0])
        J[..., 1, 1] = -1.0
        return J

    return Field3(f"suspension_{k}", (-1.0, -1.0, 0.0), (2.0 * k, 1.0, 1.0), f, jac,
                  periodic=(False, False, True), params={"k": k})


SPACE_RATE = PI
_C8 = np.cos(PI / 4.0)


def space_profile(x):
    """Periodic profile with simple zeros exactly at 40i - 5 (decreasing) and 40i + 5 (increasing)."""
    u = (x + 5.0) / 40.0
    return SPACE_RATE * (_C8 - np.cos(2.0 * PI * (u - 0.125)))


def space_profile_deriv(x):
    u = (x + 5.0) / 40.0
    return SPACE_RATE * 2.0 * PI / 40.0 * np.sin(2.0 * PI * (u - 0.125))


def morse_smale_space(k: int) -> Field3:
    k = _check_k(k)

    def f(X):
        return np.stack([space_profile(X[..., 0]), X[..., 1], -X[..., 2]], axis=-1)

    def jac(X):
        J = np.zeros(X.shape + (3,))
        J[..., 0, 0] = space_profile_deriv(X[..., 0])
        J[..., 1, 1] = 1.0
        J[..., 2, 2] = -1.0
        return J

    return Field3(f"morse_smale_space_{k}", (-10.0, -5.0, -5.0), (40.0 * k, 5.0, 5.0), f, jac, params={"k": k})


def tube_field(axis_len: float = 1.0, profile: PotentialProfile | None = None) -> Field3:
    """Planar gradient of phi(40 r^2 - 1/2) across the disk, unit speed along the axis."""
    if not axis_len > 0:
        raise ParameterError("axis_len must be positive")
    profile = PotentialProfile() if profile is None else profile
    profile.check()

    def inside(X):
        return X[..., 0] ** 2 + X[..., 1] ** 2 <= 1.0

    def _guard(X):
        if not np.all(inside(X)) or np.any(X[..., 2] < 0) or np.any(X[..., 2] > axis_len):
            raise DomainError("tube field evaluated outside its cylinder")

    def f(X):
        _guard(X)
        x, y = X[..., 0], X[..., 1]
        g = 80.0 * profile.dphi(40.0 * (x * x + y * y) - 0.5)
        return np.stack([g * x, g * y, np.ones(X.shape[:-1])], axis=-1)

    def jac(X):
        _guard(X)
        x, y = X[..., 0], X[..., 1]
        u = 40.0 * (x * x + y * y) - 0.5
        g = 80.0 * profile.dphi(u)
        h = 6400.0 * profile.d2phi(u)
        J = np.zeros(X.shape + (3,))
        J[..., 0, 0] = g + h * x * x
        J[..., 0, 1] = h * x * y
        J[..., 1, 0] = h * x * y
        J[..., 1, 1] = g + h * y * y
        return J

    return Field3("tube", (-1.0, -1.0, 0.0), (1.0, 1.0, axis_len), f, jac, inside=inside,
                  params={"axis_len": axis_len})


def linear_field(diag, lo=(-1.5, -1.5, -1.5), hi=(1.5, 1.5, 1.5)) -> Field3:
    A = np.diag(np.asarray(diag, dtype=float)) if np.ndim(diag) == 1 else np.asarray(diag, dtype=float)

    def f(X):
        return X @ A.T

    def jac(X):
        return np.broadcast_to(A, X.shape + (3,)).copy()

    return Field3("linear", lo, hi, f, jac, params={"A": A.tolist()})


def constant_field(v, lo=(-1.0, -1.0, -1.0), hi=(1.0, 1.0, 2.0)) -> Field3:
    v = np.asarray(v, dtype=float)

    def f(X):
        return np.broadcast_to(v, X.shape).copy()

    def jac(X):
        return np.zeros(X.shape + (3,))

    return Field3("constant", lo, hi, f, jac, params={"v": v.tolist()})


@dataclass(frozen=True)
class DiskField:
    """A planar field on the unit disk plus an axial speed; its flow suspends a disk map.

    ``planar(w)`` and ``axial(w)`` take ``(..., 2)`` disk coordinates; the
    derivative callables return ``(..., 2, 2)`` and ``(..., 2)``.
    """

    planar: Callable
    planar_jac: Callable
    axial: Callable
    axial_grad: Callable


def rotating_sink(omega: float = 2.0, rate: float = 1.0) -> DiskField:
    """Default attached piece: an attracting focus, i.e. a periodic sink after suspension."""
    A = np.array([[-rate, -omega], [omega, -rate]])
    return DiskField(
        planar=lambda w: w @ A.T,
        planar_jac=lambda w: np.broadcast_to(A, w.shape + (2,)).copy(),
        axial=lambda w: np.ones(w.shape[:-1]),
        axial_grad=lambda w: np.zeros(w.shape),
    )


def attached_disk_field(center, eps: float, disk: DiskField, period: float = 1.0) -> Field3:
    """Rescale ``disk`` into the solid cylinder of radius ``eps/2`` around ``center`` (x, y)."""
    c = np.asarray(center, dtype=float)
    s = 0.5 * eps

    def f(X):
        w = (X[..., :2] - c) / s
        return np.concatenate([s * disk.planar(w), disk.axial(w)[..., None]], axis=-1)

    def jac(X):
        w = (X[..., :2] - c) / s
        J = np.zeros(X.shape + (3,))
        J[..., :2, :2] = disk.planar_jac(w)
        J[..., 2, :2] = disk.axial_grad(w) / s
        return J

    lo = (c[0] - eps, c[1] - eps, 0.0)
    hi = (c[0] + eps, c[1] + eps, period)
    return Field3("attached_disk", lo, hi, f, jac, periodic=(False, False, True),
                  params={"center": c.tolist(), "eps": eps})


def blend(fields: Sequence[Field3], partition: BumpPartition, domain: Field3 | None = None, name="blend") -> Field3:
    """Pointwise combination sum_i w_i F_i with a product-rule Jacobian.

    A field is only evaluated where its weight is positive, so it never has
    to be defined outside its region's outer set.
    """
    fields = list(fields)
    if len(fields) != len(partition):
        raise CompositionError(f"{len(fields)} fields but {len(partition)} partition regions")
    if not fields:
        raise CompositionError("nothing to blend")
    if domain is None:
        comp = [f for f, r in zip(fields, partition.regions) if isinstance(r, ComplementRegion)]
        domain = comp[0] if comp else fields[0]
    dlo, dhi = domain.lo, domain.hi
    for F, reg in zip(fields, partition.regions):
        rlo, rhi = reg.outer_bounds()
        rlo = np.maximum(rlo, dlo)
        rhi = np.minimum(rhi, dhi)
        for k in range(3):
            if F.periodic[k]:
                continue
            if rlo[k] < F.lo[k] - 1e-12 or rhi[k] > F.hi[k] + 1e-12:
                raise CompositionError(f"field {F.name!r} does not cover its region along axis {k}")

    def f(X):
        flat = X.reshape(-1, 3)
        W = partition.weights(flat)
        out = np.zeros_like(flat)
        for i, F in enumerate(fields):
            idx = np.nonzero(W[i] > 0.0)[0]
            if idx.size:
                out[idx] += W[i, idx, None] * F.eval(flat[idx])
        return out.reshape(X.shape)

    def jac(X):
        flat = X.reshape(-1, 3)
        W = partition.weights(flat)
        G = partition.gradients(flat)
        out = np.zeros((flat.shape[0], 3, 3))
        for i, F in enumerate(fields):
            idx = np.nonzero(W[i] > 0.0)[0]
            if idx.size:
                Xi = flat[idx]
                out[idx] += W[i, idx, None, None] * F.jac(Xi)
                out[idx] += F.eval(Xi)[:, :, None] * G[i, idx, None, :]
        return out.reshape(X.shape + (3,))

    return Field3(name, domain.lo, domain.hi, f, jac, periodic=domain.periodic, inside=domain.inside,
                  params={"parts": [F.name for F in fields]})


def fd_jacobian(field3: Field3, X, step_frac=1e-5):
    """Central finite differences with step ``step_frac`` times the box diameter."""
    X = np.asarray(X, dtype=float)
    h = step_frac * field3.diameter
    J = np.zeros(X.shape + (3,))
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        J[..., :, k] = (field3.eval(X + e) - field3.eval(X - e)) / (2.0 * h)
    return J
