"""Time-dependent Finsler metrics, jets, causal classification and rollouts.

All evaluators are vectorized: ``t`` has shape ``(...)`` (or is a scalar),
``x`` and ``v`` have shape ``(..., n)``, and returned quantities carry the
same leading shape.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .expressions import Expr

__all__ = [
    "MetricDomainError",
    "FinslerMetric",
    "EllipticZermeloParams",
    "EllipticZermelo",
    "Reversed",
    "Euclidean",
    "Conformal",
    "ConstantRiemannian",
    "reverse",
    "eval_elliptic_F",
    "FinslerJet",
    "eval_jet",
    "SpacetimeVector",
    "Causality",
    "classify_causal",
    "DiscreteTrajectory",
    "rollout",
    "travel_time",
    "energy",
    "FD_STEP",
]

FD_STEP = 1e-5
CIRCLE_CONDITION = "(c1/a)^2 + (c2/b)^2 < 1"


class MetricDomainError(ValueError):
    """Evaluation outside the domain of a metric (zero vector, invalid parameters)."""


def _as_arrays(t, x, v):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    t = np.asarray(t, dtype=float)
    return t, x, v


def _reject_zero(v):
    if np.any(np.all(v == 0.0, axis=-1)):
        raise MetricDomainError("Finsler metrics are not evaluated at the zero vector")


def _fd_step(v):
    return FD_STEP * np.maximum(1.0, np.linalg.norm(v, axis=-1))


class FinslerMetric:
    """Interface for time-dependent Finsler metrics F(t, x, v).

    Subclasses implement :meth:`F` and, ideally, :meth:`derivatives`. The
    fundamental tensor defaults to central differences of ``F * dF/dv``.
    """

    dim = 2
    name = "metric"
    time_dependent = True
    position_dependent = True

    @property
    def is_constant(self) -> bool:
        return not (self.time_dependent or self.position_dependent)

    def F(self, t, x, v):
        raise NotImplementedError

    def derivatives(self, t, x, v):
        """Return ``(F, dF/dt, dF/dx, dF/dv)``; central differences by default."""
        t, x, v = _as_arrays(t, x, v)
        F0 = self.F(t, x, v)
        h = FD_STEP
        Ft = (self.F(t + h, x, v) - self.F(t - h, x, v)) / (2 * h)
        n = v.shape[-1]
        Fx = np.empty(np.shape(F0) + (n,))
        Fv = np.empty(np.shape(F0) + (n,))
        hv = _fd_step(v)[..., None]
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            Fx[..., i] = (self.F(t, x + h * e, v) - self.F(t, x - h * e, v)) / (2 * h)
            Fv[..., i] = (self.F(t, x, v + hv * e) - self.F(t, x, v - hv * e)) / (2 * hv[..., 0])
        return F0, Ft, Fx, Fv

    def fundamental_tensor(self, t, x, v):
        """Hessian of F^2/2 in v, by central differences of the analytic gradient."""
        t, x, v = _as_arrays(t, x, v)
        n = v.shape[-1]
        hv = _fd_step(v)
        G = np.empty(v.shape + (n,))
        for j in range(n):
            dv = np.zeros_like(v)
            dv[..., j] = hv
            Fp, _, _, Fvp = self.derivatives(t, x, v + dv)
            Fm, _, _, Fvm = self.derivatives(t, x, v - dv)
            G[..., :, j] = (Fp[..., None] * Fvp - Fm[..., None] * Fvm) / (2 * hv[..., None])
        return 0.5 * (G + np.swapaxes(G, -1, -2))

    def jet_arrays(self, t, x, v):
        """``(F, dF/dt, dF/dx, dF/dv, G)`` in one call."""
        return (*self.derivatives(t, x, v), self.fundamental_tensor(t, x, v))

    def __repr__(self):
        return f"{type(self).__name__}({self.name})"


# ---------------------------------------------------------------------------
# elliptic Zermelo family


def _to_expr(value) -> Expr:
    return value if isinstance(value, Expr) else Expr(value)


@dataclass(frozen=True)
class EllipticZermeloParams:
    """Semi-axes a, b, wind components c1, c2 (in the ellipse frame) and rotation theta.

    Each field is an :class:`Expr` over (t, x, y); strings and numbers are
    converted on construction.
    """

    a: Expr
    b: Expr
    c1: Expr
    c2: Expr
    theta: Expr = field(default_factory=lambda: Expr("0"))

    def __post_init__(self):
        for name in ("a", "b", "c1", "c2", "theta"):
            object.__setattr__(self, name, _to_expr(getattr(self, name)))

    @property
    def fields(self):
        return (self.a, self.b, self.c1, self.c2, self.theta)

    @property
    def depends_on_time(self) -> bool:
        return any(f.depends_on_time for f in self.fields)

    @property
    def depends_on_position(self) -> bool:
        return any(f.depends_on_position for f in self.fields)

    def as_dict(self) -> dict:
        return {k: getattr(self, k).source for k in ("a", "b", "c1", "c2", "theta")}

    def values(self, t, x):
        x = np.asarray(x, dtype=float)
        X, Y = x[..., 0], x[..., 1]
        return tuple(f.value(t, X, Y) for f in self.fields)

    def values_and_grads(self, t, x):
        x = np.asarray(x, dtype=float)
        return tuple(f.value_and_grad(t, x[..., 0], x[..., 1]) for f in self.fields)

    def wind(self, t, x):
        """Euclidean wind components (w1, w2)."""
        _, _, c1, c2, th = self.values(t, x)
        return c1 * np.cos(th) + c2 * np.sin(th), -c1 * np.sin(th) + c2 * np.cos(th)

    def validate(self, t, x, where=None):
        a, b, c1, c2, _ = self.values(t, x)
        _validate(a, b, c1, c2, self, where)


def _validate(a, b, c1, c2, params, where=None):
    a, b, c1, c2 = (np.asarray(f, dtype=float) for f in (a, b, c1, c2))
    lam = 1.0 - (c1 / a) ** 2 - (c2 / b) ** 2
    if np.min(a) > 0 and np.min(b) > 0 and np.min(lam) > 0:
        return
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise MetricDomainError(f"non-finite semi-axis in {params.as_dict()}")
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise MetricDomainError(
            f"semi-axes must be positive: a = {params.a.source!r}, b = {params.b.source!r}"
            + (f" at {where}" if where else "")
        )
    if np.any(~(lam > 0)):
        raise MetricDomainError(
            f"wind too strong, need {CIRCLE_CONDITION}: c1 = {params.c1.source!r}, "
            f"c2 = {params.c2.source!r}, a = {params.a.source!r}, b = {params.b.source!r}"
            + (f" at {where}" if where else "")
        )


class EllipticZermelo(FinslerMetric):
    """Zermelo metric of a shifted, rotated ellipse indicatrix.

    The indicatrix at (t, x) is the ellipse with semi-axes a, b rotated
    clockwise by theta and displaced by the wind W = c1 e1 + c2 e2, where
    e1 = (cos th, -sin th) and e2 = (sin th, cos th).
    """

    dim = 2

    def __init__(self, params: EllipticZermeloParams, name: str = "elliptic"):
        self.params = params
        self.name = name
        self.time_dependent = params.depends_on_time
        self.position_dependent = params.depends_on_position

    def _frame(self, th, v):
        cs, sn = np.cos(th), np.sin(th)
        p1 = v[..., 0] * cs - v[..., 1] * sn
        p2 = v[..., 0] * sn + v[..., 1] * cs
        return cs, sn, p1, p2

    @staticmethod
    def _value(a, b, c1, c2, p1, p2):
        ia2, ib2 = 1.0 / (a * a), 1.0 / (b * b)
        lam = 1.0 - c1 * c1 * ia2 - c2 * c2 * ib2
        hvv = p1 * p1 * ia2 + p2 * p2 * ib2
        om = -(p1 * c1 * ia2 + p2 * c2 * ib2)
        S = np.sqrt(lam * hvv + om * om)
        # pick the cancellation-free branch of (om + S)/lam = hvv/(S - om)
        with np.errstate(divide="ignore", invalid="ignore"):
            F = np.where(om >= 0, (om + S) / lam, hvv / (S - om))
        return F, lam, ia2, ib2, S

    def F(self, t, x, v):
        t, x, v = _as_arrays(t, x, v)
        _reject_zero(v)
        a, b, c1, c2, th = self.params.values(t, x)
        _validate(a, b, c1, c2, self.params)
        _, _, p1, p2 = self._frame(th, v)
        return self._value(a, b, c1, c2, p1, p2)[0]

    def derivatives(self, t, x, v):
        return self._evaluate(t, x, v, tensor=False)[:4]

    def fundamental_tensor(self, t, x, v):
        return self._evaluate(t, x, v, tensor=True, grads=False)[4]

    def jet_arrays(self, t, x, v):
        return self._evaluate(t, x, v, tensor=True)

    def _evaluate(self, t, x, v, tensor=True, grads=True):
        t, x, v = _as_arrays(t, x, v)
        _reject_zero(v)
        if grads:
            (a, at, ax, ay), (b, bt, bx, by), (c1, c1t, c1x, c1y), (c2, c2t, c2x, c2y), (th, tht, thx, thy) = (
                self.params.values_and_grads(t, x)
            )
        else:
            a, b, c1, c2, th = self.params.values(t, x)
        _validate(a, b, c1, c2, self.params)
        cs, sn, p1, p2 = self._frame(th, v)
        F, lam, ia2, ib2, _ = self._value(a, b, c1, c2, p1, p2)
        Ft = Fx = Fv = G = None
        if grads:
            # implicit differentiation of (p1/F - c1)^2/a^2 + (p2/F - c2)^2/b^2 = 1
            z1 = p1 / F - c1
            z2 = p2 / F - c2
            D = z1 * p1 * ia2 + z2 * p2 * ib2
            k = F * F / (2.0 * D)
            dF_da = -2.0 * z1 * z1 * ia2 / a * k
            dF_db = -2.0 * z2 * z2 * ib2 / b * k
            dF_dc1 = -2.0 * z1 * ia2 * k
            dF_dc2 = -2.0 * z2 * ib2 * k
            dF_dth = (2.0 / F) * (-z1 * p2 * ia2 + z2 * p1 * ib2) * k

            def chain(da, db, dc1, dc2, dth):
                return dF_da * da + dF_db * db + dF_dc1 * dc1 + dF_dc2 * dc2 + dF_dth * dth

            shape = F.shape
            Ft = np.broadcast_to(chain(at, bt, c1t, c2t, tht), shape)
            Fx = np.stack(np.broadcast_arrays(chain(ax, bx, c1x, c2x, thx), chain(ay, by, c1y, c2y, thy), F)[:2],
                          axis=-1)
            g1 = z1 * ia2 / D * F
            g2 = z2 * ib2 / D * F
            Fv = np.stack([g1 * cs + g2 * sn, -g1 * sn + g2 * cs], axis=-1)
        if tensor:
            # Randers form F = sqrt(v.Av) + beta.v gives G in closed form
            e1 = np.stack(np.broadcast_arrays(cs, -sn), axis=-1)
            e2 = np.stack(np.broadcast_arrays(sn, cs), axis=-1)
            ia2_, ib2_, lam_ = (np.asarray(q)[..., None] for q in (ia2, ib2, lam))
            H = ia2_[..., None] * _outer(e1, e1) + ib2_[..., None] * _outer(e2, e2)
            bv = -(np.asarray(c1)[..., None] * ia2_) * e1 - (np.asarray(c2)[..., None] * ib2_) * e2
            Amat = (lam_[..., None] * H + _outer(bv, bv)) / (lam_ * lam_)[..., None]
            Av = np.einsum("...ij,...j->...i", Amat, v)
            alpha = np.sqrt(np.einsum("...i,...i->...", Av, v))
            dalpha = Av / alpha[..., None]
            Fr = dalpha + bv / lam_
            G = _outer(Fr, Fr) + (F / alpha)[..., None, None] * (Amat - _outer(dalpha, dalpha))
        return F, Ft, Fx, Fv, G


def _outer(p, q):
    return p[..., :, None] * q[..., None, :]


def eval_elliptic_F(params: EllipticZermeloParams, t, x, v):
    """Expanded closed form of the shifted-ellipse Zermelo metric."""
    t, x, v = _as_arrays(t, x, v)
    _reject_zero(v)
    a, b, c1, c2, th = params.values(t, x)
    _validate(a, b, c1, c2, params)
    u, w = v[..., 0], v[..., 1]
    P = u * np.sin(th) + w * np.cos(th)
    Q = u * np.cos(th) - w * np.sin(th)
    a2, b2 = a * a, b * b
    den = a2 * b2 - a2 * c2 * c2 - b2 * c1 * c1
    rad = (
        a2 * a2 * b2 * P * P
        + a2 * b2 * b2 * Q * Q
        - a2 * b2 * c1 * c1 * P * P
        + 2 * a2 * b2 * c1 * c2 * Q * P
        - a2 * b2 * c2 * c2 * Q * Q
    )
    return (-a2 * c2 * P - b2 * c1 * Q + np.sqrt(rad)) / den


# ---------------------------------------------------------------------------
# other families


class Reversed(FinslerMetric):
    """The reverse metric F^-(t, x, v) = F(t, x, -v)."""

    def __init__(self, inner: FinslerMetric):
        self.inner = inner
        self.dim = inner.dim
        self.name = f"reversed({inner.name})"
        self.time_dependent = inner.time_dependent
        self.position_dependent = inner.position_dependent

    def F(self, t, x, v):
        return self.inner.F(t, x, -np.asarray(v, dtype=float))

    def derivatives(self, t, x, v):
        F, Ft, Fx, Fv = self.inner.derivatives(t, x, -np.asarray(v, dtype=float))
        return F, Ft, Fx, -Fv

    def fundamental_tensor(self, t, x, v):
        return self.inner.fundamental_tensor(t, x, -np.asarray(v, dtype=float))


def reverse(metric: FinslerMetric) -> FinslerMetric:
    return Reversed(metric)


class Euclidean(FinslerMetric):
    time_dependent = False
    position_dependent = False

    def __init__(self, dim=2, scale=1.0):
        self.dim = dim
        self.scale = float(scale)
        self.name = "euclidean" if scale == 1.0 else f"euclidean*{scale:g}"

    def F(self, t, x, v):
        v = np.asarray(v, dtype=float)
        _reject_zero(v)
        return self.scale * np.linalg.norm(v, axis=-1)

    def derivatives(self, t, x, v):
        v = np.asarray(v, dtype=float)
        F = self.F(t, x, v)
        shape = F.shape
        return F, np.zeros(shape), np.zeros(shape + (self.dim,)), self.scale * v / np.linalg.norm(v, axis=-1)[..., None]

    def fundamental_tensor(self, t, x, v):
        v = np.asarray(v, dtype=float)
        _reject_zero(v)
        return self.scale**2 * np.broadcast_to(np.eye(self.dim), v.shape + (self.dim,)).copy()


class Conformal(FinslerMetric):
    """F = phi(t, x, y) |v| for a scalar field phi > 0 (planar)."""

    dim = 2

    def __init__(self, phi, name=None):
        self.phi = _to_expr(phi)
        self.name = name or f"conformal({self.phi.source})"
        self.time_dependent = self.phi.depends_on_time
        self.position_dependent = self.phi.depends_on_position

    def _phi(self, t, x):
        x = np.asarray(x, dtype=float)
        p, pt, px, py = self.phi.value_and_grad(t, x[..., 0], x[..., 1])
        if np.any(p <= 0):
            raise MetricDomainError(f"conformal factor {self.phi.source!r} must be positive")
        return p, pt, px, py

    def F(self, t, x, v):
        t, x, v = _as_arrays(t, x, v)
        _reject_zero(v)
        x = np.broadcast_to(x, v.shape)
        return self._phi(t, x)[0] * np.linalg.norm(v, axis=-1)

    def derivatives(self, t, x, v):
        t, x, v = _as_arrays(t, x, v)
        _reject_zero(v)
        x = np.broadcast_to(x, v.shape)
        p, pt, px, py = self._phi(t, x)
        r = np.linalg.norm(v, axis=-1)
        return p * r, pt * r, np.stack([px * r, py * r], axis=-1), p[..., None] * v / r[..., None]

    def fundamental_tensor(self, t, x, v):
        t, x, v = _as_arrays(t, x, v)
        _reject_zero(v)
        x = np.broadcast_to(x, v.shape)
        p = self._phi(t, x)[0]
        return (p * p)[..., None, None] * np.eye(2)


class ConstantRiemannian(FinslerMetric):
    """F = sqrt(v^T M v) for a fixed SPD matrix M (any dimension)."""

    time_dependent = False
    position_dependent = False

    def __init__(self, M, name="riemannian"):
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.allclose(M, M.T):
            raise ValueError("M must be a symmetric square matrix")
        if np.linalg.eigvalsh(M).min() <= 0:
            raise ValueError("M must be positive definite")
        self.M = M
        self.dim = M.shape[0]
        self.name = name

    def F(self, t, x, v):
        v = np.asarray(v, dtype=float)
        _reject_zero(v)
        return np.sqrt(np.einsum("...i,ij,...j->...", v, self.M, v))

    def derivatives(self, t, x, v):
        v = np.asarray(v, dtype=float)
        F = self.F(t, x, v)
        return F, np.zeros(F.shape), np.zeros(F.shape + (self.dim,)), (v @ self.M) / F[..., None]

    def fundamental_tensor(self, t, x, v):
        v = np.asarray(v, dtype=float)
        _reject_zero(v)
        return np.broadcast_to(self.M, v.shape + (self.dim,)).copy()


# ---------------------------------------------------------------------------
# jets


@dataclass
class FinslerJet:
    """Point (or batched) evaluation of F and the derived quantities.

    ``xi`` is the scalar v.(dG/dt).v = 2 F dF/dt and ``nu`` the x-gradient of
    v.G.v = 2 F dF/dx, both by the identity G(v)v.v = F^2. ``zeta`` vanishes
    identically because the Cartan tensor annihilates v.
    """

    F0: np.ndarray
    dF_dt: np.ndarray
    dF_dx: np.ndarray
    dF_dv: np.ndarray
    G: np.ndarray
    nu: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray
    xi_form: Optional[np.ndarray] = None


def eval_jet(metric: FinslerMetric, t, x, v, full: bool = True) -> FinslerJet:
    """Evaluate a jet. ``full=False`` skips the matrix dG/dt (not needed by the solver)."""
    t, x, v = _as_arrays(t, x, v)
    F, Ft, Fx, Fv, G = metric.jet_arrays(t, x, v)
    xi_form = None
    if full:
        if metric.time_dependent:
            h = FD_STEP
            xi_form = (metric.fundamental_tensor(t + h, x, v) - metric.fundamental_tensor(t - h, x, v)) / (2 * h)
        else:
            xi_form = np.zeros_like(G)
    jet = FinslerJet(
        F0=np.asarray(F),
        dF_dt=np.asarray(Ft),
        dF_dx=np.asarray(Fx),
        dF_dv=np.asarray(Fv),
        G=G,
        nu=2.0 * np.asarray(F)[..., None] * Fx,
        zeta=np.zeros_like(np.asarray(Fv)),
        xi=2.0 * np.asarray(F) * Ft,
        xi_form=xi_form,
    )
    for name in ("F0", "dF_dt", "dF_dx", "dF_dv", "G"):
        if not np.all(np.isfinite(getattr(jet, name))):
            raise MetricDomainError(f"non-finite {name} in jet of {metric.name}")
    return jet


# ---------------------------------------------------------------------------
# causality


@dataclass(frozen=True)
class SpacetimeVector:
    v0: float
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))


class Causality(str, enum.Enum):
    TIMELIKE_FUTURE = "timelike-future"
    TIMELIKE_PAST = "timelike-past"
    LIGHTLIKE_FUTURE = "lightlike-future"
    LIGHTLIKE_PAST = "lightlike-past"
    SPACELIKE = "spacelike"


def classify_causal(metric: FinslerMetric, t, x, vhat: SpacetimeVector, rtol=1e-12) -> Causality:
    """Sign of H = (v0)^2 - F^2 and of v0; past vectors use F(-v)."""
    v0 = float(vhat.v0)
    v = vhat.v
    spatial_zero = bool(np.all(v == 0))
    if spatial_zero and v0 == 0:
        raise MetricDomainError("cannot classify the zero spacetime vector")
    if spatial_zero:
        return Causality.TIMELIKE_FUTURE if v0 > 0 else Causality.TIMELIKE_PAST
    if v0 == 0:
        return Causality.SPACELIKE
    Fv = float(metric.F(t, x, v if v0 > 0 else -v))
    H = v0 * v0 - Fv * Fv
    if abs(H) <= rtol * max(v0 * v0, Fv * Fv):
        return Causality.LIGHTLIKE_FUTURE if v0 > 0 else Causality.LIGHTLIKE_PAST
    if H > 0:
        return Causality.TIMELIKE_FUTURE if v0 > 0 else Causality.TIMELIKE_PAST
    return Causality.SPACELIKE


# ---------------------------------------------------------------------------
# discrete trajectories


@dataclass(frozen=True)
class DiscreteTrajectory:
    """Times t (T+1), positions x (T+1, n) and controls v (T, n)."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray

    @property
    def T(self) -> int:
        return len(self.v)

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.t)

    def check(self, metric: FinslerMetric, rtol: float = 1e-12) -> float:
        """Return the worst invariant violation (relative); raise if above ``rtol``."""
        if not (self.t.shape[0] == self.x.shape[0] == self.v.shape[0] + 1):
            raise ValueError("inconsistent trajectory array lengths")
        scale = max(1.0, float(np.abs(self.x).max()))
        ex = np.abs(self.x[1:] - self.x[:-1] - self.v).max() / scale
        F = metric.F(self.t[:-1], self.x[:-1], self.v)
        et = np.abs(np.diff(self.t) - F).max() / max(1.0, float(np.abs(self.t).max()))
        err = max(ex, et)
        if err > rtol or not np.all(np.diff(self.t) > 0):
            raise ValueError(f"trajectory invariants violated (error {err:.3e})")
        return err


def _positions(A, v):
    x = np.empty((len(v) + 1, v.shape[1]))
    x[0] = A
    np.cumsum(v, axis=0, out=x[1:])
    x[1:] += A
    return x


def rollout(metric: FinslerMetric, A, t0, v, max_sweeps: int = 200) -> DiscreteTrajectory:
    """Integrate the forward state equations x+ = x + v, t+ = t + F(t, x, v)."""
    A = np.asarray(A, dtype=float)
    v = np.asarray(v, dtype=float)
    if v.ndim != 2 or v.shape[1] != A.shape[0]:
        raise ValueError("controls must be an array of shape (T, n)")
    if np.any(np.all(v == 0.0, axis=-1)):
        raise MetricDomainError("zero control vector in rollout")
    x = _positions(A, v)
    t = np.empty(len(v) + 1)
    t[0] = t0
    if not metric.time_dependent:
        np.cumsum(metric.F(0.0, x[:-1], v), out=t[1:])
        t[1:] += t0
    else:
        t = _time_rollout(metric, x, v, float(t0), max_sweeps)
    if not np.all(np.isfinite(t)):
        raise MetricDomainError("non-finite time in rollout")
    return DiscreteTrajectory(t=t, x=x, v=v)


def _time_rollout(metric, x, v, t0, max_sweeps):
    # Newton sweeps on the recursion t[s+1] = t[s] + F(t[s], ...): the
    # linearized recursion d[s+1] = (1 + F_t[s]) d[s] + r[s] is solved in
    # closed form with cumulative products, so each sweep is vectorized.
    T = len(v)
    xs = x[:-1]
    t = t0 + np.concatenate([[0.0], np.cumsum(metric.F(t0, xs, v))])
    tol = 4 * np.finfo(float).eps
    for _ in range(max_sweeps):
        F, Ft, _, _ = metric.derivatives(t[:-1], xs, v)
        r = t[:-1] + F - t[1:]
        a = 1.0 + Ft
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            P = np.cumprod(a)
            d = P * np.cumsum(r / P)
        if not np.all(np.isfinite(d)):
            break
        t[1:] += d
        if np.max(np.abs(d)) <= tol * max(1.0, float(np.abs(t).max())):
            break
    # one exact forward pass anchors the invariants to the final values
    new = np.empty_like(t)
    new[0] = t0
    for _ in range(max_sweeps):
        np.cumsum(metric.F(t[:-1], xs, v), out=new[1:])
        new[1:] += t0
        if np.max(np.abs(new - t)) <= tol * max(1.0, float(np.abs(new).max())):
            return new
        t = new.copy()
    for s in range(T):
        t[s + 1] = t[s] + float(metric.F(t[s], x[s], v[s]))
    return t


def travel_time(traj: DiscreteTrajectory) -> float:
    return float(traj.t[-1] - traj.t[0])


def energy(metric: Optional[FinslerMetric], traj: DiscreteTrajectory) -> float:
    """Discrete energy sum (t[s+1] - t[s])^2."""
    return float(np.sum(np.diff(traj.t) ** 2))
