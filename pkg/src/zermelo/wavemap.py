"""Wavemaps: analytic time-only fronts, numeric lightlike geodesics, convexity and cuts.

For metrics that depend on time only, every constant spatial vector field is
Killing, so the orthogonality condition at departure fixes a covector that
is conserved along each trajectory. The front then integrates in closed
form. Everything else is built trajectory-wise with an RK4 integrator of the
t-parametrized geodesic equations of H = dt^2 - F^2.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad_vec

from .expressions import Expr
from .georce import SolverError, inverse_spd
from .metrics import (
    FD_STEP,
    DiscreteTrajectory,
    EllipticZermeloParams,
    FinslerMetric,
    MetricDomainError,
    rollout,
)

QUAD_TOL = 1e-10
LIGHTLIKE_TOL = 1e-4


class WavemapError(ValueError):
    pass


@dataclass(frozen=True)
class InitialRegion:
    """A point or a counter-clockwise closed curve z(s), s in [0, period).

    ``tangent`` may have any non-zero length; only its direction enters the
    orthogonality conditions.
    """

    kind: str
    position: Optional[np.ndarray] = None
    curve: Optional[Callable] = None
    tangent: Optional[Callable] = None
    period: float = 2 * np.pi

    @classmethod
    def point(cls, p):
        return cls("point", position=np.asarray(p, float))

    @classmethod
    def closed_curve(cls, curve, tangent, period=2 * np.pi):
        return cls("closed-curve", curve=curve, tangent=tangent, period=float(period))

    @classmethod
    def circle(cls, center=(0.0, 0.0), radius=1.0):
        c = np.asarray(center, float)
        r = float(radius)
        # arc-length parametrization
        return cls.closed_curve(
            lambda s: c + r * np.stack([np.cos(s / r), np.sin(s / r)], axis=-1),
            lambda s: np.stack([-np.sin(s / r), np.cos(s / r)], axis=-1),
            period=2 * np.pi * r,
        )

    def parameters(self, count):
        return np.linspace(0.0, self.period if self.kind == "closed-curve" else 2 * np.pi, count, endpoint=False)

    def base_and_tangent(self, s):
        """Starting points and unit 'tangents' for parameters s.

        For a point source s is the angle of the outward normal covector and
        the tangent is that normal rotated by +90 degrees.
        """
        s = np.asarray(s, float)
        if self.kind == "point":
            z = np.broadcast_to(self.position, s.shape + (2,)).copy()
            dz = np.stack([-np.sin(s), np.cos(s)], axis=-1)
            return z, dz
        z = np.asarray(self.curve(s), float)
        dz = np.asarray(self.tangent(s), float)
        n = np.linalg.norm(dz, axis=-1)
        if np.any(n == 0):
            raise WavemapError("closed curve is not regular (zero tangent)")
        return z, dz / n[..., None]


@dataclass
class WavefrontPolyline:
    time: float
    points: np.ndarray
    params: np.ndarray

    def __post_init__(self):
        if len(self.points) != len(self.params):
            raise WavemapError("points and parameters must have the same length")


def write_wavefronts_csv(path, fronts):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "s_or_theta", "x", "y"])
        for f in fronts:
            for s, p in zip(f.params, f.points):
                w.writerow([repr(float(f.time)), repr(float(s)), repr(float(p[0])), repr(float(p[1]))])


# ---------------------------------------------------------------------------
# analytic wavemaps


def _time_only_check(params: EllipticZermeloParams):
    if params.depends_on_position:
        raise WavemapError("analytic wavemap requires parameters depending on t only")


def _cumulative_quad(fn, t_grid, shape):
    """Integrals of fn from 0 to each t in t_grid (vector-valued, adaptive)."""
    out = []
    acc = np.zeros(shape)
    prev = 0.0
    for t in t_grid:
        if t < prev:
            raise WavemapError("t_grid must be non-decreasing and non-negative")
        if t > prev:
            val, _ = quad_vec(fn, prev, float(t), epsabs=QUAD_TOL, epsrel=0.0)
            acc = acc + val
        out.append(acc.copy())
        prev = float(t)
    return out


def wavemap_ellipse_time_only(params: EllipticZermeloParams, region: InitialRegion, s_samples, t_grid,
                              outward: bool = True):
    """Fronts of the wavemap of ``region`` under a time-only elliptic Zermelo metric.

    ``s_samples`` is either an integer count or an explicit array of curve
    parameters (normal angles for a point source).
    """
    _time_only_check(params)
    s = region.parameters(s_samples) if np.isscalar(s_samples) else np.asarray(s_samples, float)
    z0, dz = region.base_and_tangent(s)
    if region.kind == "closed-curve":
        shape = check_wavefront_convex(WavefrontPolyline(0.0, z0, s)) if len(s) >= 3 else "strictly-convex"
        if shape != "strictly-convex":
            warnings.warn(f"initial region is {shape}; the no-cut guarantee needs strict convexity")
    sign = 1.0 if outward else -1.0
    origin = np.zeros(2)

    def velocity(r):
        a, b, c1, c2, th = (float(q) for q in params.values(r, origin))
        params.validate(r, origin, where=f"t={r:g}")
        ct, st = np.cos(th), np.sin(th)
        C = a * (dz[:, 0] * st + dz[:, 1] * ct)
        D = b * (-dz[:, 0] * ct + dz[:, 1] * st)
        nrm = np.hypot(C, D)
        cphi, sphi = C / nrm, D / nrm
        w1 = c1 * ct + c2 * st
        w2 = -c1 * st + c2 * ct
        u1 = sign * (a * ct * cphi + b * st * sphi) + w1
        u2 = sign * (-a * st * cphi + b * ct * sphi) + w2
        return np.stack([u1, u2], axis=-1)

    disp = _cumulative_quad(velocity, t_grid, (len(s), 2))
    return [WavefrontPolyline(float(t), z0 + d, s.copy()) for t, d in zip(t_grid, disp)]


def _field(value):
    e = value if isinstance(value, Expr) else Expr(value)
    if e.depends_on_position:
        raise WavemapError(f"field {e.source!r} must depend on t only")
    return e


def wavemap_circle_point(R, W, x0, theta, t, checks: int = 257):
    """Point-source wavemap for circular indicatrices of radius R(t) shifted by W(t)."""
    R = _field(R)
    w1, w2 = (_field(w) for w in W)
    t = float(t)
    grid = np.linspace(0.0, t, checks)
    r = np.broadcast_to(R.value(grid, 0.0, 0.0), grid.shape)
    wind = np.hypot(np.broadcast_to(w1.value(grid, 0.0, 0.0), grid.shape),
                    np.broadcast_to(w2.value(grid, 0.0, 0.0), grid.shape))
    if np.any(r <= 0):
        raise MetricDomainError(f"radius {R.source!r} must be positive on [0, {t:g}]")
    if np.any(wind >= r):
        raise MetricDomainError(
            f"wind too strong, need |W| < R (i.e. (c1/a)^2 + (c2/b)^2 < 1): R = {R.source!r}, "
            f"W = ({w1.source!r}, {w2.source!r})")

    def integrand(q):
        return np.array([R.value(q, 0.0, 0.0), w1.value(q, 0.0, 0.0), w2.value(q, 0.0, 0.0)], dtype=float)

    (iR, i1, i2), _ = quad_vec(integrand, 0.0, t, epsabs=QUAD_TOL, epsrel=0.0) if t > 0 else (np.zeros(3), 0)
    x0 = np.asarray(x0, float)
    return x0 + np.array([np.cos(theta) * iR + i1, np.sin(theta) * iR + i2])


# ---------------------------------------------------------------------------
# numeric lightlike geodesics


@dataclass
class LightlikeRollout:
    """Raw RK4 output: times, positions, velocities and the |F - 1| monitor."""

    t: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    residual: np.ndarray

    def discrete(self, metric: FinslerMetric) -> DiscreteTrajectory:
        """The same polyline as a DiscreteTrajectory (controls = position steps)."""
        return rollout(metric, self.x[0], self.t[0], np.diff(self.x, axis=0))


def _tensor_partials(metric, t, x, v):
    """Central differences of G in t and in each position coordinate at fixed v."""
    h = FD_STEP
    n = x.shape[-1]
    zeros = np.zeros(v.shape[:-1] + (n, n))
    Gt = zeros
    if metric.time_dependent:
        Gt = (metric.fundamental_tensor(t + h, x, v) - metric.fundamental_tensor(t - h, x, v)) / (2 * h)
    Gx = [zeros] * n
    if metric.position_dependent:
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            Gx[k] = (metric.fundamental_tensor(t, x + e, v) - metric.fundamental_tensor(t, x - e, v)) / (2 * h)
    return Gt, np.stack(Gx, axis=-3)  # (..., n, n), (..., n, n, n) with axis -3 the coordinate


def lightlike_acceleration(metric: FinslerMetric, t, x, v):
    """Second derivative of a t-parametrized lightlike geodesic.

    With g^H = diag(1, -G) the formal Christoffel symbols contracted twice
    with (1, v) give
        x'' = G^-1 [ -(G_t + v.grad G) v + 1/2 grad(v^T G v) ] + 1/2 (v^T G_t v) v.
    """
    G = metric.fundamental_tensor(t, x, v)
    Gt, Gx = _tensor_partials(metric, t, x, v)
    try:
        Ginv = inverse_spd(G)
    except SolverError:
        raise WavemapError("g^H is singular or ill-conditioned along the trajectory") from None
    dG = Gt + np.einsum("...k,...kij->...ij", v, Gx)
    grad_q = np.einsum("...i,...kij,...j->...k", v, Gx, v)
    q = -np.einsum("...ij,...j->...i", dG, v) + 0.5 * grad_q
    acc = np.einsum("...ij,...j->...i", Ginv, q)
    return acc + 0.5 * np.einsum("...i,...ij,...j->...", v, Gt, v)[..., None] * v


def integrate_lightlike(metric: FinslerMetric, x0, t0, v0, t_end, steps: int,
                        tol: float = LIGHTLIKE_TOL) -> LightlikeRollout:
    """Fixed-step RK4 for a batch of lightlike geodesics (leading axes of x0/v0)."""
    x = np.array(x0, float)
    v = np.array(v0, float)
    x, v = np.broadcast_arrays(x, v)
    x, v = x.copy(), v.copy()
    F0 = metric.F(t0, x, v)
    if np.any(np.abs(F0 - 1.0) > 1e-8):
        raise WavemapError("initial velocity must satisfy F(t0, x0, v0) = 1 within 1e-8")
    h = (float(t_end) - float(t0)) / int(steps)
    ts = float(t0) + h * np.arange(steps + 1)
    xs = np.empty((steps + 1,) + x.shape)
    vs = np.empty_like(xs)
    res = np.empty((steps + 1,) + x.shape[:-1])
    xs[0], vs[0], res[0] = x, v, np.abs(F0 - 1.0)

    def f(t, y, yd):
        return yd, lightlike_acceleration(metric, t, y, yd)

    for k in range(steps):
        t = ts[k]
        k1x, k1v = f(t, x, v)
        k2x, k2v = f(t + h / 2, x + h / 2 * k1x, v + h / 2 * k1v)
        k3x, k3v = f(t + h / 2, x + h / 2 * k2x, v + h / 2 * k2v)
        k4x, k4v = f(t + h, x + h * k3x, v + h * k3v)
        x = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        r = np.abs(metric.F(ts[k + 1], x, v) - 1.0)
        if np.any(~(r < tol)):
            raise WavemapError(f"lightlike residual {np.max(r):.3e} exceeded {tol:g} at t = {ts[k + 1]:g}")
        xs[k + 1], vs[k + 1], res[k + 1] = x, v, r
    return LightlikeRollout(ts, xs, vs, res)


def geodesic_rollout_numeric(metric: FinslerMetric, x0, t0, v0, t_end, steps: int) -> DiscreteTrajectory:
    """Single lightlike geodesic from (t0, x0) with initial velocity v0, as a DiscreteTrajectory."""
    return integrate_lightlike(metric, x0, t0, v0, t_end, steps).discrete(metric)


def orthogonal_velocity(params: EllipticZermeloParams, t, x, tangent, outward: bool = True):
    """Unit-F velocity at (t, x) that is h-orthogonal to ``tangent`` after removing the wind."""
    a, b, c1, c2, th = (float(q) for q in params.values(t, np.asarray(x, float)))
    tangent = np.asarray(tangent, float)
    e1 = np.array([np.cos(th), -np.sin(th)])
    e2 = np.array([np.sin(th), np.cos(th)])
    C = a * (tangent @ e2)
    D = -b * (tangent @ e1)
    nrm = np.hypot(C, D)
    sign = 1.0 if outward else -1.0
    u = sign * (a * (C / nrm)[..., None] * e1 + b * (D / nrm)[..., None] * e2)
    return u + c1 * e1 + c2 * e2


# ---------------------------------------------------------------------------
# convexity and cut detection


def _segments_intersect(P, Q, R, S):
    """Proper intersection test for segment batches PQ and RS; returns (mask, point)."""
    d1 = Q - P
    d2 = S - R
    den = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
    w = R - P
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (w[..., 0] * d2[..., 1] - w[..., 1] * d2[..., 0]) / den
        s = (w[..., 0] * d1[..., 1] - w[..., 1] * d1[..., 0]) / den
    mask = (den != 0) & (u >= 0) & (u <= 1) & (s >= 0) & (s <= 1)
    return mask, P + np.where(mask, u, 0.0)[..., None] * d1


def polyline_self_intersections(points, closed: bool = True, chunk: int = 512):
    """Index pairs (i, j) of non-adjacent intersecting edges and the crossing points."""
    P = np.asarray(points, float)
    m = len(P)
    Q = np.roll(P, -1, axis=0) if closed else P[1:]
    P0 = P if closed else P[:-1]
    ne = len(P0)
    hits = []
    for i0 in range(0, ne, chunk):
        I = np.arange(i0, min(i0 + chunk, ne))
        J = np.arange(ne)
        mask, pts = _segments_intersect(P0[I][:, None], Q[I][:, None], P0[J][None], Q[J][None])
        gap = J[None, :] - I[:, None]
        adjacent = np.abs(gap) <= 1
        if closed:
            adjacent |= np.abs(gap) == ne - 1
        mask &= (gap > 0) & ~adjacent
        for a, b in zip(*np.nonzero(mask)):
            hits.append((int(I[a]), int(J[b]), pts[a, b]))
    return hits


def check_wavefront_convex(front: WavefrontPolyline) -> str:
    """'strictly-convex', 'convex' or 'non-convex' from signed edge cross products."""
    P = np.asarray(front.points, float)
    if len(P) < 3:
        raise WavemapError("need at least 3 points")
    e = np.roll(P, -1, axis=0) - P
    f = np.roll(e, -1, axis=0)
    cross = e[:, 0] * f[:, 1] - e[:, 1] * f[:, 0]
    tiny = 1e-10 * np.linalg.norm(e, axis=1) * np.linalg.norm(f, axis=1)
    sign = np.where(np.abs(cross) < tiny, 0, np.sign(cross))
    nz = sign[sign != 0]
    turning = np.sum(np.arctan2(cross, np.einsum("ij,ij->i", e, f)))
    if len(nz) and (np.all(nz > 0) or np.all(nz < 0)):
        if abs(abs(turning) - 2 * np.pi) > 1e-6:
            raise WavemapError("polyline self-intersects (winds more than once)")
        return "strictly-convex" if np.all(sign != 0) else "convex"
    if polyline_self_intersections(P):
        raise WavemapError("polyline self-intersects")
    return "non-convex"


def detect_cut(trajectories, times=None, closed: bool = True, tol: Optional[float] = None):
    """Earliest crossings between distinct trajectories of a wavemap family.

    ``trajectories`` has shape (m, K, 2): m trajectories ordered by their
    source parameter, all sampled on a common grid of K times. At each grid
    time the front polyline is scanned for self-intersections and for
    coincident non-neighbouring samples. Returns ``[(i, j, time, point)]`` for
    the earliest time with any hit (empty when none is found).
    """
    X = np.asarray(trajectories, float)
    if X.ndim != 3 or X.shape[-1] != 2:
        raise WavemapError("trajectories must have shape (m, K, 2)")
    m, K, _ = X.shape
    if times is None:
        times = np.arange(K, dtype=float)
    times = np.asarray(times, float)
    if len(times) != K:
        raise WavemapError("mismatched time grid")
    scale = float(np.ptp(X.reshape(-1, 2), axis=0).max()) or 1.0
    tol = 1e-6 * scale if tol is None else tol
    idx = np.arange(m)
    for k in range(1, K):
        front = X[:, k]
        hits = [(i, j, float(times[k]), p) for i, j, p in polyline_self_intersections(front, closed)]
        d = np.linalg.norm(front[:, None] - front[None], axis=-1)
        gap = np.abs(idx[:, None] - idx[None])
        if closed:
            gap = np.minimum(gap, m - gap)
        for i, j in zip(*np.nonzero((d < tol) & (gap > 1))):
            if i < j:
                hits.append((int(i), int(j), float(times[k]), 0.5 * (front[i] + front[j])))
        if hits:
            return hits
    return []
