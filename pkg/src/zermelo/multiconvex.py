"""Planar multi-convex norms, their convex hulls and constant-case tacking.

A :class:`MultiConvexIndicatrix` is the outer boundary of a collection of
strictly convex ovals (optionally restricted to polar-angle windows). Its
norm is ``|v| / r(angle(v))`` with ``r`` the radial profile. The time to go
from A to B with velocities on the indicatrix is governed by the convex
hull: straight when the ray A->B exits through a single contact or a cusp,
otherwise a piecewise segment using the contact velocities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.spatial import ConvexHull

from .metrics import FinslerMetric

TWO_PI = 2.0 * np.pi
CUSP_JUMP = 1e-3


class GeometryError(ValueError):
    pass


def _wrap(phi):
    return np.mod(phi, TWO_PI)


def _in_window(phi, window):
    if window is None:
        return np.ones(np.shape(phi), dtype=bool)
    lo, hi = window
    span = _wrap(hi - lo)
    if span == 0 and hi != lo:
        span = TWO_PI
    return _wrap(np.asarray(phi) - lo) <= span + 1e-12


def _cross(p, q):
    return p[..., 0] * q[..., 1] - p[..., 1] * q[..., 0]


def _rot(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


class ConvexIndicatrix:
    """A strictly convex oval enclosing the origin, possibly restricted to a polar window.

    Build with :meth:`ellipse`, :meth:`circle`, :meth:`polyline` or
    :meth:`from_metric`. ``window = (phi0, phi1)`` keeps only the boundary
    points whose polar angle lies in the counter-clockwise arc phi0 -> phi1.
    """

    def __init__(self, kind, data, window=None):
        self.kind = kind
        self.window = None if window is None else (float(window[0]), float(window[1]))
        if kind == "ellipse":
            self.center = np.asarray(data["center"], float)
            self.a = float(data["a"])
            self.b = float(data["b"])
            self.angle = float(data["angle"])
            if self.a <= 0 or self.b <= 0:
                raise GeometryError("degenerate ellipse piece")
            R = _rot(self.angle)
            self._Minv = R @ np.diag([1 / self.a**2, 1 / self.b**2]) @ R.T
            self._M = R @ np.diag([self.a**2, self.b**2]) @ R.T
            if self.center @ self._Minv @ self.center >= 1:
                raise GeometryError("indicatrix piece must enclose the origin")
        elif kind == "polyline":
            pts = np.asarray(data["points"], float)
            if len(pts) < 3:
                raise GeometryError("polyline piece needs at least 3 points")
            ang = _wrap(np.arctan2(pts[:, 1], pts[:, 0]))
            order = np.argsort(ang)
            self.points = pts[order]
            self._angles = ang[order]
            cross = _cross(np.roll(self.points, -1, 0) - self.points,
                             np.roll(self.points, -2, 0) - np.roll(self.points, -1, 0))
            scale = np.abs(self.points).max() ** 2
            if np.any(cross < 1e-8 * scale / len(pts) ** 2):
                raise GeometryError("polyline piece is not strictly convex around the origin")
        else:
            raise GeometryError(f"unknown piece kind {kind!r}")

    @classmethod
    def ellipse(cls, center, a, b, angle=0.0, window=None):
        """Ellipse with semi-axes a, b rotated counter-clockwise by ``angle``."""
        return cls("ellipse", {"center": center, "a": a, "b": b, "angle": angle}, window)

    @classmethod
    def circle(cls, center, r, window=None):
        return cls.ellipse(center, r, r, 0.0, window)

    @classmethod
    def polyline(cls, points, window=None):
        return cls("polyline", {"points": points}, window)

    @classmethod
    def from_metric(cls, metric: FinslerMetric, t=0.0, x=(0.0, 0.0), samples=4096, window=None):
        """Unit ball boundary of a metric at (t, x); elliptic metrics map exactly."""
        params = getattr(metric, "params", None)
        if params is not None and not getattr(metric, "inner", None):
            a, b, c1, c2, th = (float(q) for q in params.values(t, np.asarray(x, float)))
            w1, w2 = params.wind(t, np.asarray(x, float))
            return cls.ellipse((float(w1), float(w2)), a, b, -th, window)
        psi = np.linspace(0, TWO_PI, samples, endpoint=False)
        e = np.stack([np.cos(psi), np.sin(psi)], axis=-1)
        F = metric.F(t, np.broadcast_to(np.asarray(x, float), e.shape), e)
        return cls.polyline(e / F[:, None], window)

    # -- geometry of the full oval -------------------------------------------------

    def _full_radius(self, phi):
        d = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        if self.kind == "ellipse":
            # |r d - c|_M = 1 with M = Minv
            Md = d @ self._Minv
            A = np.einsum("...i,...i->...", Md, d)
            Bq = -2.0 * (Md @ self.center)
            C = self.center @ self._Minv @ self.center - 1.0
            return (-Bq + np.sqrt(Bq * Bq - 4 * A * C)) / (2 * A)
        phi = _wrap(np.asarray(phi, float))
        n = len(self.points)
        k = np.searchsorted(self._angles, phi, side="right") - 1
        p = self.points[k % n]
        q = self.points[(k + 1) % n]
        e = q - p
        # solve r d = p + s e
        den = d[..., 0] * e[..., 1] - d[..., 1] * e[..., 0]
        return (p[..., 0] * e[..., 1] - p[..., 1] * e[..., 0]) / den

    def radius(self, phi):
        """Ray-intersection radius; NaN outside the window."""
        phi = np.asarray(phi, float)
        r = self._full_radius(phi)
        return np.where(_in_window(phi, self.window), r, np.nan)

    def _full_support(self, n):
        if self.kind == "ellipse":
            Mn = n @ self._M
            s = np.sqrt(np.einsum("...i,...i->...", Mn, n))
            return n @ self.center + s, self.center + Mn / s[..., None]
        vals = n @ self.points.T
        k = np.argmax(vals, axis=-1)
        return np.take_along_axis(vals, k[..., None], -1)[..., 0], self.points[k]

    def window_endpoints(self):
        if self.window is None:
            return np.zeros((0, 2))
        phis = np.array(self.window)
        r = self._full_radius(phis)
        return r[:, None] * np.stack([np.cos(phis), np.sin(phis)], axis=-1)

    def support(self, n):
        """Support value and point of the patch in unit directions ``n`` (..., 2)."""
        n = np.asarray(n, float)
        h, p = self._full_support(n)
        if self.window is None:
            return h, p
        inside = _in_window(np.arctan2(p[..., 1], p[..., 0]), self.window)
        ends = self.window_endpoints()
        ev = n @ ends.T
        k = np.argmax(ev, axis=-1)
        he = np.take_along_axis(ev, k[..., None], -1)[..., 0]
        pe = ends[k]
        return np.where(inside, h, he), np.where(inside[..., None], p, pe)

    def sample(self, count=4096):
        """Boundary points of the patch, ordered by polar angle."""
        if self.window is None:
            phi = np.linspace(0, TWO_PI, count, endpoint=False)
        else:
            lo, hi = self.window
            span = _wrap(hi - lo) or TWO_PI
            phi = lo + np.linspace(0, span, count)
        r = self._full_radius(phi)
        return r[:, None] * np.stack([np.cos(phi), np.sin(phi)], axis=-1)

    def __repr__(self):
        if self.kind == "ellipse":
            return f"ConvexIndicatrix.ellipse(center={self.center.tolist()}, a={self.a}, b={self.b}, angle={self.angle})"
        return f"ConvexIndicatrix.polyline({len(self.points)} points)"


@dataclass
class HullBoundary:
    angles: np.ndarray
    h: np.ndarray
    contacts: list
    cusps: np.ndarray

    def normals(self):
        return np.stack([np.cos(self.angles), np.sin(self.angles)], axis=-1)


class MultiConvexIndicatrix:
    """Outer boundary of several convex patches (radial profile = max over pieces)."""

    def __init__(self, pieces, check_samples=2048):
        self.pieces = list(pieces)
        if not self.pieces:
            raise GeometryError("need at least one piece")
        phi = np.linspace(0, TWO_PI, check_samples, endpoint=False)
        r = self.radius(phi)
        if not np.all(np.isfinite(r)) or np.any(r <= 0):
            raise GeometryError("pieces do not cover every direction from the origin")
        self._hull_cache = {}

    def _radii(self, phi):
        return np.stack([p.radius(phi) for p in self.pieces], axis=0)

    def radius(self, phi):
        r = self._radii(np.asarray(phi, float))
        # uncovered directions stay NaN and are rejected by the constructor
        best = np.max(np.where(np.isnan(r), -np.inf, r), axis=0)
        return np.where(np.isinf(best), np.nan, best)

    def norm(self, v):
        v = np.asarray(v, float)
        r = np.linalg.norm(v, axis=-1)
        if np.any(r == 0):
            raise GeometryError("norm is not evaluated at the zero vector")
        return r / self.radius(np.arctan2(v[..., 1], v[..., 0]))

    def support(self, n):
        """Exact support of the union in directions n: (h, per-piece h, per-piece points)."""
        hs, ps = zip(*(p.support(n) for p in self.pieces))
        hs = np.stack(hs, axis=0)
        return hs.max(axis=0), hs, np.stack(ps, axis=0)

    def boundary_samples(self, count=16384):
        """The union boundary sampled uniformly in polar angle."""
        phi = np.linspace(0, TWO_PI, count, endpoint=False)
        r = self.radius(phi)
        return r[:, None] * np.stack([np.cos(phi), np.sin(phi)], axis=-1)

    def hull_norm(self, v, M=4096):
        """Gauge of the convex hull: max over normals of <v, n> / h(n).

        A coarse scan over M normals with exact piece supports is refined by
        golden-section search between the neighbours of the best normal.
        """
        v = np.asarray(v, float)
        flat = v.reshape(-1, 2)
        angles = np.linspace(0, TWO_PI, M, endpoint=False)
        normals = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        h = self.support(normals)[0]
        k = np.argmax((flat @ normals.T) / h, axis=-1)
        step = TWO_PI / M

        def ratio(psi):
            n = np.stack([np.cos(psi), np.sin(psi)], axis=-1)
            return np.einsum("ij,ij->i", flat, n) / self.support(n)[0]

        lo, hi = angles[k] - step, angles[k] + step
        g = 0.5 * (np.sqrt(5.0) - 1.0)
        c, d = hi - g * (hi - lo), lo + g * (hi - lo)
        fc, fd = ratio(c), ratio(d)
        for _ in range(40):
            left = fc > fd  # the maximum lies in [lo, d]
            hi = np.where(left, d, hi)
            lo = np.where(left, lo, c)
            old_c, old_d, old_fc, old_fd = c, d, fc, fd
            probe = np.where(left, hi - g * (hi - lo), lo + g * (hi - lo))
            fp = ratio(probe)
            c = np.where(left, probe, old_d)
            fc = np.where(left, fp, old_fd)
            d = np.where(left, old_c, probe)
            fd = np.where(left, old_fc, fp)
        best = np.maximum(np.maximum(fc, fd), ratio(angles[k]))
        return best.reshape(v.shape[:-1])

    def hull(self, M=4096, samples_per_piece=4096):
        key = (M, samples_per_piece)
        if key not in self._hull_cache:
            self._hull_cache[key] = hull_boundary(self, M, samples_per_piece)
        return self._hull_cache[key]


def norm_eval(sigma: MultiConvexIndicatrix, v):
    return sigma.norm(v)


def _switch_point(sigma, phi_a, phi_b):
    """Polar angle in [phi_a, phi_b] where the outermost piece changes."""
    def owner(phi):
        return int(np.nanargmax(sigma._radii(np.array([phi]))[:, 0]))

    ia, ib = owner(phi_a), owner(phi_b)
    if ia == ib:
        return None
    lo, hi = phi_a, phi_b
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if owner(mid) == ia:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def hull_boundary(sigma: MultiConvexIndicatrix, M: int = 4096, samples_per_piece: int = 4096) -> HullBoundary:
    """Support function of the convex hull on M angles, contact sets and cusps."""
    if M < 256:
        raise GeometryError("M must be at least 256")
    if samples_per_piece < 4096:
        raise GeometryError("at least 4096 samples per piece are required")
    K = samples_per_piece * len(sigma.pieces)
    P = sigma.boundary_samples(K)
    angles = np.linspace(0, TWO_PI, M, endpoint=False)
    normals = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    h = np.empty(M)
    for s in range(0, M, 256):
        h[s:s + 256] = (normals[s:s + 256] @ P.T).max(axis=1)
    hex_, hs, ps = sigma.support(normals)
    scale = float(np.abs(P).max())
    contacts = [ps[hs[:, j] >= hex_[j] - 1e-9 * scale, j] for j in range(M)]

    # cusps: hull vertices of the dense boundary with a turning angle above the threshold
    hull = ConvexHull(P)
    V = P[hull.vertices]  # counter-clockwise in 2-D
    e_in = V - np.roll(V, 1, axis=0)
    e_out = np.roll(V, -1, axis=0) - V
    turn = np.abs(np.arctan2(_cross(e_in, e_out), np.einsum("ij,ij->i", e_in, e_out)))
    step = TWO_PI / K
    flagged = np.nonzero(turn > CUSP_JUMP + 2 * step)[0]
    cusps = []
    for i in flagged:
        phi = np.arctan2(V[i, 1], V[i, 0])
        # refine to where the outermost piece (or a window) switches
        sw = _switch_point(sigma, phi - 2 * step, phi + 2 * step)
        if sw is None:
            continue
        r = sigma.radius(np.array([sw]))[0]
        pt = r * np.array([np.cos(sw), np.sin(sw)])
        if not any(np.linalg.norm(pt - c) < 1e-8 * scale for c in cusps):
            cusps.append(pt)
    return HullBoundary(angles=angles, h=h, contacts=contacts, cusps=np.array(cusps).reshape(-1, 2))


@dataclass
class PiecewiseSegment:
    points: np.ndarray
    velocities: np.ndarray
    durations: np.ndarray

    @property
    def n_tacks(self) -> int:
        return len(self.durations) - 1

    @property
    def time(self) -> float:
        return float(np.sum(self.durations))

    def rows(self):
        """CSV rows (segment, x, y, vx, vy, dt)."""
        return [
            (i, *self.points[i].tolist(), *self.velocities[i].tolist(), float(self.durations[i]))
            for i in range(len(self.durations))
        ]


def _hull_direction(sigma, d):
    """Normal angle maximizing <d, n>/h(n), i.e. the supporting line where the ray d exits the hull."""
    phi_d = np.arctan2(d[1], d[0])

    def g(psi):
        n = np.array([np.cos(psi), np.sin(psi)])
        return -(d @ n) / sigma.support(n[None, :])[0][0]

    psis = phi_d + np.linspace(-0.5 * np.pi, 0.5 * np.pi, 4097)[1:-1]
    n = np.stack([np.cos(psis), np.sin(psis)], axis=-1)
    vals = -(n @ d) / sigma.support(n)[0]
    k = int(np.argmin(vals))
    lo, hi = psis[max(k - 1, 0)], psis[min(k + 1, len(psis) - 1)]
    res = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
    best = res.x if res.fun <= vals[k] else psis[k]
    return float(best), -float(min(res.fun, vals[k]))


def optimal_velocities(sigma: MultiConvexIndicatrix, A, B, tol=1e-6):
    """Exit point Q of the ray A->B through the hull and the contact velocities.

    Returns ``(case, Q, Qset, normal)`` where case is "cusp" or "contacts".
    """
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    D = B - A
    L = np.linalg.norm(D)
    if L == 0:
        raise GeometryError("A and B must differ")
    d = D / L
    psi, gauge = _hull_direction(sigma, d)
    n = np.array([np.cos(psi), np.sin(psi)])
    Q = d / gauge
    hmax, hs, ps = sigma.support(n[None, :])
    hmax, hs, ps = hmax[0], hs[:, 0], ps[:, 0]
    scale = max(1.0, float(np.abs(ps).max()))
    active = np.nonzero(hs >= hmax - tol * hmax)[0]
    if len(active) > 1:
        # snap the normal to the exact common tangent of the two extreme contacts
        for _ in range(8):
            tangent = np.array([-n[1], n[0]])
            proj = ps[active] @ tangent
            i1, i2 = active[np.argmax(proj)], active[np.argmin(proj)]
            if np.linalg.norm(ps[i1] - ps[i2]) < 1e-9 * scale:
                break
            e = ps[i1] - ps[i2]
            m = np.array([e[1], -e[0]]) / np.linalg.norm(e)
            if m @ n < 0:
                m = -m
            if np.linalg.norm(m - n) < 1e-15:
                break
            n = m
            hmax, hs, ps = sigma.support(n[None, :])
            hmax, hs, ps = hmax[0], hs[:, 0], ps[:, 0]
        Q = d * hmax / (d @ n)
    Qset = []
    for i in np.nonzero(hs >= hmax - tol * hmax)[0]:
        if not any(np.linalg.norm(ps[i] - q) < 1e-9 * scale for q in Qset):
            Qset.append(ps[i])
    cusps = sigma.hull().cusps
    for c in cusps:
        if np.linalg.norm(c - Q) < 1e-7 * scale:
            return "cusp", c, np.array([c]), n
    return "contacts", Q, np.array(Qset), n


def min_time_multiconvex(sigma: MultiConvexIndicatrix, A, B):
    """Minimal travel time with velocities on sigma and a witness piecewise segment."""
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    case, Q, Qset, n = optimal_velocities(sigma, A, B)
    D = B - A
    h = float(sigma.support(n[None, :])[0][0])
    time = float(D @ n) / h
    if case == "cusp" or len(Qset) == 1:
        vel = Q if case == "cusp" else Qset[0]
        tau = np.linalg.norm(D) / np.linalg.norm(Q)
        witness = PiecewiseSegment(np.array([A, B]), (D / tau)[None, :], np.array([tau]))
        return time, witness
    tangent = np.array([-n[1], n[0]])
    proj = Qset @ tangent
    Q1, Q2 = Qset[np.argmax(proj)], Qset[np.argmin(proj)]
    tau = np.linalg.solve(np.column_stack([Q1, Q2]), D)
    tau = np.where(np.abs(tau) < 1e-13 * time, 0.0, tau)
    if np.any(tau < 0):
        raise GeometryError("B - A is not in the cone of the contact velocities")
    legs = [(q, s) for q, s in zip((Q1, Q2), tau) if s > 0]
    pts = [A]
    for q, s in legs:
        pts.append(pts[-1] + s * q)
    pts[-1] = B
    witness = PiecewiseSegment(np.array(pts), np.array([q for q, _ in legs]), np.array([s for _, s in legs]))
    return time, witness


# ---------------------------------------------------------------------------
# constant single-tack case


def _unit_F(metric, e):
    return metric.F(0.0, np.zeros_like(e), e)


def _tau_optimal(Fa, Fb, A, B, tau, grid=720):
    """The point of the Fa-wavefront of radius tau minimizing the remaining Fb time."""
    D = B - A
    psi = np.linspace(0, TWO_PI, grid, endpoint=False)
    e = np.stack([np.cos(psi), np.sin(psi)], axis=-1)
    u = e / _unit_F(Fa, e)[:, None]
    rest = D - tau * u
    ok = np.linalg.norm(rest, axis=-1) > 1e-14 * max(1.0, np.linalg.norm(D))
    vals = np.full(grid, np.inf)
    vals[ok] = Fb.F(0.0, np.zeros_like(rest[ok]), rest[ok])
    k = int(np.argmin(vals))
    if not np.isfinite(vals[k]):
        return B.copy(), 0.0

    def point(s):
        ee = np.array([np.cos(s), np.sin(s)])
        return A + tau * ee / float(_unit_F(Fa, ee[None, :])[0])

    def dfun(s):
        # derivative of Fb(B - p(s)) along the wavefront: -grad Fb . p'(s)
        ee = np.array([np.cos(s), np.sin(s)])
        perp = np.array([-ee[1], ee[0]])
        Fa_e, _, _, ga = Fa.derivatives(0.0, np.zeros(2), ee)
        du = perp / Fa_e - ee * (ga @ perp) / Fa_e**2
        r = B - point(s)
        if np.linalg.norm(r) == 0:
            return 0.0
        gb = Fb.derivatives(0.0, np.zeros(2), r)[3]
        return -tau * float(gb @ du)

    lo, hi = psi[k] - TWO_PI / grid, psi[k] + TWO_PI / grid
    flo, fhi = dfun(lo), dfun(hi)
    if flo < 0 < fhi:
        s = brentq(dfun, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    else:
        s = minimize_scalar(lambda q: float(Fb.F(0.0, np.zeros(2), B - point(q))), bounds=(lo, hi),
                            method="bounded", options={"xatol": 1e-14}).x
    p = point(s)
    rem = B - p
    return p, float(Fb.F(0.0, np.zeros(2), rem)) if np.linalg.norm(rem) > 0 else 0.0


def _hessian_F(metric, v):
    F, _, _, g = metric.derivatives(0.0, np.zeros(2), v)
    G = metric.fundamental_tensor(0.0, np.zeros(2), v)
    return (G - np.outer(g, g)) / F


def _polish(Fa, Fb, A, B, p, time):
    """Newton steps on grad T(p) = 0; the scan leaves p accurate only to ~sqrt(eps)."""
    def T(q):
        return float(Fa.F(0.0, A, q - A)) + float(Fb.F(0.0, A, B - q))

    scale = max(1.0, float(np.linalg.norm(B - A)))
    for _ in range(5):
        u, w = p - A, B - p
        if min(np.linalg.norm(u), np.linalg.norm(w)) < 1e-9 * scale:
            break
        g = Fa.derivatives(0.0, A, u)[3] - Fb.derivatives(0.0, A, w)[3]
        H = _hessian_F(Fa, u) + _hessian_F(Fb, w)
        if np.linalg.cond(H) > 1e10:
            break
        q = p - np.linalg.solve(H, g)
        tq = T(q)
        if not tq <= time + 1e-14 * scale:
            break
        p, time = q, tq
    return p, time


def optimal_tack_constant(Falpha: FinslerMetric, Fbeta: FinslerMetric, A, B, scan=256):
    """Best single tack between two constant metrics: returns (p, time, classification)."""
    for m in (Falpha, Fbeta):
        if not m.is_constant:
            raise GeometryError(f"metric {m.name} is not constant")
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    D = B - A
    if np.linalg.norm(D) == 0:
        raise GeometryError("A and B must differ")
    ta = float(Falpha.F(0.0, A, D))
    tb = float(Fbeta.F(0.0, A, D))

    def total(tau):
        p, rest = _tau_optimal(Falpha, Fbeta, A, B, tau)
        return tau + rest, p

    taus = np.linspace(0.0, ta, scan)
    vals = np.array([total(t)[0] for t in taus])
    local = [i for i in range(scan) if vals[i] <= vals[max(i - 1, 0)] and vals[i] <= vals[min(i + 1, scan - 1)]]
    # a plateau of tied scan minima is refined once
    candidates = []
    for i in local:
        if candidates and i == candidates[-1][-1] + 1:
            candidates[-1].append(i)
        else:
            candidates.append([i])
    candidates = [run[int(np.argmin(vals[run]))] for run in candidates]
    best = (np.inf, None)
    for i in candidates:
        lo, hi = taus[max(i - 1, 0)], taus[min(i + 1, scan - 1)]
        if hi > lo:
            res = minimize_scalar(lambda t: total(t)[0], bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-10})
            for t, v in ((res.x, res.fun), (taus[i], vals[i])):
                if v < best[0]:
                    best = (v, t)
        elif vals[i] < best[0]:
            best = (vals[i], taus[i])
    time, tau = best
    time, p = total(tau)
    p, time = _polish(Falpha, Fbeta, A, B, p, time)
    straight = time >= min(ta, tb) - 1e-10 * max(1.0, min(ta, tb))
    if straight and abs(ta - tb) <= 1e-10 * max(1.0, ta):
        return p, float(time), "whole-segment"
    return p, float(time), "unique"


def snell_residual(Falpha: FinslerMetric, Fbeta: FinslerMetric, t0, p, v_in, v_out):
    """dFalpha/dv(v_in) - dFbeta/dv(v_out) at the tack (t0, p)."""
    v_in = np.asarray(v_in, float)
    v_out = np.asarray(v_out, float)
    if not (np.any(v_in) and np.any(v_out)):
        raise GeometryError("velocities must be non-zero")
    return Falpha.derivatives(t0, p, v_in)[3] - Fbeta.derivatives(t0, p, v_out)[3]
