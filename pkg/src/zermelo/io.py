"""Trajectory CSV files and the SVG overlay plot."""

from __future__ import annotations

import csv
from typing import Optional, Sequence

import numpy as np

from .metrics import DiscreteTrajectory, FinslerMetric

CSV_HEADER = ["segment", "s", "t", "x", "y", "vx", "vy"]
PALETTE = ["#1f5fbf", "#c8322d", "#2e8b3e", "#8a4fb3", "#d98a16", "#3b9ea8"]


def _fmt(value: float) -> str:
    # repr keeps the exact binary value, so reloaded trajectories are bitwise equal
    return repr(float(value))


def write_trajectory_csv(path, segments: Sequence[DiscreteTrajectory]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i, seg in enumerate(segments):
            for s in range(len(seg.t)):
                row = [str(i), str(s), _fmt(seg.t[s]), _fmt(seg.x[s, 0]), _fmt(seg.x[s, 1])]
                if s < seg.T:
                    row += [_fmt(seg.v[s, 0]), _fmt(seg.v[s, 1])]
                else:
                    row += ["", ""]
                w.writerow(row)


def read_trajectory_csv(path, metrics: Optional[Sequence[FinslerMetric]] = None, rtol: float = 1e-12):
    """Load segments written by :func:`write_trajectory_csv`.

    When ``metrics`` is given (one per segment) every segment is re-checked
    against the trajectory invariants and a ValueError is raised on failure.
    """
    rows = {}
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        for line_no, row in enumerate(r, start=2):
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"line {line_no}: expected {len(CSV_HEADER)} fields")
            seg, s = int(row[0]), int(row[1])
            rows.setdefault(seg, []).append((s, row[2:]))
    out = []
    for seg in sorted(rows):
        items = sorted(rows[seg])
        if [s for s, _ in items] != list(range(len(items))):
            raise ValueError(f"segment {seg}: grid indices are not contiguous")
        t = np.array([float(f[0]) for _, f in items])
        x = np.array([[float(f[1]), float(f[2])] for _, f in items])
        if items[-1][1][3] or items[-1][1][4]:
            raise ValueError(f"segment {seg}: last row must not carry a control")
        v = np.array([[float(f[3]), float(f[4])] for _, f in items[:-1]]).reshape(-1, 2)
        traj = DiscreteTrajectory(t=t, x=x, v=v)
        if metrics is not None and traj.T > 0:
            traj.check(metrics[seg], rtol=rtol)
        out.append(traj)
    return out


# ---------------------------------------------------------------------------
# SVG


class _Canvas:
    def __init__(self, points, width=640, height=480, margin=40):
        P = np.asarray(points, float).reshape(-1, 2)
        lo, hi = P.min(axis=0), P.max(axis=0)
        span = np.maximum(hi - lo, 1e-9)
        self.scale = min((width - 2 * margin) / span[0], (height - 2 * margin) / span[1])
        self.lo = lo
        self.width, self.height, self.margin = width, height, margin
        self.items = []

    def map(self, p):
        x = self.margin + (p[0] - self.lo[0]) * self.scale
        y = self.height - self.margin - (p[1] - self.lo[1]) * self.scale
        return f"{x:.2f}", f"{y:.2f}"

    def path(self, pts, color, width=2.0, dash=None):
        coords = " ".join(",".join(self.map(p)) for p in pts)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="{width}"{extra}/>')

    def dot(self, p, color, r=4.0):
        x, y = self.map(p)
        self.items.append(f'<circle cx="{x}" cy="{y}" r="{r}" fill="{color}"/>')

    def text(self, xy, s, color="#222222", size=12, anchor="start"):
        self.items.append(
            f'<text x="{xy[0]:.2f}" y="{xy[1]:.2f}" font-family="sans-serif" font-size="{size}" '
            f'fill="{color}" text-anchor="{anchor}">{s}</text>')

    def render(self, title):
        head = (f'<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
                f'<rect width="100%" height="100%" fill="#ffffff"/>\n')
        self.text((self.width / 2, 20), title, size=14, anchor="middle")
        return head + "\n".join(self.items) + "\n</svg>\n"


def render_svg(title, metric_names, tack_segments, tack_metric_idx, total_time, baselines=()):
    """Overlay plot: segments colored by active metric, tack dots, travel-time labels.

    ``baselines`` is a list of (metric index, trajectory, time) drawn dashed.
    """
    pts = [s.x for s in tack_segments] + [b[1].x for b in baselines]
    cv = _Canvas(np.concatenate(pts, axis=0))
    for k, traj, time in baselines:
        cv.path(traj.x, PALETTE[k % len(PALETTE)], width=1.2, dash="6,4")
    for seg, k in zip(tack_segments, tack_metric_idx):
        cv.path(seg.x, PALETTE[k % len(PALETTE)])
    for seg, k in zip(tack_segments[:-1], tack_metric_idx[:-1]):
        cv.dot(seg.x[-1], PALETTE[k % len(PALETTE)])
    cv.dot(tack_segments[0].x[0], "#222222", 3.0)
    cv.dot(tack_segments[-1].x[-1], "#222222", 3.0)
    y = cv.height - 12
    x = 12.0
    for k, _, time in baselines:
        cv.text((x, y), f"{metric_names[k]}: {time:.4f}", color=PALETTE[k % len(PALETTE)])
        x += 150
    cv.text((cv.width - 12, 40), f"tacking: {total_time:.4f}", color=PALETTE[2], anchor="end")
    return cv.render(title)
