"""Stable and unstable manifold growth, homoclinic intersections, tangency
hunting by bisection, and the cross-coefficient estimate along a numerically
computed homoclinic orbit.

Manifold branches are grown from a fundamental domain seeded on the
relevant eigendirection: forward images for the unstable side, preimages
for the stable side.  A branch stores one polyline per generation so that
segments never straddle two different images of the domain.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (BadBracketError, BasisError, ConvergenceError,
                     DomainError, NotASaddleError)
from .maps import HenonMap

__all__ = [
    "SaddleFrame", "ManifoldBranch",
    "find_fixed_point", "saddle_frame", "grow_unstable", "grow_stable",
    "homoclinic_intersections", "tangency_bisection",
    "estimate_d1", "estimate_d1_fd",
]


@dataclass
class SaddleFrame:
    point: np.ndarray
    lambda_s: float
    v_s: np.ndarray
    lambda_u: float
    v_u: np.ndarray


def find_fixed_point(m, guess, tol=1e-13, max_iter=60):
    """Newton refinement of a fixed point of the map."""
    z = np.asarray(guess, dtype=float)
    for _ in range(max_iter):
        F = m.eval(z) - z
        if np.hypot(*F) < tol:
            return z
        A = m.jacobian(z) - np.eye(2)
        z = z - np.linalg.solve(A, F)
    if np.hypot(*(m.eval(z) - z)) < 1e-9:
        return z
    raise ConvergenceError(f"fixed-point refinement stalled near {z}")


def _normalize_sign(v):
    for comp in v:
        if comp != 0.0:
            return v if comp > 0.0 else -v
    return v


def saddle_frame(m, fixed_point, tol=1e-10) -> SaddleFrame:
    """Eigen-frame of a saddle fixed point.

    Requires |f(z) - z| <= 1e-9 and a real spectrum split around the unit
    circle; eigenvectors are unit length with the first nonzero component
    positive.
    """
    z = np.asarray(fixed_point, dtype=float)
    if np.hypot(*(m.eval(z) - z)) > 1e-9:
        raise DomainError(f"{z} is not a fixed point")
    J = m.jacobian(z)
    ev, V = np.linalg.eig(J)
    if np.iscomplexobj(ev) and np.abs(ev.imag).max() > tol:
        raise NotASaddleError(f"complex spectrum {ev}")
    ev = ev.real
    V = V.real
    order = np.argsort(np.abs(ev))
    ls, lu = ev[order]
    if not (abs(ls) < 1.0 - tol and abs(lu) > 1.0 + tol):
        raise NotASaddleError(f"spectrum {ev} is not a saddle split")
    v_s = _normalize_sign(V[:, order[0]] / np.linalg.norm(V[:, order[0]]))
    v_u = _normalize_sign(V[:, order[1]] / np.linalg.norm(V[:, order[1]]))
    for lam, v in ((ls, v_s), (lu, v_u)):
        if np.linalg.norm(J @ v - lam * v) > 1e-10 * max(1.0, abs(lam)):
            raise NotASaddleError("eigenpair residual too large")
    return SaddleFrame(point=z, lambda_s=float(ls), v_s=v_s,
                       lambda_u=float(lu), v_u=v_u)


@dataclass
class ManifoldBranch:
    """Polyline approximation of one manifold branch.

    strands holds one (n, 2) array per generation (image or preimage depth
    of the fundamental domain); escaped points are NaN and break segments.
    max_jump, when set, additionally drops segments longer than that bound
    (consecutive preimages straddling an inverse singularity are joined by
    meaningless chords otherwise).
    """

    kind: str                     # "stable" | "unstable"
    side: int                     # sign of the seed offset
    strands: list
    generation: int               # depth grown
    complete: bool = True
    truncated_points: int = 0
    max_jump: float | None = None

    @property
    def points(self) -> np.ndarray:
        chunks = [s[np.isfinite(s).all(axis=1)] for s in self.strands]
        chunks = [c for c in chunks if len(c)]
        if not chunks:
            return np.empty((0, 2))
        return np.vstack(chunks)

    @property
    def generations(self) -> np.ndarray:
        out = []
        for g, s in enumerate(self.strands):
            n = int(np.isfinite(s).all(axis=1).sum())
            out.extend([g] * n)
        return np.asarray(out, dtype=int)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["generation", "index", "x", "y"])
        for g, s in enumerate(self.strands):
            for i, pt in enumerate(s):
                if np.isfinite(pt).all():
                    w.writerow([g, i, f"{pt[0]:.17g}", f"{pt[1]:.17g}"])
        return buf.getvalue()

    def segments(self):
        """(a, b) arrays of all finite consecutive-point segments."""
        A, B = [], []
        for s in self.strands:
            if len(s) < 2:
                continue
            a, b = s[:-1], s[1:]
            ok = np.isfinite(a).all(axis=1) & np.isfinite(b).all(axis=1)
            if self.max_jump is not None:
                ok &= np.hypot(b[:, 0] - a[:, 0], b[:, 1] - a[:, 1]) \
                    <= self.max_jump
            A.append(a[ok])
            B.append(b[ok])
        if not A:
            return np.empty((0, 2)), np.empty((0, 2))
        return np.vstack(A), np.vstack(B)


def _mask_escapes(pts, box):
    if box is None:
        bad = ~np.isfinite(pts).all(axis=1)
    else:
        x0, x1, y0, y1 = box
        bad = (~np.isfinite(pts).all(axis=1) | (pts[:, 0] < x0)
               | (pts[:, 0] > x1) | (pts[:, 1] < y0) | (pts[:, 1] > y1))
    out = pts.copy()
    out[bad] = np.nan
    return out, int(bad.sum())


def grow_unstable(m, frame: SaddleFrame, seed_offset: float = 1e-4,
                  n_points: int = 100, n_generations: int = 20,
                  bounding_box=None, max_segment=None, side: int = 1,
                  max_total_points: int = 40000) -> ManifoldBranch:
    """Grow an unstable branch by forward images of a fundamental domain.

    The domain is [C, f(C)] for a positive unstable multiplier and
    [C, f^2(C)] for a negative one (successive images then alternate
    sides, so one call covers both).  When consecutive images separate by
    more than ``max_segment`` the seed grid is refined, at most doubling
    per generation and never beyond ``max_total_points``.  Points leaving
    ``bounding_box`` are dropped from their strand (recorded, not fatal).
    """
    C = frame.point + side * seed_offset * frame.v_u
    steps_for_domain = 1 if frame.lambda_u > 0 else 2
    B = C.copy()
    for _ in range(steps_for_domain):
        B = m.eval(B)
    t = np.linspace(0.0, 1.0, max(2, n_points))

    def seed(ts):
        return C[None, :] * (1.0 - ts)[:, None] + B[None, :] * ts[:, None]

    def image(ts, g):
        pts = seed(np.asarray(ts))
        for _ in range(g):
            pts = m.eval(pts)
            pts, _ = _mask_escapes(pts, bounding_box)
        return pts

    strands = [seed(t)]
    truncated = 0
    for g in range(1, n_generations + 1):
        pts = m.eval(strands[-1])
        pts, cut = _mask_escapes(pts, bounding_box)
        truncated += cut
        if max_segment is not None and len(t) < max_total_points:
            gaps = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
            wide = np.where(np.isfinite(gaps) & (gaps > max_segment))[0]
            room = min(len(t), max_total_points - len(t))
            if len(wide) > room:
                order = np.argsort(gaps[wide])[::-1]
                wide = wide[order[:room]]
            if len(wide):
                t_new = 0.5 * (t[wide] + t[wide + 1])
                pts_new = image(t_new, g)
                t = np.concatenate([t, t_new])
                order = np.argsort(t)
                t = t[order]
                pts = np.vstack([pts, pts_new])[order]
        strands.append(pts)
    return ManifoldBranch(kind="unstable", side=side, strands=strands,
                          generation=n_generations,
                          truncated_points=truncated)


def grow_stable(m, frame: SaddleFrame, seed_offset: float = 1e-4,
                n_points: int = 100, depth: int = 10,
                bounding_box=None, side: int = 1, strip_grid: int = 16,
                max_strands: int = 24):
    """Grow stable-manifold strands by preimages of a fundamental domain.

    For maps exposing a single-valued ``inverse`` (the generalised Henon
    map) each generation is one backward image.  For maps exposing only
    ``preimages`` the domain is pulled back through every inverse branch,
    so the result is a tree of strands grouped by branch tag; strands
    whose preimage search was incomplete are flagged.
    """
    A = frame.point + side * seed_offset * frame.v_s
    steps_for_domain = 1 if frame.lambda_s > 0 else 2
    B = A.copy()
    for _ in range(steps_for_domain):
        B = m.eval(B)
    t = np.linspace(0.0, 1.0, max(2, n_points))
    domain = A[None, :] * (1.0 - t)[:, None] + B[None, :] * t[:, None]

    if hasattr(m, "inverse"):
        strands = [domain]
        truncated = 0
        cur = domain
        for _ in range(depth):
            with np.errstate(divide="ignore", invalid="ignore"):
                cur = m.inverse(cur)
            cur, cut = _mask_escapes(cur, bounding_box)
            truncated += cut
            strands.append(cur)
        return [ManifoldBranch(kind="stable", side=side, strands=strands,
                               generation=depth, truncated_points=truncated)]

    # branched pullback for non-invertible maps: each level pulls every
    # frontier strand through all inverse branches, splitting by branch tag
    # (strip_grid=0 skips the blend-strip root search; strands are then
    # flagged incomplete)
    preimage_grid = strip_grid
    branches = []
    frontier = [(domain, True, 0)]
    for level in range(depth):
        new_frontier = []
        for pts, complete, _ in frontier:
            finite = pts[np.isfinite(pts).all(axis=1)]
            if len(finite) < 2:
                continue
            window = _window_around(finite, bounding_box)
            sets = m.preimages_batch(finite, search_window=window,
                                     grid=preimage_grid)
            groups = {}
            group_complete = {}
            for pre in sets:
                seen = set()
                for q, tag in zip(pre.points, pre.tags):
                    # at most one point per tag per target keeps strands
                    # single-valued
                    if tag in seen:
                        continue
                    seen.add(tag)
                    groups.setdefault(tag, []).append(q)
                    group_complete[tag] = group_complete.get(tag, True) \
                        and pre.complete
            for tag, qs in groups.items():
                if len(qs) < 2:
                    continue
                arr = np.asarray(qs)
                arr, _ = _mask_escapes(arr, bounding_box)
                if np.isfinite(arr).all(axis=1).sum() < 2:
                    continue
                new_frontier.append((arr, complete and group_complete[tag],
                                     level + 1))
        new_frontier.sort(key=lambda t: -len(t[0]))
        frontier = new_frontier[:max_strands]
        for pts, complete, lev in frontier:
            branches.append(ManifoldBranch(
                kind="stable", side=side, strands=[pts], generation=lev,
                complete=complete))
        if not frontier:
            break
    root = ManifoldBranch(kind="stable", side=side, strands=[domain],
                          generation=0)
    return [root] + branches


def _window_around(pts, box):
    if box is not None:
        return box
    finite = pts[np.isfinite(pts).all(axis=1)]
    if len(finite) == 0:
        return (-4.0, 4.0, -4.0, 4.0)
    cx0, cx1 = finite[:, 0].min(), finite[:, 0].max()
    cy0, cy1 = finite[:, 1].min(), finite[:, 1].max()
    pad = 4.0 + 0.5 * max(cx1 - cx0, cy1 - cy0)
    return (cx0 - pad, cx1 + pad, cy0 - pad, cy1 + pad)


def _collect_segments(branches, window=None):
    if not isinstance(branches, (list, tuple)):
        branches = [branches]
    A, B = [], []
    for br in branches:
        a, b = br.segments()
        A.append(a)
        B.append(b)
    a = np.vstack(A) if A else np.empty((0, 2))
    b = np.vstack(B) if B else np.empty((0, 2))
    if window is not None and len(a):
        x0, x1, y0, y1 = window
        keep = ((np.minimum(a[:, 0], b[:, 0]) <= x1)
                & (np.maximum(a[:, 0], b[:, 0]) >= x0)
                & (np.minimum(a[:, 1], b[:, 1]) <= y1)
                & (np.maximum(a[:, 1], b[:, 1]) >= y0))
        a, b = a[keep], b[keep]
    return a, b


def homoclinic_intersections(ws, wu, tol: float = 1e-9, window=None,
                             touch_tol=None):
    """Transversal crossing points of two polyline families, deduplicated
    within ``tol`` (optionally restricted to a window).

    With ``touch_tol`` set, tangential contacts are reported as well:
    points of one family approaching the other within touch_tol without
    crossing (a quadratic tangency dips to distance ~0 but produces no
    sign change, so crossing counts alone would miss it).
    """
    a, b = _collect_segments(ws, window)
    c, d = _collect_segments(wu, window)
    if len(a) == 0 or len(c) == 0:
        return []
    r = b - a
    s = d - c
    pts = []
    chunk = max(1, int(2e6 / max(1, len(c))))
    for i0 in range(0, len(a), chunk):
        ai = a[i0:i0 + chunk]
        ri = r[i0:i0 + chunk]
        den = ri[:, None, 0] * s[None, :, 1] - ri[:, None, 1] * s[None, :, 0]
        qpx = c[None, :, 0] - ai[:, None, 0]
        qpy = c[None, :, 1] - ai[:, None, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            tt = (qpx * s[None, :, 1] - qpy * s[None, :, 0]) / den
            uu = (qpx * ri[:, None, 1] - qpy * ri[:, None, 0]) / den
        hit = (np.abs(den) > 1e-14) & (tt >= 0.0) & (tt < 1.0) \
            & (uu >= 0.0) & (uu < 1.0)
        ii, jj = np.nonzero(hit)
        pts.extend(ai[ii] + tt[ii, jj, None] * ri[ii])
    if touch_tol is not None:
        pts.extend(_touch_points(a, b, np.vstack([c, d]), touch_tol))
        pts.extend(_touch_points(c, d, np.vstack([a, b]), touch_tol))
    uniq = []
    for pnt in pts:
        if not any(np.hypot(pnt[0] - q[0], pnt[1] - q[1]) <= tol for q in uniq):
            uniq.append(pnt)
    return uniq


def _touch_points(seg_a, seg_b, points, touch_tol):
    """Points approaching the segment family within touch_tol, reduced to
    one representative per cluster (closest approach first)."""
    if len(seg_a) == 0 or len(points) == 0:
        return []
    d = seg_b - seg_a
    L2 = np.maximum(np.sum(d * d, axis=1), 1e-300)
    best = np.full(len(points), np.inf)
    proj_best = np.zeros_like(points)
    chunk = max(1, int(2e6 / max(1, len(seg_a))))
    for i0 in range(0, len(points), chunk):
        p = points[i0:i0 + chunk]
        w = p[:, None, :] - seg_a[None, :, :]
        t = np.clip((w[:, :, 0] * d[None, :, 0] + w[:, :, 1] * d[None, :, 1])
                    / L2[None, :], 0.0, 1.0)
        proj = seg_a[None, :, :] + t[:, :, None] * d[None, :, :]
        dist = np.hypot(p[:, None, 0] - proj[:, :, 0],
                        p[:, None, 1] - proj[:, :, 1])
        j = np.argmin(dist, axis=1)
        rows = np.arange(len(p))
        best[i0:i0 + chunk] = dist[rows, j]
        proj_best[i0:i0 + chunk] = proj[rows, j]
    close = np.where(best < touch_tol)[0]
    close = close[np.argsort(best[close])]
    out = []
    for i in close:
        mid = 0.5 * (points[i] + proj_best[i])
        if not any(np.hypot(mid[0] - q[0], mid[1] - q[1]) < 100 * touch_tol
                   for q in out):
            out.append(mid)
    return out


def _default_saddle_guess(m):
    if isinstance(m, HenonMap):
        candidates = m.fixed_points()
        for z in candidates:
            try:
                saddle_frame(m, find_fixed_point(m, z))
                return z
            except (NotASaddleError, ConvergenceError, DomainError):
                continue
        raise NotASaddleError("map has no real saddle fixed point")
    return np.zeros(2)


def _count_at(m, detector_window, saddle_guess, grow_kw):
    z = find_fixed_point(m, saddle_guess if saddle_guess is not None
                         else _default_saddle_guess(m))
    frame = saddle_frame(m, z)
    wu, ws = [], []
    for side in (1, -1):
        wu.append(grow_unstable(m, frame, side=side, **grow_kw["unstable"]))
        ws.extend(grow_stable(m, frame, side=side, **grow_kw["stable"]))
    pts = homoclinic_intersections(ws, wu, tol=1e-7, window=detector_window)
    return len(pts), z


def tangency_bisection(map_family, param_name: str, bracket,
                       detector_window, tol: float = 1e-9,
                       saddle_guess=None, grow_kw=None) -> float:
    """Locate a parameter value where the manifolds become tangent.

    ``map_family`` is a map whose field ``param_name`` is swept (or a
    callable value -> map).  The local intersection count inside
    ``detector_window`` must differ in parity between the bracket ends
    (a tangency changes the count by 2); bisection then shrinks the
    bracket below ``tol`` and returns the midpoint.
    """
    if callable(map_family):
        make = map_family
    else:
        def make(v):
            return replace(map_family, **{param_name: v})
    lo, hi = float(bracket[0]), float(bracket[1])
    if grow_kw is None:
        grow_kw = {"unstable": {}, "stable": {}}
    guess = saddle_guess
    n_lo, z = _count_at(make(lo), detector_window, guess, grow_kw)
    guess = z if saddle_guess is None else saddle_guess
    n_hi, _ = _count_at(make(hi), detector_window, guess, grow_kw)
    if n_lo == n_hi:
        raise BadBracketError(
            f"intersection count {n_lo} identical at both bracket ends")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        n_mid, z = _count_at(make(mid), detector_window, guess, grow_kw)
        guess = z if saddle_guess is None else saddle_guess
        if n_mid == n_lo:
            lo = mid
        else:
            hi = mid
            n_hi = n_mid
    return 0.5 * (lo + hi)


def estimate_d1(m, homoclinic_orbit, frame: SaddleFrame,
                delta: float = 1e-6) -> float:
    """Cross coefficient of the excursion: how a stable-direction
    perturbation at the start of a homoclinic orbit re-emerges along the
    unstable direction at its end.

    The perturbation is propagated through the product of analytic
    Jacobians along the orbit, decomposed in the (v_u, v_s) basis, and the
    unstable coefficient is rescaled by the ratio of the end point's
    stable-axis coordinate to the start point's unstable-axis coordinate.
    ``delta`` only feeds the finite-difference cross-check
    (estimate_d1_fd); the analytic path is delta-free.
    """
    orbit = np.asarray(homoclinic_orbit, dtype=float)
    if len(orbit) < 2:
        raise DomainError("need at least two orbit points")
    M = np.column_stack([frame.v_u, frame.v_s])
    if abs(np.linalg.det(M)) < 1e-12:
        raise BasisError("eigenvector basis is singular")
    Minv = np.linalg.inv(M)
    v = frame.v_s.copy()
    for z in orbit[:-1]:
        v = m.jacobian(z) @ v
    coeff_u = (Minv @ v)[0]
    start = Minv @ (orbit[0] - frame.point)
    end = Minv @ (orbit[-1] - frame.point)
    y_start = start[0]   # unstable-axis coordinate of the starting point
    x_end = end[1]       # stable-axis coordinate of the landing point
    if y_start == 0.0:
        raise DomainError("orbit must start off the stable axis")
    return float(coeff_u * x_end / y_start)


def estimate_d1_fd(m, homoclinic_orbit, frame: SaddleFrame,
                   delta: float = 1e-6, richardson: bool = True) -> float:
    """Finite-difference variant of estimate_d1 (propagates the actually
    perturbed orbit); first-order in delta, so optionally Richardson-
    extrapolated over delta and delta/2."""
    orbit = np.asarray(homoclinic_orbit, dtype=float)
    n = len(orbit) - 1
    M = np.column_stack([frame.v_u, frame.v_s])
    Minv = np.linalg.inv(M)

    def one(dlt):
        z = orbit[0] + dlt * frame.v_s
        for _ in range(n):
            z = m.eval(z)
        vdiff = (z - orbit[-1]) / dlt
        coeff_u = (Minv @ vdiff)[0]
        start = Minv @ (orbit[0] - frame.point)
        end = Minv @ (orbit[-1] - frame.point)
        return coeff_u * end[1] / start[0]

    if not richardson:
        return float(one(delta))
    e1 = one(delta)
    e2 = one(delta / 2.0)
    return float(2.0 * e2 - e1)
