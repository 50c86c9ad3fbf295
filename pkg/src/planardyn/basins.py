"""Basin-of-attraction rasters with period detection, implicit-curve
tracing of det Df = 0 by marching squares, cusp location, and preimage-count
region classification.

Cell labels are integers: DIVERGED (-1), UNRESOLVED (0), or the detected
period p >= 1.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "DIVERGED", "UNRESOLVED", "BasinGrid", "ImplicitCurve", "RegionSample",
    "compute_basin", "detect_period", "trace_implicit", "curve_image",
    "cusp_locate", "classify_regions", "labels_to_pgm",
]

DIVERGED = -1
UNRESOLVED = 0


@dataclass
class BasinGrid:
    window: tuple                # (xmin, xmax, ymin, ymax)
    nx: int
    ny: int
    labels: np.ndarray           # (nx, ny) int array
    max_iter: int
    period_tol: float
    div_threshold: float
    max_period: int

    def __post_init__(self):
        if self.labels.shape != (self.nx, self.ny):
            raise DomainError("labels shape does not match nx x ny")
        if (self.labels > self.max_period).any():
            raise DomainError("label exceeds max_period")

    def cell_centers(self):
        xs = np.linspace(self.window[0], self.window[1], self.nx)
        ys = np.linspace(self.window[2], self.window[3], self.ny)
        return xs, ys

    def to_csv(self) -> str:
        xs, ys = self.cell_centers()
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["i", "j", "x", "y", "label"])
        for i in range(self.nx):
            for j in range(self.ny):
                w.writerow([i, j, f"{xs[i]:.17g}", f"{ys[j]:.17g}",
                            int(self.labels[i, j])])
        return buf.getvalue()

    def to_pgm(self) -> bytes:
        return labels_to_pgm(self.labels)


def labels_to_pgm(labels: np.ndarray) -> bytes:
    """Binary P5 raster of a label grid.

    Grey mapping: DIVERGED -> 255 (white), UNRESOLVED -> 0 (black),
    Period(p) -> 16 + 12 * ((p - 1) mod 16), i.e. a 16-step grey cycle
    spanning 16..196.  Rows are written in decreasing j (top row =
    largest y) with x increasing left to right.
    """
    grey = np.zeros(labels.shape, dtype=np.uint8)
    grey[labels == DIVERGED] = 255
    per = labels > 0
    grey[per] = (16 + 12 * ((labels[per] - 1) % 16)).astype(np.uint8)
    img = grey.T[::-1, :]  # (row, col) = (ny.., nx)
    header = f"P5\n{labels.shape[0]} {labels.shape[1]}\n255\n".encode()
    return header + img.tobytes()


def detect_period(tail, tol: float, max_period: int):
    """Smallest p <= max_period with |z[-1] - z[-1-p]| < tol, else None."""
    tail = np.asarray(tail, dtype=float)
    if len(tail) <= max_period:
        raise DomainError("tail must be longer than max_period")
    last = tail[-1]
    for p in range(1, max_period + 1):
        if np.hypot(*(last - tail[-1 - p])) < tol:
            return p
    return None


def _basin_block(m, x, y, max_iter, period_tol, div_threshold, max_period):
    diverged = np.zeros(x.shape, dtype=bool)
    tail_len = max_period + 1

    def step(x, y, diverged):
        z = m.eval(np.stack([x, y], axis=-1))
        xn, yn = z[..., 0], z[..., 1]
        bad = (~np.isfinite(xn) | ~np.isfinite(yn)
               | (np.hypot(xn, yn) > div_threshold))
        newly = bad & ~diverged
        # park diverged cells at the origin so later steps stay finite
        xn = np.where(newly | diverged, 0.0, xn)
        yn = np.where(newly | diverged, 0.0, yn)
        return xn, yn, diverged | newly

    for _ in range(max_iter - max_period):
        x, y, diverged = step(x, y, diverged)
    tail = np.empty((tail_len, 2) + x.shape)
    for j in range(tail_len):
        tail[j, 0] = x
        tail[j, 1] = y
        x, y, diverged = step(x, y, diverged)
    labels = np.full(x.shape, UNRESOLVED, dtype=np.int32)
    zx, zy = tail[-1, 0], tail[-1, 1]
    for p in range(1, max_period + 1):
        d = np.hypot(zx - tail[-1 - p, 0], zy - tail[-1 - p, 1])
        hit = (labels == UNRESOLVED) & ~diverged & (d < period_tol)
        labels[hit] = p
    labels[diverged] = DIVERGED
    return labels


def compute_basin(m, window, nx: int, ny: int, max_iter: int = 1000,
                  period_tol: float = 1e-13, div_threshold: float = 1e2,
                  max_period: int = 64, workers: int = 1) -> BasinGrid:
    """Iterate every cell of an nx x ny grid and label it Period(p),
    DIVERGED, or UNRESOLVED.

    A cell diverges when its orbit norm exceeds ``div_threshold``;
    otherwise the final state is compared against its lag-p predecessors
    for p = 1..max_period and the smallest match within ``period_tol``
    wins.  Row blocks may run on several threads; the merge is positional,
    so the output is identical for any worker count.
    """
    if nx < 1 or ny < 1:
        raise DomainError("grid must be at least 1x1")
    if max_iter <= max_period:
        raise DomainError("max_iter must exceed max_period")
    xs = np.linspace(window[0], window[1], nx)
    ys = np.linspace(window[2], window[3], ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")

    def run_rows(sl):
        return _basin_block(m, X[sl].copy(), Y[sl].copy(), max_iter,
                            period_tol, div_threshold, max_period)

    if workers <= 1 or nx < 2 * workers:
        labels = run_rows(slice(None))
    else:
        bounds = np.linspace(0, nx, workers + 1).astype(int)
        slices = [slice(bounds[i], bounds[i + 1]) for i in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run_rows, slices))
        labels = np.vstack(blocks)
    return BasinGrid(window=tuple(window), nx=nx, ny=ny, labels=labels,
                     max_iter=max_iter, period_tol=period_tol,
                     div_threshold=div_threshold, max_period=max_period)


@dataclass
class ImplicitCurve:
    polylines: list              # list of (n, 2) arrays
    function_id: str = "det-Df"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["polyline", "index", "x", "y"])
        for pid, line in enumerate(self.polylines):
            for i, pt in enumerate(line):
                w.writerow([pid, i, f"{pt[0]:.17g}", f"{pt[1]:.17g}"])
        return buf.getvalue()


def _marching_squares(F, xs, ys, refine):
    """Segments of the zero set of a sampled field, with each vertex
    bisected onto the zero level along its grid edge."""
    nx, ny = F.shape
    segs = []

    def edge_point(i0, j0, i1, j1):
        a = np.array([xs[i0], ys[j0]])
        b = np.array([xs[i1], ys[j1]])
        fa, fb = F[i0, j0], F[i1, j1]
        if fa == 0.0:
            return a
        if fb == 0.0:
            return b
        return refine(a, b, fa, fb)

    for i in range(nx - 1):
        for j in range(ny - 1):
            f00, f10 = F[i, j], F[i + 1, j]
            f01, f11 = F[i, j + 1], F[i + 1, j + 1]
            case = ((f00 > 0) | ((f10 > 0) << 1)
                    | ((f11 > 0) << 2) | ((f01 > 0) << 3))
            if case in (0, 15):
                continue
            pts = {}
            if (f00 > 0) != (f10 > 0):
                pts["b"] = edge_point(i, j, i + 1, j)
            if (f10 > 0) != (f11 > 0):
                pts["r"] = edge_point(i + 1, j, i + 1, j + 1)
            if (f01 > 0) != (f11 > 0):
                pts["t"] = edge_point(i, j + 1, i + 1, j + 1)
            if (f00 > 0) != (f01 > 0):
                pts["l"] = edge_point(i, j, i, j + 1)
            keys = list(pts)
            if len(keys) == 2:
                segs.append((pts[keys[0]], pts[keys[1]]))
            elif len(keys) == 4:
                # saddle cell: pair edges by the sign at the cell centre
                fc = 0.25 * (f00 + f10 + f01 + f11)
                if (fc > 0) == (f00 > 0):
                    segs.append((pts["l"], pts["b"]))
                    segs.append((pts["t"], pts["r"]))
                else:
                    segs.append((pts["l"], pts["t"]))
                    segs.append((pts["b"], pts["r"]))
    return segs


def _chain_segments(segs, tol):
    """Join segments sharing endpoints into ordered polylines."""
    if not segs:
        return []

    def key(p):
        return (round(p[0] / tol), round(p[1] / tol))

    adj = {}
    for si, (a, b) in enumerate(segs):
        adj.setdefault(key(a), []).append((si, 0))
        adj.setdefault(key(b), []).append((si, 1))
    used = [False] * len(segs)
    lines = []
    for si in range(len(segs)):
        if used[si]:
            continue
        used[si] = True
        a, b = segs[si]
        line = [a, b]
        for end in (1, 0):
            while True:
                p = line[-1] if end == 1 else line[0]
                nxt = None
                for sj, which in adj.get(key(p), []):
                    if not used[sj]:
                        nxt = (sj, which)
                        break
                if nxt is None:
                    break
                sj, which = nxt
                used[sj] = True
                q = segs[sj][1 - which]
                if end == 1:
                    line.append(q)
                else:
                    line.insert(0, q)
        lines.append(np.asarray(line))
    return lines


def trace_implicit(m, window, resolution: int = 200, fn=None,
                   refine_tol: float = 1e-6) -> ImplicitCurve:
    """Zero set of a scalar field (default det Df) inside a window.

    Marching squares on a (resolution+1)^2 sample grid produces segment
    endpoints on cell edges; each endpoint is then bisected along its edge
    until |f| < refine_tol.  Ambiguous saddle cells are resolved by the
    centre-sample sign.
    """
    if fn is None:
        def fn(z):
            J = m.jacobian(z)
            return J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        function_id = "det-Df"
    else:
        function_id = getattr(fn, "__name__", "custom")
    xs = np.linspace(window[0], window[1], resolution + 1)
    ys = np.linspace(window[2], window[3], resolution + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    F = fn(np.stack([X, Y], axis=-1))

    def refine(a, b, fa, fb):
        for _ in range(80):
            mid = 0.5 * (a + b)
            fm = fn(mid)
            if abs(fm) < refine_tol:
                return mid
            if (fm > 0) == (fa > 0):
                a, fa = mid, fm
            else:
                b, fb = mid, fm
        return 0.5 * (a + b)

    segs = _marching_squares(F, xs, ys, refine)
    cell = max((window[1] - window[0]), (window[3] - window[2])) / resolution
    lines = _chain_segments(segs, tol=cell * 1e-3)
    return ImplicitCurve(polylines=lines, function_id=function_id)


def curve_image(m, curve: ImplicitCurve) -> ImplicitCurve:
    """Forward image of a traced curve (the preimage-count boundary of a
    non-invertible map is the image of its det Df = 0 set)."""
    lines = [m.eval(line) for line in curve.polylines]
    return ImplicitCurve(polylines=lines,
                         function_id=curve.function_id + "-image")


def cusp_locate(curve: ImplicitCurve, angle_deg: float = 120.0):
    """Cusp candidates: vertices where the polyline turning angle exceeds
    ``angle_deg`` and is locally maximal, refined by intersecting line fits
    through the points on either side."""
    out = []
    thresh = np.cos(np.deg2rad(angle_deg))
    for line in curve.polylines:
        if len(line) < 5:
            continue
        d = np.diff(line, axis=0)
        norms = np.linalg.norm(d, axis=1)
        ok = norms > 0
        d = d[ok] / norms[ok][:, None]
        pts = np.vstack([line[:1], line[1:][ok]])
        cosang = np.sum(d[:-1] * d[1:], axis=1)  # direction alignment
        # turning angle > angle_deg  <=>  alignment < cos(angle_deg)
        cand = np.where(cosang < thresh)[0]
        for ci in cand:
            lo = max(ci - 1, 0)
            hi = min(ci + 1, len(cosang) - 1)
            if cosang[ci] > cosang[lo:hi + 1].min():
                continue
            vi = ci + 1  # vertex index in pts
            apex = _line_fit_intersection(pts, vi)
            out.append(apex if apex is not None else pts[vi])
    dedup = []
    for p in out:
        if not any(np.hypot(p[0] - q[0], p[1] - q[1]) < 1e-9 for q in dedup):
            dedup.append(p)
    return dedup


def _line_fit_intersection(pts, vi, m=4):
    before = pts[max(0, vi - m):vi + 1]
    after = pts[vi:vi + m + 1]
    if len(before) < 2 or len(after) < 2:
        return None

    def fit(seg):
        p0 = seg.mean(axis=0)
        u, s, vt = np.linalg.svd(seg - p0)
        return p0, vt[0]

    p1, d1 = fit(before)
    p2, d2 = fit(after)
    A = np.column_stack([d1, -d2])
    if abs(np.linalg.det(A)) < 1e-12:
        return None
    t = np.linalg.solve(A, p2 - p1)
    return p1 + t[0] * d1


@dataclass
class RegionSample:
    point: np.ndarray
    count: int
    complete: bool


def classify_regions(m, samples, search_window=(-4.0, 4.0, -4.0, 4.0),
                     grid=64):
    """Preimage count at each sample point (propagating the completeness
    flag of the underlying search)."""
    out = []
    for z in samples:
        pre = m.preimages(np.asarray(z, dtype=float),
                          search_window=search_window, grid=grid)
        out.append(RegionSample(point=np.asarray(z, dtype=float),
                                count=len(pre.points),
                                complete=pre.complete))
    return out
