"""Resonance detection and polynomial normal-form reduction near a planar
saddle, plus a numerical check of the reduced local map's k-step expansion.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (ConditioningError, DomainError, RegionEscapeError,
                     ResonanceObstruction)
from .maps import GrhtMap

__all__ = [
    "ResonanceReport", "QuadraticCoeffs", "OrderNTermTable", "PolyChange",
    "detect_resonances", "eliminate_quadratic", "eliminate_order_n",
    "verify_conjugacy", "t0k_expansion_residual",
]


@dataclass
class ResonanceReport:
    pairs: list          # (p, q) with lam^p sigma^q = 1 (within tol)
    tol: float
    max_order: int

    def __contains__(self, pq):
        return tuple(pq) in set(map(tuple, self.pairs))


def detect_resonances(lam: float, sigma: float, max_order: int,
                      tol: float = 1e-12) -> ResonanceReport:
    """Exhaustive scan for eigenvalue resonances lam^p sigma^q = 1 with
    -1 <= p, q <= max_order and p + q >= 1."""
    if not (0.0 < abs(lam) < 1.0 < abs(sigma)):
        raise DomainError("need 0 < |lam| < 1 < |sigma|")
    if max_order < 2:
        raise DomainError("max_order must be >= 2")
    pairs = []
    for p in range(-1, max_order + 1):
        for q in range(-1, max_order + 1):
            if p + q < 1:
                continue
            if abs(lam ** p * sigma ** q - 1.0) <= tol:
                pairs.append((p, q))
    return ResonanceReport(pairs=pairs, tol=tol, max_order=max_order)


@dataclass
class QuadraticCoeffs:
    """Quadratic terms of a planar map and the coordinate-change
    coefficients that remove them.

    a1..a3 multiply x^2, xy, y^2 in the first component; b1..b3 the same
    monomials in the second.  c1..c3 / d1..d3 are the corresponding
    near-identity change coefficients (filled by eliminate_quadratic; these
    are unrelated to the excursion-map coefficients of the same name).
    """

    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    b1: float = 0.0
    b2: float = 0.0
    b3: float = 0.0
    c1: float | None = None
    c2: float | None = None
    c3: float | None = None
    d1: float | None = None
    d2: float | None = None
    d3: float | None = None


def eliminate_quadratic(lam: float, sigma: float, q: QuadraticCoeffs,
                        tol: float = 1e-12) -> QuadraticCoeffs:
    """Solve the six linear matching conditions that cancel all quadratic
    terms; raise ResonanceObstruction if any denominator degenerates."""
    if not (0.0 < abs(lam) < 1.0 < abs(sigma)):
        raise DomainError("need 0 < |lam| < 1 < |sigma|")
    denoms = {
        "c1 (x^2 in first component)": lam * (1.0 - lam),
        "c2 (xy in first component)": lam * (1.0 - sigma),
        "c3 (y^2 in first component)": lam - sigma * sigma,
        "d1 (x^2 in second component)": sigma - lam * lam,
        "d2 (xy in second component)": sigma * (1.0 - lam),
        "d3 (y^2 in second component)": sigma * (1.0 - sigma),
    }
    for term, den in denoms.items():
        if abs(den) <= tol:
            raise ResonanceObstruction(term, den)
    dv = list(denoms.values())
    return replace(q,
                   c1=q.a1 / dv[0], c2=q.a2 / dv[1], c3=q.a3 / dv[2],
                   d1=q.b1 / dv[3], d2=q.b2 / dv[4], d3=q.b3 / dv[5])


@dataclass
class OrderNTermTable:
    """One homogeneous order of a planar map's Taylor tail.

    a[i], b[i] are the coefficients of x^(n-i) y^i in the two components
    (i = 0..n).  After elimination, c[i]/d[i] hold the change-of-variable
    coefficients and resonant_x/resonant_y flag terms whose denominators
    vanish (those terms are data, not errors).
    """

    n: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray | None = None
    d: np.ndarray | None = None
    resonant_x: np.ndarray | None = None
    resonant_y: np.ndarray | None = None

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.n < 2 or len(self.a) != self.n + 1 or len(self.b) != self.n + 1:
            raise DomainError("need n >= 2 and coefficient arrays of length n+1")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["component", "n", "i", "coeff_in", "coeff_out",
                    "resonant_flag"])
        for comp, coeff_in, coeff_out, res in (
                ("x", self.a, self.c, self.resonant_x),
                ("y", self.b, self.d, self.resonant_y)):
            for i in range(self.n + 1):
                out = "" if coeff_out is None else f"{coeff_out[i]:.17g}"
                flag = "" if res is None else int(res[i])
                w.writerow([comp, self.n, i, f"{coeff_in[i]:.17g}", out, flag])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "OrderNTermTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise DomainError("empty term-table CSV")
        n = int(rows[0]["n"])
        a = np.zeros(n + 1)
        b = np.zeros(n + 1)
        c = np.zeros(n + 1)
        d = np.zeros(n + 1)
        rx = np.zeros(n + 1, dtype=bool)
        ry = np.zeros(n + 1, dtype=bool)
        have_out = False
        for row in rows:
            i = int(row["i"])
            coeff = float(row["coeff_in"])
            out = row["coeff_out"]
            flag = row["resonant_flag"]
            if row["component"] == "x":
                a[i] = coeff
                if out != "":
                    c[i] = float(out)
                    have_out = True
                if flag != "":
                    rx[i] = bool(int(flag))
            else:
                b[i] = coeff
                if out != "":
                    d[i] = float(out)
                    have_out = True
                if flag != "":
                    ry[i] = bool(int(flag))
        if have_out:
            return cls(n=n, a=a, b=b, c=c, d=d, resonant_x=rx, resonant_y=ry)
        return cls(n=n, a=a, b=b)


def eliminate_order_n(lam: float, sigma: float, t: OrderNTermTable,
                      tol: float = 1e-12) -> OrderNTermTable:
    """Eliminate the order-n terms that the eigenvalues permit.

    The x^(n-i) y^i term of the first component dies iff
    lam - lam^(n-i) sigma^i != 0, the matching term of the second iff
    sigma (1 - sigma^(i-1) lam^(n-i)) != 0; vanishing denominators are
    recorded as resonant markers.  The i = 0 and i = n terms are always
    eliminable for a saddle.
    """
    n = t.n
    c = np.zeros(n + 1)
    d = np.zeros(n + 1)
    rx = np.zeros(n + 1, dtype=bool)
    ry = np.zeros(n + 1, dtype=bool)
    for i in range(n + 1):
        den_x = lam - lam ** (n - i) * sigma ** i
        den_y = sigma * (1.0 - sigma ** (i - 1) * lam ** (n - i))
        if abs(den_x) < tol:
            rx[i] = True
        else:
            c[i] = t.a[i] / den_x
        if abs(den_y) < tol:
            ry[i] = True
        else:
            d[i] = t.b[i] / den_y
    return OrderNTermTable(n=n, a=t.a.copy(), b=t.b.copy(), c=c, d=d,
                           resonant_x=rx, resonant_y=ry)


@dataclass
class PolyChange:
    """Near-identity quadratic change of variables

        u = x + c1 x^2 + c2 xy + c3 y^2
        v = y + d1 x^2 + d2 xy + d3 y^2
    """

    c: tuple = (0.0, 0.0, 0.0)
    d: tuple = (0.0, 0.0, 0.0)

    @classmethod
    def from_quadratic(cls, q: QuadraticCoeffs) -> "PolyChange":
        if q.c1 is None:
            raise DomainError("coefficients not filled; run eliminate_quadratic")
        return cls(c=(q.c1, q.c2, q.c3), d=(q.d1, q.d2, q.d3))

    def apply(self, z):
        z = np.asarray(z, dtype=float)
        x, y = z[..., 0], z[..., 1]
        c1, c2, c3 = self.c
        d1, d2, d3 = self.d
        return np.stack([x + c1 * x * x + c2 * x * y + c3 * y * y,
                         y + d1 * x * x + d2 * x * y + d3 * y * y], axis=-1)


def _cheb_nodes(lo, hi, n):
    k = np.arange(n)
    t = np.cos((2 * k + 1) * np.pi / (2 * n))
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * t


def verify_conjugacy(map_fn, transform: PolyChange, order: int,
                     window=(-0.1, 0.1, -0.1, 0.1),
                     eliminated_degrees=(2,), cond_limit=1e10) -> float:
    """Fit the transformed map by a bivariate polynomial on a Chebyshev
    tensor grid and report the largest surviving coefficient among the
    degrees the transform claims to have eliminated."""
    npts = order + 3
    xs = _cheb_nodes(window[0], window[1], npts)
    ys = _cheb_nodes(window[2], window[3], npts)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    U = transform.apply(pts)
    V = transform.apply(np.stack([map_fn(p) for p in pts]))

    monomials = [(i, j) for total in range(order + 1)
                 for i in range(total + 1) for j in [total - i]]
    A = np.stack([U[:, 0] ** i * U[:, 1] ** j for i, j in monomials], axis=-1)
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] == 0.0 or sv[0] / sv[-1] > cond_limit:
        raise ConditioningError(
            f"fit condition number {sv[0] / max(sv[-1], 1e-300):.2e} "
            f"exceeds {cond_limit:.1e}; shrink the window or lower the order")
    coef, *_ = np.linalg.lstsq(A, V, rcond=None)
    worst = 0.0
    for idx, (i, j) in enumerate(monomials):
        if i + j in eliminated_degrees:
            worst = max(worst, abs(coef[idx, 0]), abs(coef[idx, 1]))
    return worst


def t0k_expansion_residual(p: GrhtMap, k: int, z) -> tuple:
    """Residuals of the k-step product expansion of the linear-region piece.

    Iterates U0 alone k times from z and returns

        rx = |x_k / (lam_eff^k x) - 1 - k a_eff x y|
        ry = |y_k / (sigma^k y) - 1 - k b1 x y|

    Requires k |x y| <= 0.1 and every pre-image iterate to stay in the
    region y <= h0 where the full map agrees with U0.
    """
    z = np.asarray(z, dtype=float)
    x0, y0 = z
    if x0 == 0.0 or y0 == 0.0:
        raise DomainError("need x, y != 0 to normalise the expansion")
    if k * abs(x0 * y0) > 0.1:
        raise DomainError(f"k |x y| = {k * abs(x0 * y0):.3g} exceeds 0.1")
    lam_eff = p.lam + p.mu2
    a_eff = p.a1 + p.mu4
    w = z.copy()
    for j in range(k):
        if w[1] > p.h0:
            raise RegionEscapeError(
                f"iterate {j} at y = {w[1]:.3g} left the linear region")
        w = p.u0(w)
    rx = abs(w[0] / (lam_eff ** k * x0) - 1.0 - k * a_eff * x0 * y0)
    ry = abs(w[1] / (p.sigma ** k * y0) - 1.0 - k * p.b1 * x0 * y0)
    return rx, ry
