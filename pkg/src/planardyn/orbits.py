"""Single-round periodic solutions: closed forms on the analytic family,
a damped Newton solver for everything else, monodromy and stability.

A single-round solution of the piecewise family spends k consecutive
iterates in the linear region and one iterate in the excursion region, so
one of its points is a fixed point of U0^k o U1 and the full orbit has
period k + 1.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (ConvergenceError, DomainError, SingularMatrixError,
                     StripCollisionError)
from .maps import GrhtMap

__all__ = [
    "StabilityClass", "SrSolution", "PsiPair",
    "classify", "monodromy", "discriminant", "tau_delta_limits", "psi_pair",
    "sr_closed_form", "sr_newton", "u1_fixed_points", "grht_invariant_check",
    "compose", "compose_jacobian",
]


class StabilityClass(Enum):
    ASYMPTOTICALLY_STABLE = "stable"
    SADDLE = "saddle"
    REPELLING = "repelling"
    NON_HYPERBOLIC = "non-hyperbolic"


def classify(trace: float, det: float, tol: float = 1e-9) -> StabilityClass:
    """Stability from the trace and determinant of a 2x2 monodromy matrix.

    Asymptotically stable iff |trace| - 1 < det < 1 with margin > tol
    (the stability triangle); a multiplier within tol of the unit circle
    is reported as non-hyperbolic rather than guessed.
    """
    disc = trace * trace - 4.0 * det
    if disc >= 0.0:
        r = np.sqrt(disc)
        mags = [abs((trace + r) / 2.0), abs((trace - r) / 2.0)]
    else:
        mags = [np.sqrt(det)] * 2
    if min(abs(m - 1.0) for m in mags) <= tol:
        return StabilityClass.NON_HYPERBOLIC
    inside = sum(m < 1.0 for m in mags)
    if inside == 2:
        return StabilityClass.ASYMPTOTICALLY_STABLE
    if inside == 0:
        return StabilityClass.REPELLING
    return StabilityClass.SADDLE


def monodromy(m, orbit) -> np.ndarray:
    """Ordered product of Jacobians along a periodic orbit
    (Df at the last point times ... times Df at the first)."""
    J = np.eye(2)
    for z in orbit:
        J = m.jacobian(np.asarray(z, dtype=float)) @ J
    return J


@dataclass
class SrSolution:
    """One single-round periodic solution.

    strip_ok records whether every orbit point lies in the region where
    its defining piece applies; when False the points describe a branch
    solution of the composed pieces, not an orbit of the full map (the
    small-k saddle branches cross the blend strip).
    """

    k: int
    m: int
    points: np.ndarray          # (k + m, 2), cycle order
    trace: float
    det: float
    stability: StabilityClass
    branch: str = ""            # "stable-candidate" | "saddle-candidate" | "newton"
    strip_ok: bool = True

    @property
    def period(self) -> int:
        return self.k + self.m

    def verify_cycle(self, map_, tol: float = 1e-9) -> float:
        """Largest gap when re-evaluating the cycle; raises if above tol."""
        worst = 0.0
        n = len(self.points)
        for i in range(n):
            img = map_.eval(self.points[i])
            nxt = self.points[(i + 1) % n]
            worst = max(worst, float(np.hypot(*(img - nxt))))
        if worst > tol:
            raise DomainError(f"orbit does not close: gap {worst:.3e}")
        return worst

    def csv_row(self):
        x0, y0 = self.points[0]
        return [self.k, self.m, self.branch, f"{x0:.17g}", f"{y0:.17g}",
                f"{self.trace:.17g}", f"{self.det:.17g}", self.stability.value]

    @staticmethod
    def csv_header():
        return ["k", "m", "branch", "x0", "y0", "trace", "det", "class"]


def solutions_to_csv(solutions) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(SrSolution.csv_header())
    for s in solutions:
        w.writerow(s.csv_row())
    return buf.getvalue()


def discriminant(p: GrhtMap) -> float:
    """Discriminant controlling existence of the two limit branches; the
    blend family has no c1, d3, d4 terms so it reduces to (1 - c2)^2."""
    return (1.0 - p.c2) ** 2


def tau_delta_limits(p: GrhtMap):
    """Large-k limits of the branch trace and determinant:
    tau -> 1 - c2 -+ sqrt(D), delta -> -c2."""
    rt = np.sqrt(discriminant(p))
    return 1.0 - p.c2 - rt, 1.0 - p.c2 + rt, -p.c2


@dataclass
class PsiPair:
    """Leading-order offsets of the two branch fixed points.

    The k-th solution sits at y = 1 + psi lam^k + O(lam^2k); phi is the
    matching first-component offset and delta_cap the discriminant.
    """

    psi_minus: float
    psi_plus: float
    phi_minus: float
    phi_plus: float
    delta_cap: float


def psi_pair(p: GrhtMap, k: int = 0) -> PsiPair:
    """psi_-/psi_+ for the analytic family; the orientation-reversing case
    carries an extra (-1)^k factor."""
    delta_cap = discriminant(p)
    rt = np.sqrt(delta_cap)
    sgn = 1.0
    if p.lam * p.sigma < 0.0:
        sgn = (-1.0) ** k
    base = 1.0 - p.c2
    psi_m = sgn * (base - rt) / (2.0 * p.d5)
    psi_p = sgn * (base + rt) / (2.0 * p.d5)
    return PsiPair(psi_minus=psi_m, psi_plus=psi_p,
                   phi_minus=p.c2 * psi_m, phi_plus=p.c2 * psi_p,
                   delta_cap=delta_cap)


def _build_orbit(p: GrhtMap, z_u1, k: int):
    """Orbit [z, U1(z), U0(U1(z)), ..., U0^{k-1}(U1(z))] through the exact
    pieces, plus the closing image and whether every point respects its
    piece's region (z above the strip, the k linear points below it)."""
    z_u1 = np.asarray(z_u1, dtype=float)
    pts = [z_u1]
    ok = bool(z_u1[1] >= p.h1)
    w = p.u1(z_u1)
    for _ in range(k):
        ok = ok and bool(w[1] <= p.h0)
        pts.append(w)
        w = p.u0(w)
    return np.asarray(pts), w, ok


def _composed_monodromy(p: GrhtMap, pts):
    """Monodromy through the exact pieces in orbit order (U1 at the first
    point, U0 at the k linear-region points)."""
    J = p.u1_jacobian(pts[0])
    for z in pts[1:]:
        J = p.u0_jacobian(z) @ J
    return J


def sr_closed_form(p: GrhtMap, k: int, check_regions: bool = True):
    """Both branch solutions of the analytic family for the given k, as a
    (stable-candidate, saddle-candidate) pair; None when the parity rule
    of the orientation-reversing case admits no solution.

    Valid for mu = 0 and a1 = b1 = 0 where the fixed point of U0^k o U1
    satisfies an exact quadratic in u = y - 1:

        sigma^k d5 u^2 + ((lam sigma)^k d1 c2 - 1) u + ((lam sigma)^k d1 - 1) = 0

    With check_regions (default) a branch whose orbit strays into the
    blend strip raises StripCollisionError: the composed form is then not
    an orbit of the full map and the caller should run sr_newton on the
    full composition.  With check_regions=False such branches are returned
    with strip_ok=False.
    """
    if k < 0:
        raise DomainError("k must be >= 0")
    if any(v != 0.0 for v in (p.mu1, p.mu2, p.mu3, p.mu4)) or p.a1 != 0.0 \
            or p.b1 != 0.0:
        raise DomainError("closed form needs mu = 0 and a1 = b1 = 0; "
                          "use sr_newton for the unfolded family")
    ls_k = (p.lam * p.sigma) ** k
    if p.lam * p.sigma < 0.0 and ls_k * p.d1 != 1.0:
        return None  # parity mismatch: no single-round solution at this k
    # quadratic coefficients in u = y - 1
    A = p.sigma ** k * p.d5
    B = ls_k * p.d1 * p.c2 - 1.0
    C = ls_k * p.d1 - 1.0
    disc = B * B - 4.0 * A * C
    if disc < 0.0:
        return None
    rt = np.sqrt(disc)
    roots = sorted([(-B - rt) / (2.0 * A), (-B + rt) / (2.0 * A)], key=abs)
    sols = []
    for u, branch in zip(roots, ("stable-candidate", "saddle-candidate")):
        y = 1.0 + u
        x = (p.lam + p.mu2) ** k * (1.0 + p.c2 * u)
        pts, w, ok = _build_orbit(p, np.array([x, y]), k)
        if not ok and check_regions:
            raise StripCollisionError(
                f"{branch} orbit for k={k} leaves its pieces' regions; "
                "use sr_newton on the full map")
        if np.hypot(*(w - pts[0])) > 1e-9 * max(1.0, abs(x), abs(y)):
            raise ConvergenceError("closed-form orbit failed to close")
        M = monodromy(p, pts) if ok else _composed_monodromy(p, pts)
        tr = float(np.trace(M))
        de = float(np.linalg.det(M))
        sols.append(SrSolution(k=k, m=1, points=pts, trace=tr, det=de,
                               stability=classify(tr, de), branch=branch,
                               strip_ok=ok))
    return tuple(sols)


def compose(m, z, n: int):
    """n-fold composition of the map."""
    w = np.asarray(z, dtype=float)
    for _ in range(n):
        w = m.eval(w)
    return w


def compose_jacobian(m, z, n: int):
    """Value and chained Jacobian of the n-fold composition."""
    w = np.asarray(z, dtype=float)
    J = np.eye(2)
    for _ in range(n):
        J = m.jacobian(w) @ J
        w = m.eval(w)
    return w, J


def sr_newton(m, k: int, m_global: int, guess, tol: float = 1e-11,
              max_iter: int = 50, branch: str = "newton") -> SrSolution:
    """Damped Newton for a fixed point of the (k + m_global)-fold
    composition, seeded at ``guess``; halves the step up to 8 times when
    the residual does not drop."""
    n = k + m_global
    z = np.asarray(guess, dtype=float)
    for _ in range(max_iter):
        w, J = compose_jacobian(m, z, n)
        F = w - z
        res = float(np.hypot(*F))
        if res < tol:
            break
        A = J - np.eye(2)
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        if abs(det) < 1e-300 or not np.isfinite(det):
            raise SingularMatrixError("singular Newton matrix")
        step = np.array([(A[1, 1] * F[0] - A[0, 1] * F[1]) / det,
                         (-A[1, 0] * F[0] + A[0, 0] * F[1]) / det])
        t = 1.0
        for _ in range(8):
            zn = z - t * step
            wn = compose(m, zn, n)
            if float(np.hypot(*(wn - zn))) < res:
                break
            t *= 0.5
        z = z - t * step
    else:
        raise ConvergenceError(
            f"no convergence in {max_iter} iterations (residual {res:.3e})")
    pts = [z]
    w = z
    for _ in range(n - 1):
        w = m.eval(w)
        pts.append(w)
    M = monodromy(m, pts)
    tr = float(np.trace(M))
    de = float(np.linalg.det(M))
    return SrSolution(k=k, m=m_global, points=np.asarray(pts), trace=tr,
                      det=de, stability=classify(tr, de), branch=branch)


def u1_fixed_points(p: GrhtMap):
    """Fixed points of the excursion piece with their stability, from the
    quadratic d5 u^2 + (d1 (1+mu3) c2 - 1) u + (mu1 + d1 (1+mu3) - 1) = 0
    in u = y - 1."""
    d1e = p.d1 * (1.0 + p.mu3)
    B = d1e * p.c2 - 1.0
    C = p.mu1 + d1e - 1.0
    disc = B * B - 4.0 * p.d5 * C
    if disc < 0.0:
        return []
    rt = np.sqrt(disc)
    out = []
    for u in ((-B - rt) / (2.0 * p.d5), (-B + rt) / (2.0 * p.d5)):
        z = np.array([1.0 + p.c2 * u, 1.0 + u])
        J = p.u1_jacobian(z)
        out.append((z, classify(float(np.trace(J)), float(np.linalg.det(J)))))
    out.sort(key=lambda t: t[0][1])
    return out


def grht_invariant_check(p: GrhtMap, shift_k: int) -> float:
    """Invariance of d1 x*/y* under re-anchoring the excursion map.

    Composing the excursion with shift_k linear-region steps turns the
    anchoring homoclinic point (0, 1) into (0, 1/sigma^shift_k) and rescales
    the cross coefficient; the combination d1 x*/y* must be unchanged
    whenever (lam sigma)^shift_k = 1.  Returns the absolute defect, computed
    from the chained analytic Jacobians.
    """
    if shift_k < 0:
        raise DomainError("shift_k must be >= 0")
    y_shift = 1.0 / p.sigma ** shift_k
    z = np.array([0.0, y_shift])
    J = np.eye(2)
    w = z
    for _ in range(shift_k):
        J = p.u0_jacobian(w) @ J
        w = p.u0(w)
    J = p.u1_jacobian(w) @ J
    d1_shift = J[1, 0]
    base = p.d1 * (1.0 + p.mu3)
    return abs(d1_shift / y_shift - base)
