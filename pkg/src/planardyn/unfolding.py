"""Saddle-node and period-doubling sequences along parameter rays from the
degenerate tangency point, the analytic bifurcation formulas of the
resonance-free family, and asymptotic scaling-law fits.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import (ContinuationError, ConvergenceError, DomainError,
                     StripCollisionError)
from .maps import GrhtMap
from .orbits import SrSolution, classify, monodromy

__all__ = [
    "Delta0Params", "delta0", "UnfoldingRay", "BifurcationKind",
    "BifurcationEvent", "ScalingModel", "ScalingFit",
    "analytic_sn_pd_mu1", "scan_ray", "stability_window", "scaling_fit",
    "overlap_count", "overlap_region_vertex_count", "events_to_csv",
]


@dataclass(frozen=True)
class Delta0Params:
    """Coefficients entering the branch discriminant at the degenerate
    point; chi is the sign of the cross coefficient, chi_eig the sign of
    the eigenvalue product, alpha the stable eigenvalue magnitude."""

    c2_0: float
    d5_0: float
    d4_0: float = 0.0
    d3_0: float = 0.0
    c1_0: float = 0.0
    chi: int = 1
    chi_eig: int = 1
    alpha: float = 0.8

    def __post_init__(self):
        if self.d5_0 == 0.0:
            raise DomainError("d5_0 must be nonzero")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie in (0, 1)")
        if self.chi not in (1, -1) or self.chi_eig not in (1, -1):
            raise DomainError("chi and chi_eig must be +-1")


def delta0(p: Delta0Params) -> float:
    """Discriminant (1 - c2 - chi d4)^2 - 4 d5 (d3 + chi c1)."""
    return (1.0 - p.c2_0 - p.chi * p.d4_0) ** 2 \
        - 4.0 * p.d5_0 * (p.d3_0 + p.chi * p.c1_0)


@dataclass(frozen=True)
class UnfoldingRay:
    """Unit direction in (mu1, mu2, mu3, mu4) space."""

    v: tuple
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if v.shape != (4,):
            raise DomainError("ray direction must be a 4-vector")
        n = np.linalg.norm(v)
        if n == 0.0:
            raise DomainError("ray direction must be nonzero")
        object.__setattr__(self, "v", tuple(v / n))

    @classmethod
    def axis(cls, name: str) -> "UnfoldingRay":
        idx = {"mu1": 0, "mu2": 1, "mu3": 2, "mu4": 3}[name]
        v = [0.0] * 4
        v[idx] = 1.0
        return cls(v=tuple(v), label=name)

    def apply(self, p: GrhtMap, eps: float) -> GrhtMap:
        v = self.v
        return replace(p, mu1=p.mu1 + eps * v[0], mu2=p.mu2 + eps * v[1],
                       mu3=p.mu3 + eps * v[2], mu4=p.mu4 + eps * v[3])


class BifurcationKind(Enum):
    SADDLE_NODE = "SN"
    PERIOD_DOUBLING = "PD"


@dataclass
class BifurcationEvent:
    kind: BifurcationKind
    k: int
    epsilon: float
    witness: SrSolution

    def check(self, tol: float = 1e-8) -> float:
        s = 1.0 if self.kind is BifurcationKind.SADDLE_NODE else -1.0
        r = abs(self.witness.det - s * self.witness.trace + 1.0)
        if r > tol:
            raise DomainError(f"event condition violated by {r:.3e}")
        return r


def events_to_csv(events) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["k", "kind", "epsilon", "x", "y", "trace", "det"])
    for e in events:
        x0, y0 = e.witness.points[0]
        w.writerow([e.k, e.kind.value, f"{e.epsilon:.17g}", f"{x0:.17g}",
                    f"{y0:.17g}", f"{e.witness.trace:.17g}",
                    f"{e.witness.det:.17g}"])
    return buf.getvalue()


def analytic_sn_pd_mu1(p: GrhtMap, k: int):
    """Exact mu1 values of the saddle-node and period-doubling of the
    period-(k+1) branch at the map's (mu2, mu3), valid when the resonance
    terms vanish (a1 = b1 = mu4 = 0).

    With Lam = lam + mu2 and u = y - 1, the branch fixed point solves

        sigma^k [mu1 + d1 (1+mu3) Lam^k (1 + c2 u) + d5 u^2] = 1 + u

    and the multiplier conditions det -+ trace + 1 = 0 pin u; substituting
    back yields mu1 in closed form.
    """
    if p.a1 != 0.0 or p.b1 != 0.0 or p.mu4 != 0.0:
        raise DomainError("analytic formulas need a1 = b1 = mu4 = 0")
    lam_eff = p.lam + p.mu2
    sk = p.sigma ** k
    lk = lam_eff ** k
    d1e = p.d1 * (1.0 + p.mu3)
    delta_branch = -sk * lk * p.c2 * d1e  # det of the composed Jacobian

    def mu1_at(u):
        return (1.0 + u) / sk - d1e * lk * (1.0 + p.c2 * u) - p.d5 * u * u

    u_sn = (1.0 + delta_branch) / (2.0 * sk * p.d5)
    u_pd = -u_sn
    return mu1_at(u_sn), mu1_at(u_pd)


def _composed(p: GrhtMap, k: int, z):
    """Value and Jacobian of U0^k o U1 through the exact pieces."""
    J = p.u1_jacobian(z)
    w = p.u1(z)
    for _ in range(k):
        J = p.u0_jacobian(w) @ J
        w = p.u0(w)
    return w, J


def _branch_state(p: GrhtMap, k: int, z0, tol=1e-13, max_iter=80):
    z = np.asarray(z0, dtype=float)
    for _ in range(max_iter):
        w, J = _composed(p, k, z)
        F = w - z
        if np.hypot(*F) < tol:
            break
        A = J - np.eye(2)
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        if abs(det) < 1e-300 or not np.isfinite(det):
            return None
        z = z - np.array([(A[1, 1] * F[0] - A[0, 1] * F[1]) / det,
                          (-A[1, 0] * F[0] + A[0, 0] * F[1]) / det])
        if not np.isfinite(z).all() or np.abs(z).max() > 1e6:
            return None
    w, J = _composed(p, k, z)
    if np.hypot(*(w - z)) > 1e-9:
        return None
    tr = float(J[0, 0] + J[1, 1])
    de = float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])
    return z, tr, de


def _witness(p: GrhtMap, k: int, z) -> SrSolution:
    """Branch solution of the composed pieces at the event, flagged with
    whether its orbit also respects the piecewise regions (for larger k it
    does; close to the tangency point small-k orbits may cross the strip,
    matching the analytic formulas' own domain of validity)."""
    pts = [np.asarray(z, dtype=float)]
    ok = bool(z[1] >= p.h1)
    w = p.u1(z)
    for _ in range(k):
        ok = ok and bool(w[1] <= p.h0)
        pts.append(w)
        w = p.u0(w)
    J = p.u1_jacobian(pts[0])
    for q in pts[1:]:
        J = p.u0_jacobian(q) @ J
    tr = float(J[0, 0] + J[1, 1])
    de = float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])
    return SrSolution(k=k, m=1, points=np.asarray(pts), trace=tr, det=de,
                      stability=classify(tr, de), branch="newton",
                      strip_ok=ok)


def _polish_event(p_base: GrhtMap, ray: UnfoldingRay, k: int, kind, w0,
                  tol=3e-15, max_iter=80):
    """Newton on the extended system (fixed point, multiplier condition)
    in the unknowns (x, y, eps)."""
    sgn = 1.0 if kind is BifurcationKind.SADDLE_NODE else -1.0

    def eqs(w):
        z = w[:2]
        p = ray.apply(p_base, w[2])
        val, J = _composed(p, k, z)
        tr = J[0, 0] + J[1, 1]
        de = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        return np.array([val[0] - z[0], val[1] - z[1],
                         de - sgn * tr + 1.0])

    w = np.asarray(w0, dtype=float)
    scale = max(abs(w0[2]), 1e-12)
    for _ in range(max_iter):
        F = eqs(w)
        if np.max(np.abs(F)) < tol:
            break
        Jm = np.zeros((3, 3))
        for j in range(3):
            h = 1e-7 * max(1e-3 if j < 2 else scale, abs(w[j]))
            wp = w.copy()
            wp[j] += h
            wm = w.copy()
            wm[j] -= h
            Jm[:, j] = (eqs(wp) - eqs(wm)) / (2.0 * h)
        try:
            w = w - np.linalg.solve(Jm, F)
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular extended system at the event")
    F = eqs(w)
    if np.max(np.abs(F)) > 1e-10:
        raise ConvergenceError(
            f"event polish stalled (residual {np.max(np.abs(F)):.3e})")
    return w


def scan_ray(p_base: GrhtMap, ray: UnfoldingRay, k: int, bracket,
             n_steps: int = 64, on_strip: str = "mark"):
    """March the period-(k+1) branch along mu = eps * v through the
    bracket and return the located bifurcations.

    The branch is continued with Newton (previous solution as predictor);
    a sign change of det + trace + 1 flags a period-doubling, loss of the
    branch paired with det - trace + 1 approaching zero flags a
    saddle-node fold.  Each detection is polished on the extended system
    (fixed point + multiplier condition), giving the event to machine
    accuracy.  A witness orbit that crosses the blend strip is flagged
    (strip_ok=False) or, with on_strip="error", raises ContinuationError.
    """
    eps_lo, eps_hi = float(bracket[0]), float(bracket[1])
    if not eps_lo <= 0.0 <= eps_hi:
        raise DomainError("bracket must contain eps = 0")
    start = _branch_state(ray.apply(p_base, 0.0), k,
                          ((p_base.lam + p_base.mu2) ** k, 1.0))
    if start is None:
        raise ContinuationError("no branch solution at eps = 0", 0.0)
    events = []
    for end in (eps_hi, eps_lo):
        if end == 0.0:
            continue
        eps_grid = np.linspace(0.0, end, n_steps + 1)
        z, tr, de = start
        s_pd_prev = de + tr + 1.0
        s_sn_prev = de - tr + 1.0
        eps_prev = 0.0
        found = None
        for eps in eps_grid[1:]:
            state = _branch_state(ray.apply(p_base, eps), k, z)
            if state is None:
                # fold: the branch vanished between eps_prev and eps
                seed_eps = eps_prev + 0.5 * (eps - eps_prev)
                found = (BifurcationKind.SADDLE_NODE,
                         np.array([z[0], z[1], seed_eps]))
                break
            z_new, tr_new, de_new = state
            s_pd = de_new + tr_new + 1.0
            s_sn = de_new - tr_new + 1.0
            if s_pd * s_pd_prev < 0.0:
                t = s_pd_prev / (s_pd_prev - s_pd)
                seed_eps = eps_prev + t * (eps - eps_prev)
                found = (BifurcationKind.PERIOD_DOUBLING,
                         np.array([z_new[0], z_new[1], seed_eps]))
                break
            if s_sn * s_sn_prev < 0.0:
                # passed through the fold onto the other sheet
                t = s_sn_prev / (s_sn_prev - s_sn)
                seed_eps = eps_prev + t * (eps - eps_prev)
                found = (BifurcationKind.SADDLE_NODE,
                         np.array([z_new[0], z_new[1], seed_eps]))
                break
            z, tr, de = z_new, tr_new, de_new
            s_pd_prev, s_sn_prev, eps_prev = s_pd, s_sn, eps
        if found is None:
            continue
        kind, w0 = found
        w = _polish_event(p_base, ray, k, kind, w0)
        p_event = ray.apply(p_base, w[2])
        witness = _witness(p_event, k, w[:2])
        if on_strip == "error" and not witness.strip_ok:
            raise ContinuationError(
                f"k={k} witness orbit crosses the blend strip", eps_prev)
        events.append(BifurcationEvent(kind=kind, k=k, epsilon=float(w[2]),
                                       witness=witness))
    events.sort(key=lambda e: e.epsilon)
    return events


def stability_window(p_base: GrhtMap, ray: UnfoldingRay, k: int, bracket,
                     n_steps: int = 64):
    """Maximal interval (eps_minus, eps_plus) around 0 on which the
    period-(k+1) branch stays asymptotically stable, bounded by the two
    bifurcations found on the ray."""
    events = scan_ray(p_base, ray, k, bracket, n_steps=n_steps)
    eps_minus = max((e.epsilon for e in events if e.epsilon < 0.0),
                    default=float(bracket[0]))
    eps_plus = min((e.epsilon for e in events if e.epsilon > 0.0),
                   default=float(bracket[1]))
    return eps_minus, eps_plus


class ScalingModel(Enum):
    ALPHA_2K = "alpha2k"
    ALPHA_K_OVER_K = "alphak-over-k"
    ALPHA_K = "alphak"
    ONE_OVER_K = "one-over-k"

    def evaluate(self, k: int, alpha: float) -> float:
        if self is ScalingModel.ALPHA_2K:
            return alpha ** (2 * k)
        if self is ScalingModel.ALPHA_K_OVER_K:
            return alpha ** k / k
        if self is ScalingModel.ALPHA_K:
            return alpha ** k
        return 1.0 / k


@dataclass
class ScalingFit:
    model: ScalingModel
    constant: float              # last raw ratio
    ratios: list                 # (k, epsilon, ratio) triples
    aitken: float                # Delta^2-extrapolated limit estimate

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["k", "epsilon", "ratio", "model"])
        for k, eps, ratio in self.ratios:
            w.writerow([k, f"{eps:.17g}", f"{ratio:.17g}", self.model.value])
        return buf.getvalue()


def _aitken(seq):
    seq = np.asarray(seq, dtype=float)
    if len(seq) < 3:
        return float(seq[-1])
    x0, x1, x2 = seq[-3], seq[-2], seq[-1]
    d = (x2 - x1) - (x1 - x0)
    if d == 0.0:
        return float(x2)
    return float(x2 - (x2 - x1) ** 2 / d)


def scaling_fit(eps_by_k, model, alpha: float) -> ScalingFit:
    """Ratios eps_k / model(k) and the limiting-constant estimates.

    ``eps_by_k`` maps k -> epsilon (dict or (k, eps) pairs); at least four
    consecutive k values are required.  The raw constant is the last
    ratio; an Aitken Delta^2 extrapolation over the ratio sequence is
    reported alongside (the corrections decay slowly, like k alpha^k).
    """
    if isinstance(model, str):
        model = ScalingModel(model)
    items = sorted(eps_by_k.items() if isinstance(eps_by_k, dict)
                   else eps_by_k)
    if len(items) < 4:
        raise DomainError("need at least 4 k values")
    ks = [k for k, _ in items]
    if any(b - a != 1 for a, b in zip(ks, ks[1:])):
        raise DomainError("k values must be consecutive")
    ratios = [(k, eps, eps / model.evaluate(k, alpha)) for k, eps in items]
    seq = [r for _, _, r in ratios]
    return ScalingFit(model=model, constant=float(seq[-1]), ratios=ratios,
                      aitken=_aitken(seq))


def _analytic_mu1_curves(p: GrhtMap, k: int, mu2):
    """Vectorized SN/PD mu1 curves over a mu2 array (resonance-free family)."""
    mu2 = np.asarray(mu2, dtype=float)
    lam_eff = p.lam + mu2
    sk = p.sigma ** k
    lk = lam_eff ** k
    d1e = p.d1 * (1.0 + p.mu3)
    delta_branch = -sk * lk * p.c2 * d1e

    def mu1_at(u):
        return (1.0 + u) / sk - d1e * lk * (1.0 + p.c2 * u) - p.d5 * u * u

    u_sn = (1.0 + delta_branch) / (2.0 * sk * p.d5)
    return mu1_at(u_sn), mu1_at(-u_sn)


def overlap_count(p_base: GrhtMap, mu1_range, mu2_range, k_set,
                  resolution: int = 200):
    """Grid over the (mu1, mu2) plane counting how many k in ``k_set``
    have a stable period-(k+1) branch at each cell (mu1 between the
    period-doubling and saddle-node curves at that mu2)."""
    if p_base.a1 != 0.0 or p_base.b1 != 0.0 or p_base.mu4 != 0.0:
        raise DomainError("overlap_count needs the resonance-free family")
    mu1s = np.linspace(mu1_range[0], mu1_range[1], resolution)
    mu2s = np.linspace(mu2_range[0], mu2_range[1], resolution)
    counts = np.zeros((resolution, resolution), dtype=np.int32)
    for k in k_set:
        sn, pd = _analytic_mu1_curves(p_base, k, mu2s)
        inside = (mu1s[:, None] > pd[None, :]) & (mu1s[:, None] < sn[None, :])
        counts += inside.astype(np.int32)
    return counts, mu1s, mu2s


def overlap_region_vertex_count(p_base: GrhtMap, mu2_range, k_set,
                                resolution: int = 2000):
    """Vertex count of the region where every k in k_set is stable.

    The region is bounded above by the lower envelope of the saddle-node
    curves and below by the upper envelope of the period-doubling curves;
    its polygon vertices are envelope switch points plus the two closure
    points where the envelopes cross.
    """
    mu2s = np.linspace(mu2_range[0], mu2_range[1], resolution)
    sn_all, pd_all = [], []
    for k in k_set:
        sn, pd = _analytic_mu1_curves(p_base, k, mu2s)
        sn_all.append(sn)
        pd_all.append(pd)
    sn_all = np.stack(sn_all)
    pd_all = np.stack(pd_all)
    upper = sn_all.min(axis=0)
    lower = pd_all.max(axis=0)
    hold = upper > lower
    if not hold.any():
        return 0
    idx = np.where(hold)[0]
    seg = slice(idx[0], idx[-1] + 1)
    runs_upper = 1 + int((np.diff(sn_all.argmin(axis=0)[seg]) != 0).sum())
    runs_lower = 1 + int((np.diff(pd_all.argmax(axis=0)[seg]) != 0).sum())
    # edges: envelope pieces; vertices: switch points + two closure points
    return runs_upper + runs_lower
