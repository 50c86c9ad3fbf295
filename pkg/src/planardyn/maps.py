"""Concrete planar map families: the piecewise-blend tangency family, the
generalised Henon map, and a quadratic fold fixture.

All evaluation routines accept points as arrays of shape (..., 2) and
broadcast over leading axes; Jacobians come back as (..., 2, 2).  Scalar
points (shape (2,)) are validated for finiteness, bulk arrays are not (bulk
callers such as the basin iterator manage their own masks).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import (DegenerateInversionError, DomainError,
                     NonInvertiblePointError, ParameterError)

__all__ = [
    "GrhtMap", "HenonMap", "QuadFixtureMap", "PreimageSet",
    "blend_weight", "neutral_saddle_alpha",
    "params_to_text", "params_from_text",
]


def _as_points(z):
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != 2:
        raise DomainError(f"expected points of shape (..., 2), got {z.shape}")
    if z.ndim == 1 and not np.isfinite(z).all():
        raise DomainError(f"non-finite input point {z}")
    return z


def blend_weight(y, h0: float, h1: float):
    """Cubic blend r(y) between the two map pieces.

    r(h0) = 0, r(h1) = 1, r'(h0) = r'(h1) = 0, monotone on [h0, h1];
    clamped to {0, 1} outside the strip.
    """
    if not h0 < h1:
        raise DomainError("blend_weight requires h0 < h1")
    y = np.asarray(y, dtype=float)
    z = np.clip((y - h0) / (h1 - h0), 0.0, 1.0)
    return 3.0 * z * z - 2.0 * z * z * z


def _blend_weight_deriv(y, h0, h1):
    y = np.asarray(y, dtype=float)
    z = (y - h0) / (h1 - h0)
    inside = (z > 0.0) & (z < 1.0)
    z = np.clip(z, 0.0, 1.0)
    return np.where(inside, (6.0 * z - 6.0 * z * z) / (h1 - h0), 0.0)


@dataclass
class PreimageSet:
    """Preimages of one target point.

    points   -- list of (2,) arrays, each mapping forward onto the target
    complete -- True when the strip search ran at (or above) the documented
                64x64 seed density, so no strip root should have been missed
    tags     -- which inverse branch produced each point ("u0", "u1", "strip")
    """

    points: list
    complete: bool
    tags: list = field(default_factory=list)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class GrhtMap:
    """Piecewise-smooth C^1 planar family with a saddle at the origin.

    The map applies U0 below the strip, U1 above it, and a convex cubic
    blend in between:

        U0(x, y) = ((lam + mu2) x (1 + (a1 + mu4) x y),  sigma y (1 + b1 x y))
        U1(x, y) = (1 + c2 (y - 1),  mu1 + d1 (1 + mu3) x + d5 (y - 1)^2)

    with strip edges h0 = (2|lam| + 1)/3 and h1 = (|lam| + 2)/3 computed
    from the base ``lam`` (the unfolding keeps the strip fixed).  b1
    defaults to -a1; pass it explicitly to break that pairing.
    """

    lam: float
    sigma: float
    c2: float
    d1: float
    d5: float
    a1: float = 0.0
    b1: float | None = None
    mu1: float = 0.0
    mu2: float = 0.0
    mu3: float = 0.0
    mu4: float = 0.0

    def __post_init__(self):
        if self.b1 is None:
            object.__setattr__(self, "b1", -self.a1)
        vals = [self.lam, self.sigma, self.c2, self.d1, self.d5, self.a1,
                self.b1, self.mu1, self.mu2, self.mu3, self.mu4]
        if not all(np.isfinite(v) for v in vals):
            raise ParameterError("non-finite map parameter")
        if not 0.0 < abs(self.lam) < 1.0:
            raise ParameterError(f"need 0 < |lam| < 1, got lam={self.lam}")
        if not abs(self.sigma) > 1.0:
            raise ParameterError(f"need |sigma| > 1, got sigma={self.sigma}")
        if self.d5 == 0.0:
            raise ParameterError("d5 must be nonzero (quadratic tangency)")

    @property
    def h0(self) -> float:
        return (2.0 * abs(self.lam) + 1.0) / 3.0

    @property
    def h1(self) -> float:
        return (abs(self.lam) + 2.0) / 3.0

    # -- pieces ------------------------------------------------------------

    def u0(self, z):
        """Linear-region piece (exact, regardless of the region z is in)."""
        z = _as_points(z)
        x, y = z[..., 0], z[..., 1]
        ae = self.a1 + self.mu4
        lame = self.lam + self.mu2
        return np.stack([lame * x * (1.0 + ae * x * y),
                         self.sigma * y * (1.0 + self.b1 * x * y)], axis=-1)

    def u0_jacobian(self, z):
        z = _as_points(z)
        x, y = z[..., 0], z[..., 1]
        ae = self.a1 + self.mu4
        lame = self.lam + self.mu2
        j11 = lame * (1.0 + 2.0 * ae * x * y)
        j12 = lame * ae * x * x
        j21 = self.sigma * self.b1 * y * y
        j22 = self.sigma * (1.0 + 2.0 * self.b1 * x * y)
        return np.stack([np.stack([j11, j12], axis=-1),
                         np.stack([j21, j22], axis=-1)], axis=-2)

    def u1(self, z):
        """Excursion piece (exact, regardless of the region z is in)."""
        z = _as_points(z)
        x, y = z[..., 0], z[..., 1]
        return np.stack([1.0 + self.c2 * (y - 1.0),
                         self.mu1 + self.d1 * (1.0 + self.mu3) * x
                         + self.d5 * (y - 1.0) ** 2], axis=-1)

    def u1_jacobian(self, z):
        z = _as_points(z)
        x, y = z[..., 0], z[..., 1]
        zero = np.zeros_like(x)
        j12 = np.full_like(x, self.c2)
        j21 = np.full_like(x, self.d1 * (1.0 + self.mu3))
        j22 = 2.0 * self.d5 * (y - 1.0)
        return np.stack([np.stack([zero, j12], axis=-1),
                         np.stack([j21, j22], axis=-1)], axis=-2)

    # -- the full map ------------------------------------------------------

    def eval(self, z):
        """Apply the piecewise map: U0 for y <= h0, U1 for y >= h1,
        convex blend in the strip."""
        z = _as_points(z)
        y = z[..., 1]
        a = self.u0(z)
        b = self.u1(z)
        w = blend_weight(y, self.h0, self.h1)[..., None]
        return (1.0 - w) * a + w * b

    __call__ = eval

    def jacobian(self, z):
        """Analytic Jacobian, continuous across both strip edges (C^1)."""
        z = _as_points(z)
        y = z[..., 1]
        j0 = self.u0_jacobian(z)
        j1 = self.u1_jacobian(z)
        w = blend_weight(y, self.h0, self.h1)
        jac = (1.0 - w)[..., None, None] * j0 + w[..., None, None] * j1
        # product rule: the weight itself depends on y
        wp = _blend_weight_deriv(y, self.h0, self.h1)
        diff = self.u1(z) - self.u0(z)
        jac[..., 0, 1] += wp * diff[..., 0]
        jac[..., 1, 1] += wp * diff[..., 1]
        return jac

    def region(self, z):
        """0 below the strip, 1 inside, 2 above."""
        y = _as_points(z)[..., 1]
        return np.where(y <= self.h0, 0, np.where(y >= self.h1, 2, 1))

    def preimages(self, target, search_window=(-4.0, 4.0, -4.0, 4.0),
                  grid=64, tol=1e-10) -> PreimageSet:
        """All preimages of ``target`` found in ``search_window``.

        The U0 and U1 branches are inverted analytically whenever their
        formulas permit; roots inside the blend strip are hunted with
        Newton from a seeded lattice whose x-density is ``grid``.
        ``complete`` is True only when grid >= 64 (the documented density
        bound) and the strip search actually ran.
        """
        target = _as_points(np.asarray(target, dtype=float))
        return self.preimages_batch(target[None, :], search_window, grid,
                                    tol)[0]

    def preimages_batch(self, targets, search_window=(-4.0, 4.0, -4.0, 4.0),
                        grid=64, tol=1e-10):
        """Preimage sets for many targets at once (vectorized analytic
        branches, one pooled Newton strip search).  Returns a list of
        PreimageSet in target order.  grid=0 skips the strip search
        entirely (sets complete=False)."""
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        ntgt = len(targets)
        analytic_u0 = (self.a1 + self.mu4 == 0.0) and self.b1 == 0.0
        complete = grid >= 64
        sets = [PreimageSet(points=[], complete=complete, tags=[])
                for _ in range(ntgt)]

        def accept(i, pt, tag):
            if not np.isfinite(pt).all():
                return
            img = self.eval(pt)
            if np.hypot(img[0] - targets[i, 0], img[1] - targets[i, 1]) > tol:
                return
            for q in sets[i].points:
                if np.hypot(pt[0] - q[0], pt[1] - q[1]) < 1e-8:
                    return
            sets[i].points.append(np.asarray(pt, dtype=float))
            sets[i].tags.append(tag)

        if analytic_u0:
            lame = self.lam + self.mu2
            cand = np.stack([targets[:, 0] / lame,
                             targets[:, 1] / self.sigma], axis=-1)
            for i in range(ntgt):
                if cand[i, 1] <= self.h0:
                    accept(i, cand[i], "u0")
        if self.c2 == 0.0 or self.d1 == 0.0 or (1.0 + self.mu3) == 0.0:
            raise DegenerateInversionError(
                "U1 branch needs c2 != 0 and d1 (1 + mu3) != 0")
        ypre = 1.0 + (targets[:, 0] - 1.0) / self.c2
        xpre = (targets[:, 1] - self.mu1 - self.d5 * (ypre - 1.0) ** 2) \
            / (self.d1 * (1.0 + self.mu3))
        for i in range(ntgt):
            if ypre[i] >= self.h1:
                accept(i, np.array([xpre[i], ypre[i]]), "u1")

        x0, x1, y0, y1 = search_window
        ylo = y0 if not analytic_u0 else max(self.h0, y0)
        yhi = y1 if not analytic_u0 else min(self.h1, y1)
        if grid >= 2 and yhi > ylo:
            xs = np.linspace(x0, x1, grid)
            ys = np.linspace(ylo, yhi, max(4, grid // 4) if analytic_u0
                             else grid // 2)
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            seeds = np.stack([X.ravel(), Y.ravel()], axis=-1)
            nseed = len(seeds)
            z = np.broadcast_to(seeds[None, :, :], (ntgt, nseed, 2)) \
                .reshape(-1, 2).copy()
            tgt = np.repeat(targets, nseed, axis=0)
            z = self._newton_batch(z, tgt)
            res = self.eval(z) - tgt
            good = np.isfinite(z).all(axis=1)
            good &= np.hypot(res[:, 0], res[:, 1]) <= tol
            for flat in np.nonzero(good)[0]:
                i = flat // nseed
                pt = z[flat]
                region = "strip" if self.h0 < pt[1] < self.h1 else "u0"
                if region == "u0" and analytic_u0:
                    continue
                accept(i, pt, region)
        else:
            for s in sets:
                s.complete = False
        return sets

    def _newton_batch(self, z, targets, iters=30):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            for it in range(iters):
                F = self.eval(z) - targets
                if it % 6 == 5:
                    live = np.abs(F[np.isfinite(F).all(axis=1)])
                    if live.size == 0 or live.max() < 1e-14:
                        break
                J = self.jacobian(z)
                det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
                sx = (J[:, 1, 1] * F[:, 0] - J[:, 0, 1] * F[:, 1]) / det
                sy = (-J[:, 1, 0] * F[:, 0] + J[:, 0, 0] * F[:, 1]) / det
                z = z - np.stack([sx, sy], axis=-1)
                z = np.where(np.abs(z) > 1e6, np.nan, z)
        return z

@dataclass(frozen=True)
class HenonMap:
    """Generalised Henon map (x, y) -> (y, alpha - beta x - y^2 + R x y + S y^3)."""

    alpha: float
    beta: float
    R: float
    S: float

    def __post_init__(self):
        if not all(np.isfinite(v) for v in (self.alpha, self.beta, self.R, self.S)):
            raise ParameterError("non-finite map parameter")

    def eval(self, z):
        z = _as_points(z)
        x, y = z[..., 0], z[..., 1]
        return np.stack([y, self.alpha - self.beta * x - y * y
                         + self.R * x * y + self.S * y ** 3], axis=-1)

    __call__ = eval

    def jacobian(self, z):
        z = _as_points(z)
        x, y = z[..., 0], z[..., 1]
        zero = np.zeros_like(x)
        one = np.ones_like(x)
        j21 = -self.beta + self.R * y
        j22 = -2.0 * y + self.R * x + 3.0 * self.S * y * y
        return np.stack([np.stack([zero, one], axis=-1),
                         np.stack([j21, j22], axis=-1)], axis=-2)

    def inverse(self, z):
        """Unique inverse branch; undefined on the line x' = beta / R."""
        if self.R == 0.0:
            raise DegenerateInversionError("inverse needs R != 0")
        z = _as_points(z)
        xp, yp = z[..., 0], z[..., 1]
        den = self.R * xp - self.beta
        if z.ndim == 1 and den == 0.0:
            raise NonInvertiblePointError(
                f"inverse undefined at x' = beta/R = {self.beta / self.R}")
        with np.errstate(divide="ignore", invalid="ignore"):
            x = (yp - self.alpha + xp * xp - self.S * xp ** 3) / den
        return np.stack([x, xp], axis=-1)

    def preimages(self, target, search_window=None, grid=None,
                  tol=1e-10) -> PreimageSet:
        """Preimage set through the single analytic inverse branch."""
        target = _as_points(np.asarray(target, dtype=float))
        try:
            pre = self.inverse(target)
        except NonInvertiblePointError:
            return PreimageSet(points=[], complete=True, tags=[])
        img = self.eval(pre)
        ok = np.isfinite(pre).all() and np.hypot(*(img - target)) <= tol
        return PreimageSet(points=[pre] if ok else [], complete=True,
                           tags=["inverse"] if ok else [])

    def fixed_points(self):
        """Real fixed points (x = y on the cubic S y^3 + (R-1) y^2 - (beta+1) y + alpha)."""
        coeffs = [self.S, self.R - 1.0, -(self.beta + 1.0), self.alpha]
        if self.S == 0.0:
            coeffs = coeffs[1:]
        roots = np.roots(coeffs)
        out = []
        for r in roots:
            if abs(r.imag) < 1e-10:
                y = float(r.real)
                out.append(np.array([y, y]))
        return out


def neutral_saddle_alpha(R: float, S: float, beta: float,
                         orientation: int) -> float:
    """alpha at which the generalised Henon map has a fixed point with
    det Df = +1 (orientation=+1) or det Df = -1 (orientation=-1).

    The candidate fixed point sits at y = (beta - orientation) / R.
    """
    if R == 0.0:
        raise DomainError("neutral_saddle_alpha needs R != 0")
    if orientation not in (1, -1):
        raise DomainError("orientation must be +1 or -1")
    if orientation == 1:
        b = beta - 1.0
        return (-S * b ** 3 + b * R * (b + 2.0 * R)) / R ** 3
    b = beta + 1.0
    return (-S * b ** 3 + R * b * b) / R ** 3


@dataclass(frozen=True)
class QuadFixtureMap:
    """Quadratic fold fixture (x, y) -> (a x + y, x^2 + b).

    Every point with y' > b has exactly two preimages, points with
    y' < b have none; the critical line is y' = b.
    """

    a: float = 0.5
    b: float = -2.0

    def eval(self, z):
        z = _as_points(z)
        x, y = z[..., 0], z[..., 1]
        return np.stack([self.a * x + y, x * x + self.b], axis=-1)

    __call__ = eval

    def jacobian(self, z):
        z = _as_points(z)
        x = z[..., 0]
        const_a = np.full_like(x, self.a)
        one = np.ones_like(x)
        zero = np.zeros_like(x)
        return np.stack([np.stack([const_a, one], axis=-1),
                         np.stack([2.0 * x, zero], axis=-1)], axis=-2)

    def preimages(self, target, search_window=None, grid=None,
                  tol=1e-10) -> PreimageSet:
        target = _as_points(np.asarray(target, dtype=float))
        xp, yp = target
        disc = yp - self.b
        pts, tags = [], []
        if disc > 0.0:
            for sgn in (1.0, -1.0):
                x = sgn * np.sqrt(disc)
                pts.append(np.array([x, xp - self.a * x]))
                tags.append("fold+" if sgn > 0 else "fold-")
        elif disc == 0.0:
            pts.append(np.array([0.0, xp]))
            tags.append("fold0")
        return PreimageSet(points=pts, complete=True, tags=tags)


# -- flat key=value serialization -------------------------------------------

_GRHT_KEYS = {"lambda": "lam", "sigma": "sigma", "c2": "c2", "d1": "d1",
              "d5": "d5", "a1": "a1", "b1": "b1", "mu1": "mu1", "mu2": "mu2",
              "mu3": "mu3", "mu4": "mu4"}
_HENON_KEYS = {"alpha": "alpha", "beta": "beta", "R": "R", "S": "S"}
_FIXTURE_KEYS = {"a": "a", "b": "b"}


def params_to_text(m) -> str:
    """Serialize a map's parameter block as flat ``key=value`` lines."""
    lines = []
    if isinstance(m, GrhtMap):
        table = _GRHT_KEYS
    elif isinstance(m, HenonMap):
        table = _HENON_KEYS
    elif isinstance(m, QuadFixtureMap):
        table = _FIXTURE_KEYS
    else:
        raise DomainError(f"unknown map type {type(m).__name__}")
    for key, attr in table.items():
        lines.append(f"{key}={getattr(m, attr):.17g}")
    return "\n".join(lines) + "\n"


def params_from_text(text: str):
    """Rebuild a map from ``key=value`` lines (family inferred from keys)."""
    kv = {}
    for raw in io.StringIO(text):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"bad parameter line: {raw.strip()!r}")
        key, val = line.split("=", 1)
        kv[key.strip()] = float(val.strip())
    if "lambda" in kv:
        kwargs = {attr: kv[key] for key, attr in _GRHT_KEYS.items() if key in kv}
        return GrhtMap(**kwargs)
    if "alpha" in kv and "beta" in kv:
        return HenonMap(**{attr: kv[key] for key, attr in _HENON_KEYS.items()})
    if set(kv) <= {"a", "b"}:
        return QuadFixtureMap(**{attr: kv[key] for key, attr in _FIXTURE_KEYS.items()
                                 if key in kv})
    raise ParameterError(f"cannot infer map family from keys {sorted(kv)}")


def with_params(m, **overrides):
    """Copy of a map with some fields replaced (validates invariants)."""
    return replace(m, **overrides)


def param_names(m):
    return [f.name for f in fields(m)]
