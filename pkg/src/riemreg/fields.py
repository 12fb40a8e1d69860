"""Scalar fields on model spaces together with the regularity metadata that
the envelope localization needs.

A :class:`ScalarField` wraps a vectorised evaluation rule (points in, values
out, arbitrary leading axes) and records what is known about the function:

* ``bound``: ``|f| <= bound`` everywhere;
* ``lipschitz``: a Lipschitz constant;
* ``minorant = (c, x0)``: ``f(x) >= -(c/2) (1 + d(x, x0)^2)``;
* ``majorant = (c, x0)``: ``f(x) <= (c/2) (1 + d(x, x0)^2)``;
* ``inf_value`` / ``sup_value``: known extremal values;
* ``modulus``: a modulus of continuity ``t -> omega(t)``.

Metadata propagates through negation, scaling and sums where it can be
derived exactly; otherwise it is dropped.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .manifolds import Manifold

#: Minorant constant used for nonnegative fields (any c > 0 is valid).
TINY_C = 1e-9


@dataclass
class ScalarField:
    manifold: Manifold
    fn: Callable[[np.ndarray], np.ndarray]
    name: str = "field"
    bound: Optional[float] = None
    lipschitz: Optional[float] = None
    minorant: Optional[tuple] = None
    majorant: Optional[tuple] = None
    inf_value: Optional[float] = None
    sup_value: Optional[float] = None
    modulus: Optional[Callable[[float], float]] = None
    minimizer: Optional[np.ndarray] = None

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    def __neg__(self):
        fn = self.fn
        return ScalarField(
            self.manifold,
            lambda x: -fn(x),
            name=f"-({self.name})",
            bound=self.bound,
            lipschitz=self.lipschitz,
            minorant=self.majorant,
            majorant=self.minorant,
            inf_value=None if self.sup_value is None else -self.sup_value,
            sup_value=None if self.inf_value is None else -self.inf_value,
            modulus=self.modulus,
        )

    def scaled(self, a):
        """``a * f`` for a scalar ``a``."""
        a = float(a)
        if a < 0:
            return (-self).scaled(-a)
        fn = self.fn
        mod = self.modulus
        return ScalarField(
            self.manifold,
            lambda x: a * fn(x),
            name=f"{a:g}*({self.name})",
            bound=None if self.bound is None else a * self.bound,
            lipschitz=None if self.lipschitz is None else a * self.lipschitz,
            minorant=None if self.minorant is None else (a * self.minorant[0], self.minorant[1]),
            majorant=None if self.majorant is None else (a * self.majorant[0], self.majorant[1]),
            inf_value=None if self.inf_value is None else a * self.inf_value,
            sup_value=None if self.sup_value is None else a * self.sup_value,
            modulus=None if mod is None else (lambda t: a * mod(t)),
            minimizer=self.minimizer if a > 0 else None,
        )

    def __mul__(self, a):
        return self.scaled(a)

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, ScalarField):
            return _sum(self, other)
        c = float(other)
        fn = self.fn
        shift = lambda v: None if v is None else v + c  # noqa: E731
        return replace(
            self,
            fn=lambda x: fn(x) + c,
            name=f"{self.name}+{c:g}",
            bound=None if self.bound is None else self.bound + abs(c),
            minorant=_shift_quadratic(self.minorant, -c),
            majorant=_shift_quadratic(self.majorant, c),
            inf_value=shift(self.inf_value),
            sup_value=shift(self.sup_value),
        )

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other if isinstance(other, ScalarField) else -float(other))


def _shift_quadratic(quad, c):
    # (k/2)(1+d^2) + c <= (k'/2)(1+d^2) with k' = k + 2 max(c, 0)
    if quad is None:
        return None
    return (quad[0] + 2.0 * max(c, 0.0), quad[1])


def _add_opt(a, b):
    return None if a is None or b is None else a + b


def _sum(f, h):
    if f.manifold is not h.manifold:
        raise ValueError("fields live on different manifolds")
    ff, hf = f.fn, h.fn

    def combine(qa, qb):
        if qa is None or qb is None or not np.array_equal(qa[1], qb[1]):
            return None
        return (qa[0] + qb[0], qa[1])

    mf, mh = f.modulus, h.modulus
    return ScalarField(
        f.manifold,
        lambda x: ff(x) + hf(x),
        name=f"{f.name}+{h.name}",
        bound=_add_opt(f.bound, h.bound),
        lipschitz=_add_opt(f.lipschitz, h.lipschitz),
        minorant=combine(f.minorant, h.minorant),
        majorant=combine(f.majorant, h.majorant),
        inf_value=None,
        sup_value=None,
        modulus=None if mf is None or mh is None else (lambda t: mf(t) + mh(t)),
    )


# --- library -----------------------------------------------------------------
def constant(manifold, value):
    value = float(value)
    return ScalarField(
        manifold,
        lambda x: np.full(np.shape(x)[:-1], value),
        name=f"const({value:g})",
        bound=abs(value),
        lipschitz=0.0,
        minorant=(max(-2.0 * value, TINY_C), manifold.origin()),
        majorant=(max(2.0 * value, TINY_C), manifold.origin()),
        inf_value=value,
        sup_value=value,
        modulus=lambda t: 0.0,
    )


def dist_sq(manifold, x0, scale=1.0):
    """``scale * d(., x0)^2``: nonnegative, unbounded, minimum at ``x0``."""
    x0 = np.asarray(x0, dtype=float)
    scale = float(scale)
    return ScalarField(
        manifold,
        lambda x: scale * manifold.dist(x, x0) ** 2,
        name=f"{scale:g}*dist2",
        minorant=(TINY_C, x0),
        majorant=(2.0 * scale, x0),
        inf_value=0.0,
        minimizer=x0,
    )


def dist(manifold, x0):
    """``d(., x0)``: 1-Lipschitz, unbounded."""
    x0 = np.asarray(x0, dtype=float)
    return ScalarField(
        manifold,
        lambda x: manifold.dist(x, x0),
        name="dist",
        lipschitz=1.0,
        minorant=(TINY_C, x0),
        majorant=(1.0, x0),
        inf_value=0.0,
        modulus=lambda t: t,
        minimizer=x0,
    )


def truncated_dist(manifold, center, cap=2.0):
    """``min{cap, d(., center)}``: bounded by ``cap`` and 1-Lipschitz."""
    return min_dist(manifold, [center], cap)


def min_dist(manifold, centers, cap=2.0):
    """``min{cap, min_i d(., p_i)}`` for finitely many centers."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    cap = float(cap)

    def fn(x):
        x = np.asarray(x, dtype=float)
        best = np.full(x.shape[:-1], cap)
        for p in centers:
            best = np.minimum(best, manifold.dist(x, p))
        return best

    return ScalarField(
        manifold,
        fn,
        name=f"min({cap:g}, dist to {len(centers)} pts)",
        bound=cap,
        lipschitz=1.0,
        minorant=(TINY_C, centers[0]),
        majorant=(2.0 * cap, centers[0]),
        inf_value=0.0,
        sup_value=cap,
        modulus=lambda t: min(t, cap),
        minimizer=centers[0] if len(centers) == 1 else None,
    )


def _bump_profile(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    safe = np.where(inside, s, 0.0)
    return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe * safe)), 0.0)


def _bump_slope_max():
    s = np.linspace(0.0, 1.0, 200001)[:-1]
    prof = _bump_profile(s)
    return float(np.max(np.abs(prof * 2.0 * s / (1.0 - s * s) ** 2)))


_BUMP_SLOPE = _bump_slope_max()


def bump(manifold, center, width=0.5, height=1.0):
    """Smooth radial bump ``height * exp(1 - 1/(1 - (d/width)^2))`` supported
    in ``B(center, width)``; maximum ``height`` at the center."""
    center = np.asarray(center, dtype=float)
    width = float(width)
    height = float(height)
    lip = abs(height) * _BUMP_SLOPE / width
    return ScalarField(
        manifold,
        lambda x: height * _bump_profile(manifold.dist(x, center) / width),
        name=f"bump(w={width:g})",
        bound=abs(height),
        lipschitz=lip * 1.000001,
        minorant=(max(-2.0 * min(height, 0.0), TINY_C), center),
        majorant=(max(2.0 * max(height, 0.0), TINY_C), center),
        inf_value=min(0.0, height),
        sup_value=max(0.0, height),
        modulus=lambda t: min(lip * t, abs(height)),
    )


def field_library(manifold, x0=None):
    """Named fields used by the verification suites and the CLI."""
    x0 = manifold.origin() if x0 is None else np.asarray(x0, dtype=float)
    return {
        "const": constant(manifold, 1.0),
        "dist2": dist_sq(manifold, x0),
        "half-dist2": dist_sq(manifold, x0, 0.5),
        "dist": dist(manifold, x0),
        "trunc-dist": truncated_dist(manifold, x0, 2.0),
        "bump": bump(manifold, x0, 0.5, 1.0),
    }


def check_metadata(field, center, radius, n=1000, rng=None, tol=1e-9):
    """Largest violation of the recorded metadata on ``n`` random points of
    ``B(center, radius)`` (0 when everything holds)."""
    rng = np.random.default_rng(0) if rng is None else rng
    M = field.manifold
    pts = M.sample_ball(center, radius, n, rng)
    vals = field(pts)
    worst = 0.0
    if field.bound is not None:
        worst = max(worst, float(np.max(np.abs(vals) - field.bound)))
    if field.minorant is not None:
        c, x0 = field.minorant
        worst = max(worst, float(np.max(-(c / 2) * (1 + M.dist(pts, x0) ** 2) - vals)))
    if field.majorant is not None:
        c, x0 = field.majorant
        worst = max(worst, float(np.max(vals - (c / 2) * (1 + M.dist(pts, x0) ** 2))))
    if field.inf_value is not None:
        worst = max(worst, float(np.max(field.inf_value - vals)))
    if field.sup_value is not None:
        worst = max(worst, float(np.max(vals - field.sup_value)))
    if field.lipschitz is not None:
        other = M.sample_ball(center, radius, n, rng)
        d = M.dist(pts, other)
        ok = d > 0
        worst = max(worst, float(np.max(np.abs(vals - field(other))[ok] - field.lipschitz * d[ok])))
    return max(worst - tol, 0.0)


def cached(field):
    """Wrap ``field`` so repeated evaluations at bit-identical points reuse
    earlier results. Unlike quantized memoization this never changes a
    value; it only pays off when the same points are queried again."""
    store = {}
    lock = threading.Lock()
    fn = field.fn

    def lookup(x):
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        flat = np.ascontiguousarray(x.reshape(-1, x.shape[-1]))
        keys = [row.tobytes() for row in flat]
        with lock:
            hits = [store.get(k) for k in keys]
        miss = [i for i, v in enumerate(hits) if v is None]
        out = np.array([np.nan if v is None else v for v in hits], dtype=float)
        if miss:
            vals = np.asarray(fn(flat[miss]), dtype=float).reshape(-1)
            out[miss] = vals
            with lock:
                store.update(zip((keys[i] for i in miss), vals.tolist()))
        return out.reshape(lead)

    return replace(field, fn=lookup)
