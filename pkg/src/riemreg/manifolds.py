"""Closed-form model spaces: Euclidean space, round spheres, hyperbolic spaces
and Riemannian products of these.

Points and tangent vectors are plain ``numpy`` arrays whose last axis holds
ambient coordinates; every operation broadcasts over leading axes. Spheres of
curvature ``K > 0`` live in ``R^{n+1}`` with ``|p| = 1/sqrt(K)``; hyperbolic
spaces of curvature ``K < 0`` live on the upper sheet of the hyperboloid
``<p, p>_L = -1/|K|`` in Minkowski space, the last coordinate being the
time-like one.

All manifolds share the same small interface::

    M.exp(x, v)                      M.log(x, y)
    M.dist(x, y)                     M.parallel_transport(x, y, h)
    M.dexp(x, v, h)                  M.orthonormal_frame(x)

plus chart helpers (``to_tangent``, ``to_chart``) used by the finite
difference estimators and the envelope solver.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import CutLocusExceeded, DomainError

#: Safety margin subtracted from the injectivity radius in every precondition.
DELTA_CUT = 1e-6

_POINT_TOL = 1e-12


def _sinc(theta):
    """sin(t)/t, stable at 0."""
    return np.sinc(np.asarray(theta) / np.pi)


def _sinhc(theta):
    """sinh(t)/t, stable at 0."""
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < 1e-6
    safe = np.where(small, 1.0, theta)
    return np.where(small, 1.0 + theta**2 / 6.0, np.sinh(safe) / safe)


def _dot(a, b):
    """Inner product over the last axis (einsum is much faster than
    ``sum(a * b)`` for short axes)."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return np.einsum("...i,...i->...", a, b)


def _len(a):
    return np.sqrt(_dot(a, a))


class Manifold:
    """Common behaviour of the model spaces.

    Subclasses set ``kind``, ``dim``, ``ambient_dim``, ``curvature``,
    ``K0`` (bound on ``|K|``), ``curvature_min`` (lower bound on ``K``),
    ``inj_radius`` and ``conv_radius``.
    """

    kind = "abstract"

    # --- metric -----------------------------------------------------------
    def inner(self, x, u, v):
        return _dot(u, v)

    def norm(self, x, v):
        return np.sqrt(np.maximum(self.inner(x, v, v), 0.0))

    # --- charts -----------------------------------------------------------
    def to_tangent(self, x, c):
        """Map chart coordinates ``c`` (last axis ``dim``) to a tangent at x."""
        frame = self.orthonormal_frame(x)
        return np.einsum("...i,...ij->...j", np.asarray(c, dtype=float), frame)

    def to_chart(self, x, v):
        """Components of the tangent ``v`` in the orthonormal frame at x."""
        frame = self.orthonormal_frame(x)
        return self.inner(np.asarray(x)[..., None, :], frame, np.asarray(v)[..., None, :])

    def chart_exp(self, x, c):
        """``exp_x`` composed with the frame at x (the exponential chart)."""
        x = np.asarray(x, dtype=float)
        return self.exp(x, self.to_tangent(x, c))

    # --- derived operations -----------------------------------------------
    def geodesic(self, x, y, t):
        """Point at fraction ``t`` of the minimizing geodesic from x to y."""
        t = np.asarray(t, dtype=float)
        return self.exp(x, t[..., None] * self.log(x, y))

    def midpoint(self, x, y):
        return self.geodesic(x, y, 0.5 * np.ones(np.shape(x)[:-1]))

    def sample_ball(self, center, radius, size, rng):
        """Seeded points distributed uniformly (in the exponential chart) in
        the geodesic ball ``B(center, radius)``."""
        center = np.asarray(center, dtype=float)
        g = rng.standard_normal((size, self.dim))
        g /= _len(g)[..., None]
        r = radius * rng.random(size) ** (1.0 / self.dim)
        return self.chart_exp(np.broadcast_to(center, (size,) + center.shape), g * r[:, None])

    def random_unit_tangent(self, x, rng):
        x = np.asarray(x, dtype=float)
        g = rng.standard_normal(x.shape[:-1] + (self.dim,))
        g /= _len(g)[..., None]
        return self.to_tangent(x, g)

    def _guard_norm(self, r, what):
        limit = self.inj_radius - DELTA_CUT
        if np.any(np.asarray(r) >= limit):
            raise CutLocusExceeded(
                f"{what}: length {np.max(r):.6g} reaches injectivity guard {limit:.6g}"
            )

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, K={self.curvature})"


class Euclidean(Manifold):
    """Flat ``R^n``."""

    kind = "euclidean"

    def __init__(self, dim=2):
        if dim < 1:
            raise ValueError("dimension must be positive")
        self.dim = self.ambient_dim = int(dim)
        self.curvature = 0.0
        self.K0 = 0.0
        self.curvature_min = 0.0
        self.inj_radius = self.conv_radius = math.inf

    def origin(self):
        return np.zeros(self.dim)

    def check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim or not np.all(np.isfinite(x)):
            raise DomainError("not a point of R^%d" % self.dim)
        return x

    def exp(self, x, v):
        return np.asarray(x, dtype=float) + np.asarray(v, dtype=float)

    def log(self, x, y):
        return np.asarray(y, dtype=float) - np.asarray(x, dtype=float)

    def dist(self, x, y):
        return _len(np.asarray(y, dtype=float) - x)

    def parallel_transport(self, x, y, h):
        return np.array(np.broadcast_to(h, np.broadcast_shapes(np.shape(h), np.shape(y))), dtype=float)

    def dexp(self, x, v, h):
        return np.array(np.broadcast_to(h, np.broadcast_shapes(np.shape(h), np.shape(v))), dtype=float)

    def orthonormal_frame(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(self.dim), x.shape[:-1] + (self.dim, self.dim)).copy()


class Sphere(Manifold):
    """Round sphere ``S^n`` of constant curvature ``K > 0`` embedded in
    ``R^{n+1}`` with radius ``1/sqrt(K)``."""

    kind = "sphere"

    def __init__(self, dim=2, curvature=1.0):
        if curvature <= 0:
            raise ValueError("sphere curvature must be positive")
        self.dim = int(dim)
        self.ambient_dim = self.dim + 1
        self.curvature = float(curvature)
        self.K0 = self.curvature
        self.curvature_min = self.curvature
        self.radius = 1.0 / math.sqrt(self.curvature)
        self.inj_radius = math.pi * self.radius
        self.conv_radius = 0.5 * math.pi * self.radius

    def origin(self):
        p = np.zeros(self.ambient_dim)
        p[-1] = self.radius
        return p

    def check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.ambient_dim:
            raise DomainError("wrong ambient dimension for sphere point")
        if np.any(np.abs(_dot(x, x) - self.radius**2) > _POINT_TOL * max(1.0, self.radius**2)):
            raise DomainError("point is not on the sphere <p,p> = 1/K")
        return x

    def check_tangent(self, x, v):
        if np.any(np.abs(_dot(np.asarray(x), v)) > 1e-12 * max(1.0, self.radius)):
            raise DomainError("vector is not tangent to the sphere at x")
        return v

    def _project(self, y):
        return y * (self.radius / _len(y)[..., None])

    def exp(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        r = _len(v)
        self._guard_norm(r, "exp")
        theta = (r / self.radius)[..., None]
        return self._project(np.cos(theta) * x + _sinc(theta) * v)

    def _angle(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        a2 = self.radius**2
        c = _dot(x, y) / a2
        w = y - c[..., None] * x
        s = _len(w) / self.radius
        return np.arctan2(s, c), w

    def dist(self, x, y):
        return self.radius * self._angle(x, y)[0]

    def log(self, x, y):
        theta, w = self._angle(x, y)
        self._guard_norm(self.radius * theta, "log")
        return w / _sinc(theta)[..., None]

    def parallel_transport(self, x, y, h):
        x = np.asarray(x, dtype=float)
        v = self.log(x, y)
        r = _len(v)[..., None]
        theta = r / self.radius
        u = np.where(r > 0, v / np.where(r > 0, r, 1.0), 0.0)
        hu = _dot(h, u)[..., None]
        return h + hu * ((np.cos(theta) - 1.0) * u - np.sin(theta) * x / self.radius)

    def dexp(self, x, v, h):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        r = _len(v)[..., None]
        self._guard_norm(r, "dexp")
        theta = r / self.radius
        u = np.where(r > 0, v / np.where(r > 0, r, 1.0), 0.0)
        hu = _dot(h, u)[..., None]
        u_end = -np.sin(theta) * x / self.radius + np.cos(theta) * u
        return hu * u_end + _sinc(theta) * (h - hu * u)

    def orthonormal_frame(self, x):
        xh = np.asarray(x, dtype=float) / self.radius
        n = self.dim
        last = xh[..., -1:]
        sign = np.where(last >= 0, 1.0, -1.0)
        pole = np.zeros(self.ambient_dim)
        pole[-1] = 1.0
        shifted = xh + sign * pole
        coef = xh[..., :n] / (1.0 + sign * last)
        eye = np.eye(n, self.ambient_dim)
        return eye - coef[..., :, None] * shifted[..., None, :]


class Hyperbolic(Manifold):
    """Hyperbolic space ``H^n`` of constant curvature ``K < 0`` on the upper
    sheet of the hyperboloid in Minkowski space ``R^{n,1}``."""

    kind = "hyperbolic"

    def __init__(self, dim=2, curvature=-1.0):
        if curvature >= 0:
            raise ValueError("hyperbolic curvature must be negative")
        self.dim = int(dim)
        self.ambient_dim = self.dim + 1
        self.curvature = float(curvature)
        self.K0 = -self.curvature
        self.curvature_min = self.curvature
        self.radius = 1.0 / math.sqrt(-self.curvature)
        self.inj_radius = self.conv_radius = math.inf

    @staticmethod
    def minkowski(u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        return _dot(u[..., :-1], v[..., :-1]) - u[..., -1] * v[..., -1]

    def inner(self, x, u, v):
        return self.minkowski(u, v)

    def origin(self):
        p = np.zeros(self.ambient_dim)
        p[-1] = self.radius
        return p

    def check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.ambient_dim:
            raise DomainError("wrong ambient dimension for hyperboloid point")
        form = self.minkowski(x, x)
        scale = np.maximum(1.0, _dot(x, x))
        if np.any(np.abs(form + self.radius**2) > _POINT_TOL * scale) or np.any(x[..., -1] <= 0):
            raise DomainError("point is not on the upper hyperboloid sheet")
        return x

    def check_tangent(self, x, v):
        scale = np.maximum(1.0, _len(x) * _len(v))
        if np.any(np.abs(self.minkowski(np.asarray(x), v)) > 1e-12 * scale):
            raise DomainError("vector is not Minkowski-orthogonal to x")
        return v

    def _project(self, y):
        # keep the spatial part and recompute the time coordinate; rescaling
        # by sqrt(-<y,y>) cancels catastrophically far from the origin
        y = np.array(y, dtype=float)
        y[..., -1] = np.sqrt(self.radius**2 + _dot(y[..., :-1], y[..., :-1]))
        return y

    def norm(self, x, v):
        # for v tangent at x: |v|^2 = (a^2 |v_s|^2 + |x_s ^ v_s|^2) / x_t^2,
        # a sum of nonnegative terms (the Minkowski form would cancel)
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        xs, vs = x[..., :-1], v[..., :-1]
        outer = xs[..., :, None] * vs[..., None, :]
        wedge = 0.5 * np.sum((outer - np.swapaxes(outer, -1, -2)) ** 2, axis=(-2, -1))
        return np.sqrt(self.radius**2 * _dot(vs, vs) + wedge) / x[..., -1]

    def exp(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        r = self.norm(x, v)
        theta = (r / self.radius)[..., None]
        return self._project(np.cosh(theta) * x + _sinhc(theta) * v)

    def _theta(self, x, y):
        diff = np.asarray(y, dtype=float) - x
        chord = np.sqrt(np.maximum(self.minkowski(diff, diff), 0.0))
        return 2.0 * np.arcsinh(chord / (2.0 * self.radius))

    def dist(self, x, y):
        return self.radius * self._theta(x, y)

    def log(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        theta = self._theta(x, y)
        w = y + (self.minkowski(x, y) / self.radius**2)[..., None] * x
        return w / _sinhc(theta)[..., None]

    def parallel_transport(self, x, y, h):
        x = np.asarray(x, dtype=float)
        v = self.log(x, y)
        r = self.norm(x, v)[..., None]
        theta = r / self.radius
        u = np.where(r > 0, v / np.where(r > 0, r, 1.0), 0.0)
        hu = self.minkowski(h, u)[..., None]
        return h + hu * ((np.cosh(theta) - 1.0) * u + np.sinh(theta) * x / self.radius)

    def dexp(self, x, v, h):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        r = self.norm(x, v)[..., None]
        theta = r / self.radius
        u = np.where(r > 0, v / np.where(r > 0, r, 1.0), 0.0)
        hu = self.minkowski(h, u)[..., None]
        u_end = np.sinh(theta) * x / self.radius + np.cosh(theta) * u
        return hu * u_end + _sinhc(theta) * (h - hu * u)

    def orthonormal_frame(self, x):
        xh = np.asarray(x, dtype=float) / self.radius
        n = self.dim
        shifted = xh.copy()
        shifted[..., -1] += 1.0
        coef = xh[..., :n] / (1.0 + xh[..., -1:])
        eye = np.eye(n, self.ambient_dim)
        return eye + coef[..., :, None] * shifted[..., None, :]


class Product(Manifold):
    """Riemannian product ``M1 x M2``; ambient coordinates are concatenated."""

    kind = "product"

    def __init__(self, first, second):
        self.factors = (first, second)
        self.dim = first.dim + second.dim
        self.ambient_dim = first.ambient_dim + second.ambient_dim
        self._split = first.ambient_dim
        self.curvature = float("nan")
        self.K0 = max(first.K0, second.K0)
        self.curvature_min = min(first.curvature_min, second.curvature_min, 0.0)
        self.inj_radius = min(first.inj_radius, second.inj_radius)
        self.conv_radius = min(first.conv_radius, second.conv_radius)

    def split(self, p):
        p = np.asarray(p, dtype=float)
        return p[..., : self._split], p[..., self._split :]

    @staticmethod
    def join(a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        lead = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
        a = np.broadcast_to(a, lead + a.shape[-1:])
        b = np.broadcast_to(b, lead + b.shape[-1:])
        return np.concatenate([a, b], axis=-1)

    def origin(self):
        return self.join(self.factors[0].origin(), self.factors[1].origin())

    def check_point(self, p):
        a, b = self.split(p)
        self.factors[0].check_point(a)
        self.factors[1].check_point(b)
        return np.asarray(p, dtype=float)

    def inner(self, x, u, v):
        (x1, x2), (u1, u2), (v1, v2) = self.split(x), self.split(u), self.split(v)
        return self.factors[0].inner(x1, u1, v1) + self.factors[1].inner(x2, u2, v2)

    def _pairwise(self, name, *args):
        parts = [self.split(a) for a in args]
        first = getattr(self.factors[0], name)(*[p[0] for p in parts])
        second = getattr(self.factors[1], name)(*[p[1] for p in parts])
        return first, second

    def exp(self, x, v):
        return self.join(*self._pairwise("exp", x, v))

    def log(self, x, y):
        return self.join(*self._pairwise("log", x, y))

    def dist(self, x, y):
        d1, d2 = self._pairwise("dist", x, y)
        return np.hypot(d1, d2)

    def parallel_transport(self, x, y, h):
        return self.join(*self._pairwise("parallel_transport", x, y, h))

    def dexp(self, x, v, h):
        return self.join(*self._pairwise("dexp", x, v, h))

    def orthonormal_frame(self, x):
        x1, x2 = self.split(x)
        f1 = self.factors[0].orthonormal_frame(x1)
        f2 = self.factors[1].orthonormal_frame(x2)
        lead = np.broadcast_shapes(f1.shape[:-2], f2.shape[:-2])
        out = np.zeros(lead + (self.dim, self.ambient_dim))
        n1 = self.factors[0].dim
        out[..., :n1, : self._split] = f1
        out[..., n1:, self._split :] = f2
        return out

    def __repr__(self):
        return f"Product({self.factors[0]!r}, {self.factors[1]!r})"


def product(first, second):
    """Riemannian product of two model spaces."""
    return Product(first, second)


def model(kind, dim=2, curvature=None):
    """Build a model space from a short name (used by the CLI)."""
    kind = kind.lower()
    if kind == "euclidean":
        return Euclidean(dim)
    if kind == "sphere":
        return Sphere(dim, 1.0 if curvature is None else curvature)
    if kind == "hyperbolic":
        return Hyperbolic(dim, -1.0 if curvature is None else curvature)
    raise ValueError(f"unknown manifold kind {kind!r}")
