"""Numerically integrated geometry of conformally flat half-planes.

The metric is ``g = exp(2 phi) * delta`` on ``{x2 > 0}`` with
``phi = -k log(x2)``, i.e. ``g_ij = delta_ij / x2^(2k)``. ``k = 2`` is the
warped half-plane whose Gauss curvature ``-2 x2^2`` is unbounded below;
``k = 1`` is the Poincare half-plane model of ``H^2`` and serves as a
cross-validation target for the integrators because its closed-form
geometry is available through the hyperboloid.

Geodesics, their linearisation (used for Newton shooting and ``dexp``) and
parallel transport are integrated with a fixed-step classical Runge-Kutta
scheme in which every batch row keeps its own step count, so a result never
depends on what else was in the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import DomainError, LeftWorkingRegion, ShootingDiverged
from .manifolds import Hyperbolic, Manifold


@dataclass(frozen=True)
class ConformalMetric:
    """``g_ij = delta_ij / x2^(2 * power)`` restricted to a working box."""

    power: float = 2.0
    x2_min: float = 0.2
    x2_max: float = 50.0

    def __post_init__(self):
        if not 0 < self.x2_min < self.x2_max:
            raise ValueError("working region needs 0 < x2_min < x2_max")

    def phi(self, p):
        return -self.power * np.log(np.asarray(p)[..., 1])

    def grad_phi(self, p):
        p = np.asarray(p, dtype=float)
        g = np.zeros_like(p)
        g[..., 1] = -self.power / p[..., 1]
        return g

    def hess_phi(self, p):
        p = np.asarray(p, dtype=float)
        h = np.zeros(p.shape + (2,))
        h[..., 1, 1] = self.power / p[..., 1] ** 2
        return h

    def factor(self, p):
        """Conformal factor ``exp(2 phi) = x2^(-2k)``."""
        return np.asarray(p, dtype=float)[..., 1] ** (-2.0 * self.power)

    def components(self, p):
        return self.factor(p)[..., None, None] * np.eye(2)

    def gauss_curvature(self, p):
        """``-exp(-2 phi) * Laplacian(phi) = -k x2^(2k - 2)``."""
        x2 = np.asarray(p, dtype=float)[..., 1]
        return -self.power * x2 ** (2.0 * self.power - 2.0)

    def inside(self, p):
        x2 = np.asarray(p)[..., 1]
        return (x2 >= self.x2_min) & (x2 <= self.x2_max)


WARPED = ConformalMetric(2.0)
HALFPLANE_H2 = ConformalMetric(1.0, 1e-3, 1e3)


@dataclass(frozen=True)
class IntegratorConfig:
    steps_per_unit: int = 1000
    newton_max_iter: int = 50
    newton_tol: float = 1e-10

    def __post_init__(self):
        if self.steps_per_unit < 100:
            raise ValueError("steps_per_unit must be at least 100")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")


DEFAULT_INTEGRATOR = IntegratorConfig()


# --- vector fields -----------------------------------------------------------
def _accel(metric, x, p):
    g = metric.grad_phi(x)
    gp = np.sum(g * p, axis=-1, keepdims=True)
    pp = np.sum(p * p, axis=-1, keepdims=True)
    return -2.0 * gp * p + pp * g


def _accel_linear(metric, x, p, dx, dp):
    """Directional derivative of the geodesic acceleration."""
    g = metric.grad_phi(x)
    H = metric.hess_phi(x)
    gp = np.sum(g * p, axis=-1, keepdims=True)
    pp = np.sum(p * p, axis=-1, keepdims=True)
    Hdx = np.einsum("...ij,...j->...i", H, dx)
    by_x = -2.0 * np.sum(Hdx * p, axis=-1, keepdims=True) * p + pp * Hdx
    by_p = (
        -2.0 * np.sum(g * dp, axis=-1, keepdims=True) * p
        - 2.0 * gp * dp
        + 2.0 * np.sum(p * dp, axis=-1, keepdims=True) * g
    )
    return by_x + by_p


def _transport_rate(metric, x, p, w):
    g = metric.grad_phi(x)
    return -(
        np.sum(g * p, axis=-1, keepdims=True) * w
        + np.sum(g * w, axis=-1, keepdims=True) * p
        - np.sum(p * w, axis=-1, keepdims=True) * g
    )


def _rhs(metric, state, n_var, n_trans):
    x, p = state[..., 0:2], state[..., 2:4]
    parts = [p, _accel(metric, x, p)]
    for j in range(n_var):
        dx = state[..., 4 + 4 * j : 6 + 4 * j]
        dp = state[..., 6 + 4 * j : 8 + 4 * j]
        parts += [dp, _accel_linear(metric, x, p, dx, dp)]
    base = 4 + 4 * n_var
    for j in range(n_trans):
        w = state[..., base + 2 * j : base + 2 * j + 2]
        parts.append(_transport_rate(metric, x, p, w))
    return np.concatenate(parts, axis=-1)


def _flow(metric, x, v, cfg, n_var=0, transported=()):
    """Integrate ``t -> exp_x(t v)`` for ``t`` in ``[0, 1]``.

    Returns the final state array; columns are position, velocity, then
    ``n_var`` linearised (position, velocity) pairs seeded with
    ``(0, e_j)``, then the transported vectors.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    x, v = np.broadcast_arrays(x, v)
    batch = x.shape[0]
    speed = np.linalg.norm(v, axis=-1) * np.sqrt(metric.factor(x))
    steps = np.maximum(np.ceil(cfg.steps_per_unit * speed).astype(int), 1)
    steps = np.where(speed == 0, 0, steps)
    cols = [x, v]
    for j in range(n_var):
        seed = np.zeros((batch, 2))
        seed[:, j] = 1.0
        cols += [np.zeros((batch, 2)), seed]
    for w in transported:
        cols.append(np.broadcast_to(np.asarray(w, dtype=float), (batch, 2)))
    state = np.concatenate(cols, axis=-1)
    if not np.all(metric.inside(x)):
        raise LeftWorkingRegion("start point outside the working region")
    dt = (1.0 / np.maximum(steps, 1))[:, None]
    n_trans = len(transported)
    for k in range(int(steps.max(initial=0))):
        active = (k < steps)[:, None]
        k1 = _rhs(metric, state, n_var, n_trans)
        k2 = _rhs(metric, state + 0.5 * dt * k1, n_var, n_trans)
        k3 = _rhs(metric, state + 0.5 * dt * k2, n_var, n_trans)
        k4 = _rhs(metric, state + dt * k3, n_var, n_trans)
        state = np.where(active, state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), state)
        if not np.all(metric.inside(state[:, 0:2])):
            raise LeftWorkingRegion("geodesic left the working region; shrink the radius")
    return state


# --- public operations -------------------------------------------------------
def geodesic_shoot(metric, x, v, t, cfg=DEFAULT_INTEGRATOR):
    """Point and velocity at arclength ``t`` along the geodesic from ``x``
    with unit initial velocity ``v`` (coordinate components)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if t == 0:
        return x.copy(), v.copy()
    state = _flow(metric, x, t * v, cfg)
    point, vel = state[:, 0:2] / 1.0, state[:, 2:4] / t
    if x.ndim == 1:
        return point[0], vel[0]
    return point, vel


def _shoot_with_jacobian(metric, x, v, cfg):
    state = _flow(metric, x, v, cfg, n_var=2)
    jac = np.stack([state[:, 4:6], state[:, 8:10]], axis=-1)
    return state[:, 0:2], jac


def log_numeric(metric, x, y, cfg=DEFAULT_INTEGRATOR):
    """Initial coordinate velocity ``v`` with ``exp_x(v) = y`` (damped Newton
    on the shooting map, least-squares fallback)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    single = x.ndim == 1 and y.ndim == 1
    x2d, y2d = np.broadcast_arrays(np.atleast_2d(x), np.atleast_2d(y))
    x2d = np.array(x2d)
    y2d = np.array(y2d)
    v = _initial_velocity(metric, x2d, y2d)
    scale = np.maximum(1.0, np.abs(y2d).max(axis=-1))
    done = np.linalg.norm(v, axis=-1) == 0
    v[done] = 0.0
    for _ in range(cfg.newton_max_iter):
        todo = np.flatnonzero(~done)
        if todo.size == 0:
            break
        end, jac = _shoot_with_jacobian(metric, x2d[todo], v[todo], cfg)
        res = end - y2d[todo]
        err = np.linalg.norm(res, axis=-1)
        ok = err <= cfg.newton_tol * scale[todo]
        done[todo[ok]] = True
        if np.all(ok):
            break
        idx = todo[~ok]
        step = -np.linalg.solve(jac[~ok], res[~ok][..., None])[..., 0]
        alpha = np.ones(idx.size)
        base_err = err[~ok]
        pending = np.ones(idx.size, dtype=bool)
        for _ in range(12):
            trial = v[idx] + alpha[:, None] * step
            try:
                t_end = _flow(metric, x2d[idx], trial, cfg)[:, 0:2]
                t_err = np.linalg.norm(t_end - y2d[idx], axis=-1)
            except LeftWorkingRegion:
                t_err = np.full(idx.size, np.inf)
            accept = pending & (t_err < base_err)
            v[idx[accept]] = trial[accept]
            pending &= ~accept
            if not pending.any():
                break
            alpha = np.where(pending, 0.5 * alpha, alpha)
        if pending.any():
            break
    if not np.all(done):
        for i in np.flatnonzero(~done):
            v[i] = _fallback_log(metric, x2d[i], y2d[i], v[i], cfg, scale[i])
    out = v
    return out[0] if single else out.reshape(np.broadcast_shapes(x.shape, y.shape))


def _initial_velocity(metric, x, y):
    # coordinate difference rescaled by the conformal length of the segment
    nodes, weights = np.polynomial.legendre.leggauss(8)
    s = 0.5 * (nodes + 1.0)
    seg = x[:, None, :] + s[None, :, None] * (y - x)[:, None, :]
    length_ratio = 0.5 * np.sum(weights * np.sqrt(metric.factor(seg)), axis=-1)
    return (y - x) * (length_ratio / np.sqrt(metric.factor(x)))[:, None]


def _fallback_log(metric, x, y, v0, cfg, scale):
    def residual(vel):
        try:
            return _flow(metric, x, vel, cfg)[0, 0:2] - y
        except LeftWorkingRegion:
            return np.full(2, 1e6)

    sol = least_squares(residual, v0, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if np.linalg.norm(sol.fun) > 100 * cfg.newton_tol * scale:
        raise ShootingDiverged(f"shooting from {x} to {y} did not converge")
    return sol.x


def transport_numeric(metric, x, y, h, cfg=DEFAULT_INTEGRATOR):
    """Parallel transport of ``h`` along the geodesic from ``x`` to ``y``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    v = log_numeric(metric, x, y, cfg)
    h = np.broadcast_to(np.asarray(h, dtype=float), np.atleast_2d(v).shape)
    state = _flow(metric, np.atleast_2d(x), np.atleast_2d(v), cfg, transported=(h,))
    out = state[:, 4:6]
    return out[0] if single else out


def gauss_curvature(metric, p):
    """Analytic Gauss curvature of the conformal metric at ``p``."""
    return metric.gauss_curvature(p)


def curvature_check(metric, p, r=1e-2, n_rays=256, cfg=DEFAULT_INTEGRATOR):
    """Gauss curvature estimated from the circumference of a geodesic circle.

    The circle is sampled by shooting ``n_rays`` geodesics of length ``r``;
    its length is obtained from a spectrally differentiated periodic
    parametrisation, and ``K ~ 3 (2 pi r - L) / (pi r^3)``.
    """
    p = np.asarray(p, dtype=float)
    angles = 2.0 * np.pi * np.arange(n_rays) / n_rays
    unit = np.stack([np.cos(angles), np.sin(angles)], axis=-1) / np.sqrt(metric.factor(p))
    ends = _flow(metric, np.broadcast_to(p, (n_rays, 2)), r * unit, cfg)[:, 0:2]
    freq = np.fft.fftfreq(n_rays, d=1.0 / n_rays)
    deriv = np.real(np.fft.ifft(1j * freq[:, None] * np.fft.fft(ends, axis=0), axis=0))
    speed = np.linalg.norm(deriv, axis=-1) * np.sqrt(metric.factor(ends))
    length = speed.mean() * 2.0 * np.pi
    return 3.0 * (2.0 * np.pi * r - length) / (np.pi * r**3)


class ConformalHalfPlane(Manifold):
    """Manifold interface on top of the numerical integrators."""

    kind = "warped-halfplane"

    def __init__(self, metric=WARPED, cfg=DEFAULT_INTEGRATOR):
        self.metric = metric
        self.cfg = cfg
        self.dim = self.ambient_dim = 2
        self.curvature = float("nan")
        ks = metric.gauss_curvature(np.array([[0.0, metric.x2_min], [0.0, metric.x2_max]]))
        self.K0 = float(np.max(np.abs(ks)))
        self.curvature_min = float(np.min(ks))
        self.inj_radius = self.conv_radius = math.inf

    def origin(self):
        return np.array([0.0, 1.0])

    def check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != 2 or np.any(x[..., 1] <= 0):
            raise DomainError("half-plane points need x2 > 0")
        return x

    def inner(self, x, u, v):
        return self.metric.factor(x) * np.sum(np.asarray(u) * v, axis=-1)

    def orthonormal_frame(self, x):
        x = np.asarray(x, dtype=float)
        s = 1.0 / np.sqrt(self.metric.factor(x))
        return s[..., None, None] * np.eye(2)

    def exp(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        lead = np.broadcast_shapes(x.shape[:-1], v.shape[:-1])
        xf = np.broadcast_to(x, lead + (2,)).reshape(-1, 2)
        vf = np.broadcast_to(v, lead + (2,)).reshape(-1, 2)
        return _flow(self.metric, xf, vf, self.cfg)[:, 0:2].reshape(lead + (2,))

    def log(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        lead = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
        xf = np.broadcast_to(x, lead + (2,)).reshape(-1, 2)
        yf = np.broadcast_to(y, lead + (2,)).reshape(-1, 2)
        return log_numeric(self.metric, xf, yf, self.cfg).reshape(lead + (2,))

    def dist(self, x, y):
        return self.norm(x, self.log(x, y))

    def parallel_transport(self, x, y, h):
        x = np.asarray(x, dtype=float)
        lead = np.broadcast_shapes(x.shape[:-1], np.shape(y)[:-1], np.shape(h)[:-1])
        xf = np.broadcast_to(x, lead + (2,)).reshape(-1, 2)
        yf = np.broadcast_to(y, lead + (2,)).reshape(-1, 2)
        hf = np.broadcast_to(h, lead + (2,)).reshape(-1, 2)
        v = log_numeric(self.metric, xf, yf, self.cfg)
        state = _flow(self.metric, xf, v, self.cfg, transported=(hf,))
        return state[:, 4:6].reshape(lead + (2,))

    def dexp(self, x, v, h):
        x = np.asarray(x, dtype=float)
        lead = np.broadcast_shapes(x.shape[:-1], np.shape(v)[:-1], np.shape(h)[:-1])
        xf = np.broadcast_to(x, lead + (2,)).reshape(-1, 2)
        vf = np.broadcast_to(v, lead + (2,)).reshape(-1, 2)
        hf = np.broadcast_to(h, lead + (2,)).reshape(-1, 2)
        _, jac = _shoot_with_jacobian(self.metric, xf, vf, self.cfg)
        return np.einsum("bij,bj->bi", jac, hf).reshape(lead + (2,))


# --- cross validation against the hyperboloid --------------------------------
def halfplane_to_hyperboloid(p):
    """Isometry from the half-plane model (``k = 1``) onto the hyperboloid."""
    u, v = np.asarray(p, dtype=float)[..., 0], np.asarray(p, dtype=float)[..., 1]
    s = u * u + v * v
    return np.stack([u / v, (s - 1.0) / (2.0 * v), (s + 1.0) / (2.0 * v)], axis=-1)


def halfplane_pushforward(p, w):
    """Differential of :func:`halfplane_to_hyperboloid` applied to ``w``."""
    p = np.asarray(p, dtype=float)
    u, v = p[..., 0], p[..., 1]
    du = np.stack([1.0 / v, u / v, u / v], axis=-1)
    dv = np.stack([-u / v**2, (v * v - u * u + 1.0) / (2 * v * v), (v * v - u * u - 1.0) / (2 * v * v)], axis=-1)
    w = np.asarray(w, dtype=float)
    return w[..., 0:1] * du + w[..., 1:2] * dv


def crossvalidate_transport(n_samples=100, seed=0, radius=1.0, cfg=DEFAULT_INTEGRATOR):
    """Largest discrepancy between the numerical transport on the half-plane
    model of ``H^2`` and the closed-form hyperboloid transport."""
    rng = np.random.default_rng(seed)
    plane = ConformalHalfPlane(HALFPLANE_H2, cfg)
    hyp = Hyperbolic(2, -1.0)
    x = np.stack([rng.uniform(-1, 1, n_samples), rng.uniform(0.5, 2.0, n_samples)], axis=-1)
    direction = rng.standard_normal((n_samples, 2))
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    length = radius * rng.random(n_samples)
    y = plane.exp(x, direction * (length * x[:, 1])[:, None])
    h = rng.standard_normal((n_samples, 2)) * x[:, 1:2]
    numeric = halfplane_pushforward(y, plane.parallel_transport(x, y, h))
    X, Y = halfplane_to_hyperboloid(x), halfplane_to_hyperboloid(y)
    closed = hyp.parallel_transport(X, Y, halfplane_pushforward(x, h))
    return float(np.max(np.linalg.norm(numeric - closed, axis=-1)))
