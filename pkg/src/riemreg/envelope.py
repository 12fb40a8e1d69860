"""Inf-convolution, sup-convolution and the Lasry-Lions double envelope.

All minimizations happen in the exponential chart at the evaluation point:
for ``x`` and a chart vector ``v`` in a ball of radius ``rho`` the objective
is ``f(exp_x(v . frame_x)) + |v|^2 / (2 lam)``. The ball radius comes from
:func:`localization_radius`, which only uses metadata recorded on the field.

The inner solver is deterministic and derivative free: a polar grid over the
chart ball followed by a shrinking coordinate search from the best few grid
points. Everything is batched, so a single call evaluates many points.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import (
    CutLocusExceeded,
    LambdaTooLarge,
    MissingMetadata,
    ParamConstraintViolated,
)
from .fields import ScalarField
from .manifolds import DELTA_CUT

MODES = ("bounded", "lipschitz", "quadratic")


@dataclass(frozen=True)
class EnvelopeParams:
    """Parameters ``(lam, mu, q)`` of the double envelope.

    ``mode`` selects a localization rule; ``None`` takes the smallest radius
    among the rules the field's metadata supports.
    """

    lam: float
    mu: float | None = None
    q: float = 2.0
    mode: str | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.mu is not None and not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.q > 1:
            raise ValueError(f"q must exceed 1, got {self.q}")
        if self.mode is not None and self.mode not in MODES:
            raise ValueError(f"unknown localization mode {self.mode!r}")

    @property
    def mu_max(self):
        return self.lam / (2.0 * self.q)

    def check_composition(self):
        """Raise unless ``mu <= lam / (2 q)`` (a relative slack of 1e-12
        accepts ``mu`` computed as exactly that quotient)."""
        if self.mu is None:
            raise ParamConstraintViolated("mu is required for the double envelope")
        if self.mu > self.mu_max * (1 + 1e-12):
            raise ParamConstraintViolated(
                f"mu={self.mu:g} exceeds lambda/(2q)={self.mu_max:g}"
            )


@dataclass(frozen=True)
class SolverConfig:
    n_r: int = 16
    n_dir: int = 32
    max_iter: int = 60
    shrink: float = 0.5
    tol: float = 1e-10
    n_start: int = 3
    seed: int = 3735928559
    max_batch: int = 1 << 21

    def __post_init__(self):
        for name in ("n_r", "n_dir", "max_iter", "n_start", "max_batch"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


DEFAULT_SOLVER = SolverConfig()


# --- localization ------------------------------------------------------------
def localization_radius(f: ScalarField, x, lam, mode=None):
    """Radius of the chart ball that contains every minimizer of
    ``y -> f(y) + d(x, y)^2 / (2 lam)``.

    Parameters
    ----------
    f : ScalarField
    x : array_like
        One point or a batch (leading axes).
    lam : float
    mode : {"bounded", "lipschitz", "quadratic"}, optional
        Without a mode, the minimum over every rule the metadata allows.

    Returns
    -------
    ndarray
        Radii with the leading shape of ``x``.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape[:-1]
    if mode is not None and mode not in MODES:
        raise ValueError(f"unknown localization mode {mode!r}")
    wanted = MODES if mode is None else (mode,)
    radii = []
    for m in wanted:
        if m == "bounded" and f.bound is not None:
            radii.append(np.full(shape, 2.0 * math.sqrt(f.bound * lam)))
        elif m == "lipschitz" and f.lipschitz is not None:
            radii.append(np.full(shape, 2.0 * lam * f.lipschitz))
        elif m == "quadratic" and f.minorant is not None:
            c, x0 = f.minorant
            if lam * c * 2.0 >= 1.0:
                if mode is not None:
                    raise LambdaTooLarge(f"lambda={lam:g} needs to be below 1/(2c)={0.5 / c:g}")
                continue
            d0 = f.manifold.dist(x, x0)
            num = 2.0 * f(x) + c * (2.0 * d0 * d0 + 1.0)
            radii.append(np.sqrt(np.maximum(num, 0.0) / (1.0 - 2.0 * lam * c)))
        elif mode is not None:
            raise MissingMetadata(f"field {f.name!r} lacks metadata for {m} localization")
    if not radii:
        if f.minorant is not None:
            raise LambdaTooLarge(f"lambda={lam:g} too large for the quadratic minorant")
        raise MissingMetadata(f"field {f.name!r} carries no localization metadata")
    return np.min(np.stack(radii), axis=0)


# --- inner solver ------------------------------------------------------------
def unit_directions(dim, n_dir):
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        a = 2.0 * np.pi * np.arange(n_dir) / n_dir
        return np.stack([np.cos(a), np.sin(a)], axis=-1)
    if dim == 3:
        n_pol = max(n_dir // 2, 1)
        pol = np.pi * (np.arange(n_pol) + 0.5) / n_pol
        az = 2.0 * np.pi * np.arange(n_dir) / n_dir
        P, A = np.meshgrid(pol, az, indexing="ij")
        d = np.stack([np.sin(P) * np.cos(A), np.sin(P) * np.sin(A), np.cos(P)], axis=-1)
        return np.concatenate([d.reshape(-1, 3), [[0, 0, 1.0], [0, 0, -1.0]]])
    raise ValueError(f"grid solver supports chart dimension <= 3, got {dim}")


def unit_ball_grid(dim, cfg=DEFAULT_SOLVER):
    """Polar grid in the closed unit ball: the origin plus ``n_r`` radii
    times the direction set."""
    dirs = unit_directions(dim, cfg.n_dir)
    radii = np.arange(1, cfg.n_r + 1) / cfg.n_r
    pts = (radii[:, None, None] * dirs[None]).reshape(-1, dim)
    return np.concatenate([np.zeros((1, dim)), pts])


def _tie_order(pts):
    """Permutation sorting ``pts`` (K, dim) by norm, then lexicographically."""
    norms = np.sqrt(np.einsum("...i,...i->...", pts, pts))
    keys = [pts[..., j] for j in reversed(range(pts.shape[-1]))]
    return np.lexsort(keys + [norms])


def _ranked(values, pts, k):
    """Indices of the ``k`` best entries per row of ``values`` (b, K), ties
    broken by smaller norm, then lexicographically by coordinates. ``pts`` is
    (K, dim) when shared by all rows, otherwise (b, K, dim)."""
    b, K = values.shape
    vals = np.where(np.isnan(values), np.inf, values)
    if pts.ndim == 2:
        # shared points: pre-order by the tie rule, then a stable sort on
        # the values alone reproduces the full lexicographic ranking
        perm = _tie_order(pts)
        order = np.argsort(vals[:, perm], axis=1, kind="stable")[:, :k]
        return perm[order]
    norms = np.sqrt(np.einsum("...i,...i->...", pts, pts))
    rows = np.broadcast_to(np.arange(b)[:, None], (b, K))
    keys = [pts[..., j].ravel() for j in reversed(range(pts.shape[-1]))]
    order = np.lexsort(keys + [norms.ravel(), vals.ravel(), rows.ravel()])
    return order.reshape(b, K)[:, :k] - (np.arange(b) * K)[:, None]


def _minimize_batch(objective, radius, dim, cfg):
    """Core batched solver.

    ``objective(V, rows)`` receives chart vectors ``V`` of shape (b, K, dim)
    and the integer indices ``rows`` (b,) of the problems in the batch, and
    returns values of shape (b, K).
    """
    radius = np.asarray(radius, dtype=float)
    B = radius.shape[0]
    grid = unit_ball_grid(dim, cfg)
    K = grid.shape[0]
    m = min(cfg.n_start, K)
    steps = np.array([np.eye(dim), -np.eye(dim)]).reshape(2 * dim, dim)
    out_v = np.zeros((B, dim))
    out_val = np.zeros(B)
    chunk = max(1, cfg.max_batch // K)
    for lo in range(0, B, chunk):
        rows = np.arange(lo, min(B, lo + chunk))
        rad = radius[rows]
        b = rows.size
        V = rad[:, None, None] * grid[None]
        vals = np.asarray(objective(V, rows), dtype=float)
        vals = np.where(np.isnan(vals), np.inf, vals)
        best = _ranked(vals, grid, m)
        cand = np.take_along_axis(V, best[..., None], axis=1)
        cval = np.take_along_axis(vals, best, axis=1)
        h = np.repeat((rad / cfg.n_r)[:, None], m, axis=1)
        floor = cfg.tol * np.maximum(rad, 1e-300)[:, None]
        for _ in range(cfg.max_iter):
            active = h > floor
            live = np.nonzero(active.any(axis=1))[0]
            if live.size == 0:
                break
            c, hl, rl = cand[live], h[live], rad[live]
            trial = c[:, :, None, :] + hl[:, :, None, None] * steps[None, None]
            tn = np.sqrt(np.einsum("...i,...i->...", trial, trial))
            over = tn > rl[:, None, None]
            scale = np.where(over, rl[:, None, None] / np.where(over, tn, 1.0), 1.0)
            trial = trial * scale[..., None]
            tv = objective(trial.reshape(live.size, m * 2 * dim, dim), rows[live])
            tv = np.asarray(tv, dtype=float)
            tv = np.where(np.isnan(tv), np.inf, tv).reshape(live.size, m, 2 * dim)
            j = np.argmin(tv, axis=-1)
            jv = np.take_along_axis(tv, j[..., None], axis=-1)[..., 0]
            act = active[live]
            improve = act & (jv < cval[live])
            jp = np.take_along_axis(trial, j[..., None, None], axis=2)[:, :, 0]
            cand[live] = np.where(improve[..., None], jp, c)
            cval[live] = np.where(improve, jv, cval[live])
            h[live] = np.where(act & ~improve, hl * cfg.shrink, hl)
        pick = _pick_rows(cval, cand)
        out_v[rows] = cand[np.arange(b), pick]
        out_val[rows] = cval[np.arange(b), pick]
    return out_v, out_val


def _pick_rows(cval, cand):
    return _ranked(cval, cand, 1)[:, 0]


def minimize_over_ball(objective, radius, dim=None, cfg=DEFAULT_SOLVER):
    """Minimize a chart function over the closed ball ``|v| <= radius``.

    Parameters
    ----------
    objective : callable
        Maps an array of chart vectors (K, dim) to values (K,).
    radius : float
    dim : int
        Chart dimension (required).
    cfg : SolverConfig

    Returns
    -------
    (ndarray, float)
        Best chart vector found and its value. The value never exceeds the
        coarse-grid minimum.
    """
    if dim is None:
        raise ValueError("dim is required")
    radius = float(radius)
    v, val = _minimize_batch(
        lambda V, rows: np.asarray(objective(V[0]), dtype=float)[None],
        np.array([radius]),
        dim,
        cfg,
    )
    return v[0], float(val[0])


# --- envelopes ---------------------------------------------------------------
def _check_radius(M, rho):
    limit = M.inj_radius - DELTA_CUT
    if np.any(rho >= limit):
        raise CutLocusExceeded(
            f"localization radius {np.max(rho):.6g} reaches the injectivity guard {limit:.6g}"
        )


def inf_convolve(f: ScalarField, lam, x, cfg=DEFAULT_SOLVER, mode=None):
    """Inf-convolution ``f_lam(x) = inf_y f(y) + d(x, y)^2 / (2 lam)``.

    Parameters
    ----------
    f : ScalarField
    lam : float
    x : array_like
        A point or a batch of points.
    cfg : SolverConfig
    mode : str, optional
        Localization rule (see :func:`localization_radius`).

    Returns
    -------
    (ndarray, ndarray)
        Values (leading shape of ``x``) and minimizing points.
    """
    M = f.manifold
    x = np.asarray(x, dtype=float)
    lead = x.shape[:-1]
    xs = x.reshape(-1, x.shape[-1])
    rho = np.atleast_1d(localization_radius(f, xs, lam, mode))
    _check_radius(M, rho)
    frames = M.orthonormal_frame(xs)
    inv2l = 1.0 / (2.0 * lam)

    def objective(V, rows):
        T = np.matmul(V, frames[rows])
        base = np.broadcast_to(xs[rows][:, None, :], T.shape[:2] + (xs.shape[-1],))
        Y = M.exp(base, T)
        return f(Y) + inv2l * np.einsum("...i,...i->...", V, V)

    v, val = _minimize_batch(objective, rho, M.dim, cfg)
    y = M.exp(xs, np.einsum("bn,bna->ba", v, frames))
    return val.reshape(lead), y.reshape(lead + (xs.shape[-1],))


def sup_convolve(g: ScalarField, mu, x, cfg=DEFAULT_SOLVER, mode=None):
    """Sup-convolution ``g^mu = -(-g)_mu``; returns values and maximizers."""
    val, y = inf_convolve(-g, mu, x, cfg, mode)
    return -val, y


def _quantized_key(p, step):
    return tuple(np.round(np.asarray(p) / step).astype(np.int64).tolist())


class _Memo:
    """Thread-safe cache of envelope values keyed by quantized coordinates."""

    def __init__(self, step=1e-4):
        self.step = step
        self.store = {}
        self.lock = threading.Lock()

    def lookup(self, pts):
        keys = [_quantized_key(p, self.step) for p in pts]
        with self.lock:
            found = [self.store.get(k) for k in keys]
        return keys, found

    def save(self, keys, vals):
        with self.lock:
            for k, v in zip(keys, vals):
                self.store[k] = float(v)


def moreau_field(f: ScalarField, lam, cfg=DEFAULT_SOLVER, mode=None, memoize=False):
    """The inf-convolution ``f_lam`` packaged as a :class:`ScalarField`.

    Metadata carried over: the bound (``|f_lam| <= |f|``), the infimum, the
    supremum (``f_lam <= f``), a quadratic minorant and majorant, and the
    Lipschitz constant when curvature is nonnegative.
    """
    M = f.manifold
    memo = _Memo() if memoize else None

    def fn(x):
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        flat = x.reshape(-1, x.shape[-1])
        if memo is None:
            return inf_convolve(f, lam, flat, cfg, mode)[0].reshape(lead)
        keys, found = memo.lookup(flat)
        miss = [i for i, v in enumerate(found) if v is None]
        out = np.array([np.nan if v is None else v for v in found])
        if miss:
            vals = inf_convolve(f, lam, flat[miss], cfg, mode)[0]
            out[miss] = vals
            memo.save([keys[i] for i in miss], vals)
        return out.reshape(lead)

    minorant = None
    if f.minorant is not None and 2.0 * lam * f.minorant[0] < 1.0:
        c, x0 = f.minorant
        if f.inf_value is not None and f.inf_value >= -c / 2:
            minorant = (c, x0)
        else:
            minorant = (2.0 * c, x0)
    majorant = f.majorant
    center = None
    if f.majorant is not None:
        center = f.majorant[1]
    elif f.minorant is not None:
        center = f.minorant[1]
    if center is not None:
        c_alt = max(1.0 / lam, 2.0 * max(float(f(center)), 0.0))
        if majorant is None or c_alt < majorant[0]:
            majorant = (c_alt, center)
    return ScalarField(
        M,
        fn,
        name=f"({f.name})_{lam:g}",
        bound=f.bound,
        lipschitz=f.lipschitz if M.curvature_min >= 0 else None,
        minorant=minorant,
        majorant=majorant,
        inf_value=f.inf_value,
        sup_value=f.sup_value,
        modulus=None,
    )


def lasry_lions(f: ScalarField, params: EnvelopeParams, x, cfg=DEFAULT_SOLVER, memoize=False):
    """The double envelope ``(f_lam)^mu`` at ``x`` (one point or a batch)."""
    params.check_composition()
    inner = moreau_field(f, params.lam, cfg, params.mode, memoize)
    return sup_convolve(inner, params.mu, x, cfg, params.mode)[0]
