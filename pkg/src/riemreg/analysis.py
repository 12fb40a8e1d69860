"""Finite-difference estimators in exponential charts and the checkers built
on them: midpoint convexity, semiconvexity, gradient Lipschitz constants,
exp/transport gaps and the C^{1,1} constant cross-check.

Every checker returns a :class:`CheckReport`. Sampling is seeded and all
reductions are plain maxima, so the reports are reproducible.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .envelope import unit_directions
from .fields import ScalarField, dist_sq

DEFAULT_SEED = 3735928559


@dataclass(frozen=True)
class DiffConfig:
    h_grad: float = 1e-5
    h_hess: float = 1e-3
    n_samples: int = 1000
    n_pairs: int = 200
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if not (self.h_grad > 0 and self.h_hess > 0):
            raise ValueError("finite-difference steps must be positive")
        if self.h_hess < self.h_grad:
            raise ValueError("h_hess must be at least h_grad")
        if self.n_samples <= 0 or self.n_pairs <= 0:
            raise ValueError("sample counts must be positive")

    def rng(self):
        return np.random.default_rng(self.seed)


DEFAULT_DIFF = DiffConfig()


def slack(a, b):
    """Comparison slack ``1e-9 + 1e-7 max(|a|, |b|)``."""
    return 1e-9 + 1e-7 * np.maximum(np.abs(a), np.abs(b))


@dataclass
class Row:
    """One CSV line of a report."""

    point_id: str
    value_numeric: float
    value_reference: float | None = None
    status: str = "info"
    lam: float | None = None
    mu: float | None = None
    q: float | None = None

    def __post_init__(self):
        for name in ("value_numeric", "value_reference", "lam", "mu", "q"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, float(v))


@dataclass
class CheckReport:
    """Outcome of a verification run.

    ``passed`` holds exactly when ``worst_violation <= slack``; both are
    taken at the witness sample (the one closest to failing).
    """

    suite: str
    manifold: str = ""
    params: dict = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    attempted: int = 0
    evaluated: int = 0
    worst_violation: float = 0.0
    slack: float = 0.0
    witness: list = field(default_factory=list)
    passed: bool = True
    details: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    children: list = field(default_factory=list)

    @property
    def all_passed(self):
        return self.passed and all(c.all_passed for c in self.children)

    def to_dict(self):
        out = asdict(self)
        out["all_passed"] = self.all_passed
        return _jsonable(out)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def combine(suite, children, manifold="", params=None, seed=DEFAULT_SEED):
    """Parent report that passes iff every child does; the witness is the
    worst child."""
    worst = max(children, key=lambda r: r.worst_violation - r.slack)
    return CheckReport(
        suite=suite,
        manifold=manifold,
        params=params or {},
        seed=seed,
        attempted=sum(c.attempted for c in children),
        evaluated=sum(c.evaluated for c in children),
        worst_violation=worst.worst_violation,
        slack=worst.slack,
        witness=worst.witness,
        passed=all(c.all_passed for c in children),
        children=list(children),
    )


# --- regions -----------------------------------------------------------------
@dataclass(frozen=True)
class Ball:
    """Geodesic ball ``B(center, radius)`` on ``manifold``."""

    manifold: object
    center: np.ndarray
    radius: float

    def sample(self, n, rng):
        return self.manifold.sample_ball(np.asarray(self.center, float), self.radius, n, rng)

    def boundary(self, n):
        """``n`` deterministic points on the bounding sphere (2-D charts get
        equally spaced angles)."""
        dirs = unit_directions(self.manifold.dim, n)[:n]
        c = np.broadcast_to(np.asarray(self.center, float), (len(dirs), len(self.center)))
        return self.manifold.chart_exp(c, self.radius * dirs)


@dataclass(frozen=True)
class ProductBall:
    """``B(c1, r1) x B(c2, r2)`` inside a product manifold."""

    manifold: object
    first: Ball
    second: Ball

    def sample(self, n, rng):
        a = self.first.sample(n, rng)
        b = self.second.sample(n, rng)
        return self.manifold.join(a, b)


def _as_callable(f):
    return f if callable(f) else (lambda x: f(x))


# --- derivatives -------------------------------------------------------------
def chart_gradient(f, x, u=None, cfg=DEFAULT_DIFF):
    """Gradient of the chart function ``F = f o exp_x o frame`` at chart
    vector ``u`` (zero by default) by central differences.

    Parameters
    ----------
    f : callable
    x : ndarray
        Base points (b, ambient) or a single point.
    u : ndarray, optional
        Chart vectors (b, dim).

    Returns
    -------
    ndarray
        Components (b, dim) in the orthonormal frame at ``x``.
    """
    M = _manifold_of(f)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    n = M.dim
    uu = np.zeros((len(xs), n)) if u is None else np.atleast_2d(np.asarray(u, float))
    h = cfg.h_grad
    E = np.eye(n)
    offs = np.concatenate([E, -E]) * h
    pts = uu[:, None, :] + offs[None]
    base = np.broadcast_to(xs[:, None, :], (len(xs), 2 * n, xs.shape[-1]))
    vals = np.asarray(f(M.chart_exp(base, pts)))
    g = (vals[:, :n] - vals[:, n:]) / (2 * h)
    return g[0] if single else g


def num_gradient(f, x, cfg=DEFAULT_DIFF):
    """Riemannian gradient of ``f`` at ``x`` as an ambient tangent vector."""
    M = _manifold_of(f)
    x = np.asarray(x, dtype=float)
    comps = chart_gradient(f, x, None, cfg)
    return np.einsum("...i,...ij->...j", comps, M.orthonormal_frame(x))


def hessian_quadform(f, x, v, cfg=DEFAULT_DIFF):
    """Second derivative of ``t -> f(exp_x(t v))`` at 0 for unit ``v``.

    Symmetric second differences at ``t`` and ``t/2`` combined by one
    Richardson step, ``(4 D(t/2) - D(t)) / 3``.
    """
    M = _manifold_of(f)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    x, v = np.broadcast_arrays(x, v)
    t = cfg.h_hess
    steps = np.array([t, -t, t / 2, -t / 2])
    base = np.broadcast_to(x[..., None, :], x.shape[:-1] + (5, x.shape[-1]))
    tang = np.concatenate([steps[:, None] * v[..., None, :], 0 * v[..., None, :]], axis=-2)
    vals = np.asarray(f(M.exp(base, tang)))
    f0 = vals[..., 4]
    d1 = (vals[..., 0] - 2 * f0 + vals[..., 1]) / t**2
    d2 = (vals[..., 2] - 2 * f0 + vals[..., 3]) / (t / 2) ** 2
    return (4 * d2 - d1) / 3


def hessian_matrix(f, x, cfg=DEFAULT_DIFF):
    """Chart Hessian (dim x dim) at ``x`` assembled from quadratic forms
    along frame vectors and their pairwise sums."""
    M = _manifold_of(f)
    x = np.asarray(x, dtype=float)
    frame = M.orthonormal_frame(x)
    n = M.dim
    dirs, idx = [], []
    for i in range(n):
        dirs.append(frame[..., i, :])
        idx.append((i, i))
    for i in range(n):
        for j in range(i + 1, n):
            dirs.append((frame[..., i, :] + frame[..., j, :]) / np.sqrt(2))
            idx.append((i, j))
    D = np.stack(dirs, axis=-2)
    q = hessian_quadform(f, x[..., None, :], D, cfg)
    H = np.zeros(x.shape[:-1] + (n, n))
    for k, (i, j) in enumerate(idx):
        if i == j:
            H[..., i, i] = q[..., k]
    for k, (i, j) in enumerate(idx):
        if i != j:
            off = q[..., k] - 0.5 * (H[..., i, i] + H[..., j, j])
            H[..., i, j] = H[..., j, i] = off
    return H


def _manifold_of(f):
    M = getattr(f, "manifold", None)
    if M is None:
        raise TypeError("expected a ScalarField (needs .manifold)")
    return M


def _pairs(ball, n, rng, dmin=1e-3):
    M = ball.manifold
    x = ball.sample(n, rng)
    y = ball.sample(n, rng)
    d = M.dist(x, y)
    keep = d >= dmin
    return x[keep], y[keep], d[keep]


def grad_lip_estimate(f, ball, n_pairs=None, cfg=DEFAULT_DIFF):
    """Largest ``|grad f(x) - L_{yx} grad f(y)| / d(x, y)`` over seeded
    pairs in ``ball`` with ``d(x, y) >= 1e-3``."""
    M = _manifold_of(f)
    rng = cfg.rng()
    x, y, d = _pairs(ball, n_pairs or cfg.n_pairs, rng)
    g = num_gradient(f, np.concatenate([x, y]), cfg)
    gx, gy = g[: len(x)], g[len(x):]
    diff = gx - M.parallel_transport(y, x, gy)
    q = M.norm(x, diff) / d
    return float(np.max(q)) if q.size else 0.0


def lipschitz_estimate(f, ball, n=None, cfg=DEFAULT_DIFF):
    """Largest numerical gradient norm of ``f`` over seeded samples in
    ``ball`` (a lower estimate of ``Lip(f)`` on that ball)."""
    _manifold_of(f)
    x = ball.sample(n or cfg.n_samples, cfg.rng())
    comps = chart_gradient(f, x, None, cfg)
    return float(np.max(np.linalg.norm(comps, axis=-1)))


# --- convexity ---------------------------------------------------------------
def midpoint_convexity_check(F, region, n_samples=None, cfg=DEFAULT_DIFF, suite="midpoint-convexity",
                             strength: Callable | None = None, slack_fn=slack):
    """Test ``F(m) <= (F(p) + F(q)) / 2 + tau`` at geodesic midpoints.

    Parameters
    ----------
    F : ScalarField
    region : Ball or ProductBall
    n_samples : int, optional
    strength : callable, optional
        ``strength(p, q)`` is subtracted from the right-hand side, turning
        the test into a strong-convexity test.
    slack_fn : callable
        ``slack_fn(a, b)`` gives the tolerance for comparing ``a`` and ``b``.
    """
    M = region.manifold
    n = n_samples or cfg.n_samples
    rng = cfg.rng()
    p = region.sample(n, rng)
    q = region.sample(n, rng)
    m = M.midpoint(p, q)
    vals = np.asarray(F(np.concatenate([p, q, m])))
    fp, fq, fm = vals[:n], vals[n:2 * n], vals[2 * n:]
    avg = 0.5 * (fp + fq)
    rhs = avg - (strength(p, q) if strength is not None else 0.0)
    excess = fm - rhs
    tau = slack_fn(fm, rhs)
    ok = np.isfinite(excess)
    i = int(np.argmax(np.where(ok, excess - tau, -np.inf)))
    worst, sl = float(excess[i]), float(tau[i])
    return CheckReport(
        suite=suite,
        manifold=repr(M),
        params={"n_samples": n},
        seed=cfg.seed,
        attempted=n,
        evaluated=int(ok.sum()),
        worst_violation=worst,
        slack=sl,
        witness=[p[i].tolist(), q[i].tolist()],
        passed=bool(worst <= sl and ok.all()),
        rows=[Row("worst", worst, sl, "pass" if worst <= sl else "fail")],
    )


def _as_field(f, M):
    if isinstance(f, ScalarField):
        return f
    return ScalarField(M, f, name=getattr(f, "__name__", "field"))


def semiconvexity_check(f, C, x0, R, n=None, cfg=DEFAULT_DIFF):
    """Convexity of ``f + C d(., x0)^2`` on ``B(x0, R)``."""
    M = _manifold_of(f)
    F = f + dist_sq(M, x0, C)
    rep = midpoint_convexity_check(F, Ball(M, np.asarray(x0, float), R), n, cfg, "semiconvexity")
    rep.params.update(C=C, R=R)
    return rep


def semiconcavity_check(f, C, x0, R, n=None, cfg=DEFAULT_DIFF):
    """Concavity of ``f - C d(., x0)^2`` on ``B(x0, R)``."""
    M = _manifold_of(f)
    F = (-f) + dist_sq(M, x0, C)
    rep = midpoint_convexity_check(F, Ball(M, np.asarray(x0, float), R), n, cfg, "semiconcavity")
    rep.params.update(C=C, R=R)
    return rep


# --- exp / transport gaps -----------------------------------------------------
def _dexp_matrix(M, x, v):
    """Matrix of ``dexp_x(v)`` from the frame at ``x`` to the transported
    frame at ``y = exp_x(v)``; the transported frame is orthonormal, so the
    transport itself is the identity matrix in these bases."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    y = M.exp(x, v)
    E = M.orthonormal_frame(x)
    n = M.dim
    cols = np.stack([M.dexp(x, v, E[..., j, :]) for j in range(n)], axis=-2)
    F = np.stack([M.parallel_transport(x, y, E[..., i, :]) for i in range(n)], axis=-2)
    yy = y[..., None, None, :]
    return M.inner(yy, F[..., :, None, :], cols[..., None, :, :])


def dexp_transport_gap(M, x, v):
    """Operator norm of ``dexp_x(v) - L_{x, exp_x v}``."""
    D = _dexp_matrix(M, x, v)
    return np.linalg.norm(D - np.eye(M.dim), ord=2, axis=(-2, -1))


def invexp_transport_gap(M, x, v):
    """Operator norm of ``d(exp_x^{-1})(y) o L_{xy} - I`` with ``y = exp_x v``."""
    D = _dexp_matrix(M, x, v)
    return np.linalg.norm(np.linalg.inv(D) - np.eye(M.dim), ord=2, axis=(-2, -1))


def sampled_operator_norm(M, x, v, which="dexp", n_dir=256):
    """Same gap as above, estimated by 256 unit directions (2-D charts)."""
    D = _dexp_matrix(M, x, v)
    A = D - np.eye(M.dim) if which == "dexp" else np.linalg.inv(D) - np.eye(M.dim)
    dirs = unit_directions(M.dim, n_dir)
    return float(np.max(np.linalg.norm(dirs @ A.T, axis=-1)))


def gap_closed_form(M, r, which="dexp"):
    """Constant-curvature gap as a function of ``r = |v|``."""
    if M.kind == "euclidean":
        return np.zeros_like(np.asarray(r, float))
    theta = np.sqrt(abs(M.curvature)) * np.asarray(r, float)
    if M.kind == "sphere":
        ratio = np.sin(theta) / theta
    else:
        ratio = np.sinh(theta) / theta
    return np.abs(ratio - 1.0) if which == "dexp" else np.abs(1.0 / ratio - 1.0)


def gap_order_fit(M, x, direction, t_list, which="dexp"):
    """Least-squares slope of ``log gap`` against ``log t`` along ``t * direction``.

    Returns
    -------
    (float, ndarray)
        Slope and the gaps themselves.
    """
    t = np.asarray(t_list, dtype=float)
    u = np.asarray(direction, dtype=float)
    u = u / M.norm(x, u)
    fn = dexp_transport_gap if which == "dexp" else invexp_transport_gap
    gaps = np.array([float(fn(M, x, ti * u)) for ti in t])
    slope = np.polyfit(np.log(t), np.log(gaps), 1)[0]
    return float(slope), gaps


def exp_comparison_check(M, eps, r, n=None, cfg=DEFAULT_DIFF, x=None):
    """Check ``d(exp_x(L_{zx} w), exp_z w) <= (1 + eps) d(x, z)`` for
    ``d(x, z) <= r`` and ``|w| <= r``; reports the smallest ``eps`` that
    would have passed on the samples."""
    n = n or cfg.n_samples
    rng = cfg.rng()
    x0 = M.origin() if x is None else np.asarray(x, float)
    xs = np.broadcast_to(x0, (n, x0.size)).copy()
    z = M.sample_ball(x0, r, n, rng)
    c = rng.standard_normal((n, M.dim))
    c *= (r * rng.random(n) ** (1 / M.dim) / np.linalg.norm(c, axis=-1))[:, None]
    w = M.to_tangent(z, c)
    lhs = M.dist(M.exp(xs, M.parallel_transport(z, xs, w)), M.exp(z, w))
    d = M.dist(xs, z)
    rhs = (1.0 + eps) * d
    tau = slack(lhs, rhs)
    excess = lhs - rhs
    i = int(np.argmax(excess - tau))
    ok = d > 0
    needed = float(np.max(np.where(ok, lhs / np.where(ok, d, 1.0) - 1.0, 0.0)))
    worst, sl = float(excess[i]), float(tau[i])
    return CheckReport(
        suite="exp-comparison",
        manifold=repr(M),
        params={"eps": eps, "r": r, "n": n},
        seed=cfg.seed,
        attempted=n,
        evaluated=n,
        worst_violation=worst,
        slack=sl,
        witness=[xs[i].tolist(), z[i].tolist()],
        passed=worst <= sl,
        details={"minimal_eps": max(needed, 0.0)},
        rows=[Row("minimal_eps", max(needed, 0.0), eps, "pass" if worst <= sl else "fail")],
    )


# --- C^{1,1} constants ---------------------------------------------------------
def c11_constants(f, x0, R, n=64, cfg=DEFAULT_DIFF, t=1e-3, s=1e-2, n_dir=8):
    """Estimate the gradient-Lipschitz constant four ways on ``B(x0, R)``.

    Uses one shared sample set (seeded interior points plus the boundary
    circle) and ``n_dir`` unit chart directions:

    * ``transport``: ``|L_{yx} grad f(y) - grad f(x)| / t`` for ``y = exp_x(t u)``;
    * ``taylor``: ``2 |F(s u) - F(0) - <grad F(0), s u>| / s^2`` in the chart;
    * ``chart_gradient``: ``|grad F(s u) - grad F(0)| / s`` in the chart;
    * ``hessian``: spectral norm of the chart Hessian.
    """
    M = _manifold_of(f)
    ball = Ball(M, np.asarray(x0, float), R)
    pts = np.concatenate([ball.sample(n, cfg.rng()), ball.boundary(n_dir)])
    dirs = unit_directions(M.dim, n_dir)
    P, U = _grid_pairs(pts, dirs)
    frames = M.orthonormal_frame(P)
    T = np.einsum("bi,bij->bj", U, frames)
    gx = num_gradient(f, P, cfg)
    y = M.exp(P, t * T)
    gy = num_gradient(f, y, cfg)
    c_transport = np.max(M.norm(P, M.parallel_transport(y, P, gy) - gx) / t)
    F0 = f(P)
    G0 = chart_gradient(f, P, None, cfg)
    Fs = f(M.chart_exp(P, s * U))
    c_taylor = np.max(2 * np.abs(Fs - F0 - s * np.sum(G0 * U, axis=-1)) / s**2)
    Gs = chart_gradient(f, P, s * U, cfg)
    c_chart = np.max(np.linalg.norm(Gs - G0, axis=-1) / s)
    H = hessian_matrix(f, pts, cfg)
    c_hess = np.max(np.linalg.norm(H, ord=2, axis=(-2, -1)))
    return {
        "transport": float(c_transport),
        "taylor": float(c_taylor),
        "chart_gradient": float(c_chart),
        "hessian": float(c_hess),
    }


def _grid_pairs(pts, dirs):
    P = np.repeat(pts, len(dirs), axis=0)
    U = np.tile(dirs, (len(pts), 1))
    return P, U


def c11_crosscheck(f, x0, R, C_claim=None, n=64, cfg=DEFAULT_DIFF, spread_tol=0.15):
    """Pass when the four constants of :func:`c11_constants` agree within
    ``spread_tol`` relative spread (and stay below ``C_claim`` by the same
    margin when a claim is given)."""
    M = _manifold_of(f)
    consts = c11_constants(f, x0, R, n, cfg)
    vals = np.array(list(consts.values()))
    spread = float((vals.max() - vals.min()) / vals.max()) if vals.max() > 0 else 0.0
    ok = spread <= spread_tol
    if C_claim is not None:
        ok = ok and vals.max() <= C_claim * (1 + spread_tol)
    rows = [Row(k, v, C_claim, "info") for k, v in consts.items()]
    rows.append(Row("spread", spread, spread_tol, "pass" if ok else "fail"))
    return CheckReport(
        suite="c11",
        manifold=repr(M),
        params={"R": R, "C_claim": C_claim, "n": n},
        seed=cfg.seed,
        attempted=len(consts),
        evaluated=len(consts),
        worst_violation=spread,
        slack=spread_tol,
        passed=bool(ok),
        details=consts,
        rows=rows,
    )
