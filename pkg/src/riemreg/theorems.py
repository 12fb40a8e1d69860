"""End-to-end verification suites: the admissible radius for the convexity
lemmas, the lemmas themselves, the regularization pipeline, the envelope
invariants and the two counterexamples (hyperbolic space and the warped
half-plane).

Each suite returns a :class:`~riemreg.analysis.CheckReport` whose ``rows``
feed the CSV writer of the command-line front end.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import bisect

from .analysis import (
    DEFAULT_DIFF,
    Ball,
    CheckReport,
    ProductBall,
    Row,
    combine,
    grad_lip_estimate,
    hessian_quadform,
    lipschitz_estimate,
    midpoint_convexity_check,
    semiconcavity_check,
    semiconvexity_check,
    slack,
)
from .envelope import (
    DEFAULT_SOLVER,
    EnvelopeParams,
    SolverConfig,
    inf_convolve,
    lasry_lions,
    moreau_field,
)
from .errors import NoFeasibleEpsilon
from .fields import ScalarField, cached, dist_sq
from .manifolds import Product, model
from .warped import WARPED, ConformalHalfPlane, curvature_check

#: Solver settings for suites that evaluate the double envelope thousands of
#: times: coarser grid and a looser step floor than the library default.
SUITE_SOLVER = SolverConfig(n_r=6, n_dir=12, max_iter=40, tol=1e-5, n_start=1)


# --- admissible radius -------------------------------------------------------
def h_eps(eps):
    """``h_eps`` at its maximizing argument ``A = 2``."""
    return (8 * eps + 1 - eps**2) / (2 * (1 - eps) ** 2 - 1 + eps**2)


def _radius_conditions(eps):
    # each g(t) <= 0 exactly where the corresponding inequality holds
    return (
        lambda t: (1 - eps) - t * math.sin(t) * math.cos(t) / math.sinh(t) ** 2,
        lambda t: t / math.sin(t) - (1 + eps),
        lambda t: t / math.tanh(t) - (1 + eps),
    )


def admissible_R(q, K0, xtol=1e-10):
    """Largest ``eps`` in (0, 1/4) with ``h_eps <= q`` and the largest ``R``
    for which the three curvature inequalities hold on ``(0, 2R]`` and
    ``2R < pi / (4 sqrt(K0))``.

    Returns
    -------
    (float, float, dict)
        ``eps``, ``R`` and the scaled critical value of each inequality.
    """
    if not q > 1:
        raise NoFeasibleEpsilon(f"q must exceed 1, got {q}")
    if not K0 > 0:
        raise ValueError(f"K0 must be positive, got {K0}")
    hi = 0.25
    if h_eps(hi) <= q:
        eps = hi * (1 - 1e-12)
    else:
        eps = bisect(lambda e: h_eps(e) - q, 0.0, hi, xtol=xtol)
    t_cap = math.pi / 4
    roots = {}
    for name, g in zip(("sin-cos", "sin", "coth"), _radius_conditions(eps)):
        roots[name] = t_cap if g(t_cap) <= 0 else bisect(g, 1e-8, t_cap, xtol=xtol)
    t_star = min(min(roots.values()), t_cap * (1 - 1e-12))
    R = t_star / (2 * math.sqrt(K0))
    return eps, R, roots


def lambda_zero(R, N):
    """Threshold ``R^2 / (4 N)`` on ``lambda`` (a grid value above it is
    flagged, not rejected)."""
    return R * R / (4 * N)


# --- convexity lemmas --------------------------------------------------------
def _pair_field(P, fn, name):
    return ScalarField(P, lambda z: fn(*P.split(np.asarray(z, float))), name=name)


def verify_convexity_lemma(M, q=2.0, C=1.0, x0=None, y0=None, n=10000, A=None, B=None,
                           K0=None, R=None, cfg=DEFAULT_DIFF):
    """Midpoint convexity of ``A d(x,y)^2 + B d(x,x0)^2 - C d(y,y0)^2`` on
    ``B(x0,R) x B(x0,R)`` and of ``B d(x,z0)^2 - C d(x,y0)^2`` on
    ``B(x0,R)``."""
    K0 = M.K0 if K0 is None else K0
    if R is None:
        eps, R, _ = admissible_R(q, K0 if K0 > 0 else 1e-12)
    A = 2.0 * C if A is None else A
    B = q * A if B is None else B
    x0 = M.origin() if x0 is None else np.asarray(x0, float)
    if y0 is None:
        e = np.zeros(M.dim)
        e[0] = 0.5 * R
        y0 = M.chart_exp(x0, e)
    P = Product(M, M)

    def phi(x, y):
        return A * M.dist(x, y) ** 2 + B * M.dist(x, x0) ** 2 - C * M.dist(y, y0) ** 2

    region = ProductBall(P, Ball(M, x0, R), Ball(M, x0, R))
    joint = midpoint_convexity_check(_pair_field(P, phi, "phi"), region, n, cfg, "convexity-lemma-joint")
    e = np.zeros(M.dim)
    e[-1] = 0.5 * R
    z0 = M.chart_exp(x0, e)
    single = ScalarField(M, lambda x: B * M.dist(x, z0) ** 2 - C * M.dist(x, y0) ** 2, name="phi2")
    part2 = midpoint_convexity_check(single, Ball(M, x0, R), n, cfg, "convexity-lemma-single")
    rep = combine("convexity-lemma", [joint, part2], repr(M),
                  {"q": q, "C": C, "A": A, "B": B, "R": R, "n": n}, cfg.seed)
    rep.rows = [
        Row("joint", joint.worst_violation, joint.slack, "pass" if joint.passed else "fail", q=q),
        Row("single", part2.worst_violation, part2.slack, "pass" if part2.passed else "fail", q=q),
    ]
    return rep


def nonpositive_constants(R, K0, C0):
    """``(eps, N, A0, B0)`` for the strong-convexity lemma on spaces with
    ``-K0 <= K <= 0``; ``A0`` is twice its lower threshold ``2/(1-eps)``."""
    tau = 2 * R * math.sqrt(K0)
    one_minus_eps = (tau / math.sinh(tau)) ** 2
    N = tau / math.tanh(tau)
    a0 = 2 * 2.0 / one_minus_eps
    b0 = 0.5 * (4 * a0**2 / (one_minus_eps * (one_minus_eps * a0 - 2)) - a0)
    scale = C0 * N if C0 > 0 else 1.0
    return 1 - one_minus_eps, N, scale * a0, scale * b0


def verify_nonpositive_lemma(M, R=1.0, C0=1.0, n=2000, x0=None, y0=None, B_factor=1.0,
                             cfg=DEFAULT_DIFF):
    """Strong midpoint convexity of ``A0 d(x,y)^2 + B0 d(x,x0)^2 - C0 d(y,y0)^2``
    on ``B(x0,R) x B(x0,R)`` with the lemma's constants."""
    K0 = max(M.K0, 1e-12)
    eps, N, A0, B0 = nonpositive_constants(R, K0, C0)
    B0 = B0 * B_factor
    x0 = M.origin() if x0 is None else np.asarray(x0, float)
    if y0 is None:
        e = np.zeros(M.dim)
        e[0] = 0.5 * R
        y0 = M.chart_exp(x0, e)
    P = Product(M, M)

    def phi(x, y):
        return A0 * M.dist(x, y) ** 2 + B0 * M.dist(x, x0) ** 2 - C0 * M.dist(y, y0) ** 2

    strength = None
    if C0 > 0:
        strength = lambda p, q: (1 - eps) * A0 * P.dist(p, q) ** 2 / 8  # noqa: E731
    region = ProductBall(P, Ball(M, x0, R), Ball(M, x0, R))
    rep = midpoint_convexity_check(_pair_field(P, phi, "phi"), region, n, cfg, "nonpositive-lemma",
                                   strength=strength)
    rep.params.update(R=R, C0=C0, eps=eps, N=N, A0=A0, B0=B0)
    rep.details.update(eps=eps, N=N, A0=A0, B0=B0)
    return rep


# --- regularization pipeline -------------------------------------------------
def _centers(M, around, radius, k, rng):
    if k <= 0:
        return np.empty((0, M.ambient_dim))
    return np.concatenate([np.asarray(around, float)[None], M.sample_ball(around, radius, k - 1, rng)])


def chart_disc_grid(M, center, radius, spacing):
    """Square-lattice points (spacing ``spacing``) of the chart disc of
    ``radius`` around ``center``, mapped to the manifold."""
    k = int(math.ceil(radius / spacing))
    ax = spacing * np.arange(-k, k + 1)
    mesh = np.stack(np.meshgrid(*([ax] * M.dim), indexing="ij"), axis=-1).reshape(-1, M.dim)
    mesh = mesh[np.linalg.norm(mesh, axis=-1) <= radius + 1e-12]
    base = np.broadcast_to(np.asarray(center, float), (len(mesh), M.ambient_dim))
    return M.chart_exp(base, mesh)


def verify_regularization(M, f, lam_grid=(0.04, 0.02, 0.01), q=2.0, K0=None, region_center=None,
                          region_radius=0.5, n_centers=3, n_pairs=64, n_grad_pairs=24,
                          grid_radius=0.6, grid_spacing=0.05, mu_factor=None, concavity_q=None,
                          solver=SUITE_SOLVER, cfg=DEFAULT_DIFF):
    """Run the four sub-checks of the regularization theorem for each lambda.

    (a) ``f_lam`` semiconcave with ``q/(2 lam)`` on ``B(c, R/2)``;
    (b) ``(f_lam)^mu`` semiconvex and semiconcave with ``q/(2 mu)``;
    (c) gradient Lipschitz estimate of ``(f_lam)^mu`` at most ``1.05 q/mu``;
    (d) grid maximum of ``|(f_lam)^mu - f|`` below the modulus bound and
        strictly decreasing along the grid.

    ``mu = lam / (2 q)`` unless ``mu_factor`` overrides the ratio; ``concavity_q``
    replaces ``q`` in the (b) constants (used to show the checker is sensitive).
    """
    K0 = M.K0 if K0 is None else K0
    eps, R, _ = admissible_R(q, K0 if K0 > 0 else 1e-12)
    N = f.bound
    lam0 = lambda_zero(R, N) if N else math.inf
    c = M.origin() if region_center is None else np.asarray(region_center, float)
    rng = np.random.default_rng(cfg.seed)
    centers = _centers(M, c, region_radius, n_centers, rng)
    grid = chart_disc_grid(M, c, grid_radius, grid_spacing)
    f_grid = f(grid)
    omega = f.modulus
    qb = q if concavity_q is None else concavity_q
    groups = {"a": [], "b": [], "c": [], "d": []}
    rows, errors = [], []
    for lam in lam_grid:
        mu = lam / (2 * q) if mu_factor is None else lam * mu_factor
        params = EnvelopeParams(lam, mu, q)
        params.check_composition()
        inner = cached(moreau_field(f, lam, solver))
        outer = cached(ScalarField(
            M, lambda z, lam=lam, mu=mu: lasry_lions(f, EnvelopeParams(lam, mu, q), z, solver),
            name=f"LL({lam:g},{mu:g})", bound=N))
        tag = f"lam={lam:g}"
        for k, x0 in enumerate(centers):
            a = semiconcavity_check(inner, q / (2 * lam), x0, R / 2, n_pairs, cfg)
            a.suite = f"a:semiconcave-f_lam[{tag},{k}]"
            b1 = semiconvexity_check(outer, qb / (2 * mu), x0, R / 2, n_pairs, cfg)
            b1.suite = f"b:semiconvex[{tag},{k}]"
            b2 = semiconcavity_check(outer, qb / (2 * mu), x0, R / 2, n_pairs, cfg)
            b2.suite = f"b:semiconcave[{tag},{k}]"
            lip = grad_lip_estimate(outer, Ball(M, x0, R / 2), n_grad_pairs, cfg)
            cap = 1.05 * q / mu
            c_rep = CheckReport(suite=f"c:grad-lip[{tag},{k}]", manifold=repr(M), seed=cfg.seed,
                                attempted=n_grad_pairs, evaluated=n_grad_pairs,
                                worst_violation=lip, slack=cap, passed=lip <= cap,
                                details={"ratio_to_q_over_mu": lip * mu / q})
            groups["a"].append(a)
            groups["b"] += [b1, b2]
            groups["c"].append(c_rep)
            for r in (a, b1, b2, c_rep):
                rows.append(Row(r.suite, r.worst_violation, r.slack,
                                "pass" if r.passed else "fail", lam, mu, q))
        err = float(np.max(np.abs(outer(grid) - f_grid)))
        bound = (omega(2 * math.sqrt(N * lam)) + omega(2 * math.sqrt(N * mu))) if omega and N else math.inf
        d_rep = CheckReport(suite=f"d:uniform-error[{tag}]", manifold=repr(M), seed=cfg.seed,
                            attempted=len(grid), evaluated=len(grid), worst_violation=err,
                            slack=bound, passed=err <= bound, details={"grid_points": len(grid)})
        groups["d"].append(d_rep)
        rows.append(Row(d_rep.suite, err, bound, "pass" if d_rep.passed else "fail", lam, mu, q))
        errors.append(err)
        if lam > lam0:
            rows.append(Row("flag:lambda>lambda0", lam, lam0, "info", lam, mu, q))
    # an exactly reproduced field (all errors zero) counts as decreasing
    decreasing = all(e1 < e0 or e0 == e1 == 0.0 for e0, e1 in zip(errors, errors[1:]))
    groups["d"].append(CheckReport(suite="d:decreasing", manifold=repr(M), seed=cfg.seed,
                                   attempted=len(errors), evaluated=len(errors),
                                   worst_violation=0.0 if decreasing else 1.0, slack=0.0,
                                   passed=decreasing, details={"errors": errors}))
    rows.append(Row("d:decreasing", float(decreasing), 1.0, "pass" if decreasing else "fail", q=q))
    names = {"a": "a:semiconcavity-f_lam", "b": "b:semiconvexity-semiconcavity",
             "c": "c:gradient-lipschitz", "d": "d:uniform-convergence"}
    children = [combine(names[k], v, repr(M), {"lam_grid": list(lam_grid), "q": q}, cfg.seed)
                for k, v in groups.items()]
    rep = combine("regularization", children, repr(M),
                  {"lam_grid": list(lam_grid), "q": q, "R": R, "eps": eps, "lambda0": lam0}, cfg.seed)
    rep.details.update(errors=errors, R=R, lambda0=lam0, flagged=[l for l in lam_grid if l > lam0])
    rep.rows = rows
    return rep


# --- envelope invariants -----------------------------------------------------
def verify_envelope_properties(M, f, h=None, lams=(0.1, 0.05), n=60, region_radius=1.0,
                               solver=DEFAULT_SOLVER, cfg=DEFAULT_DIFF, rotation=None):
    """Pointwise envelope properties on seeded samples:
    ``f_lam <= f``, monotonicity in ``lam``, ``inf f_lam >= inf f``,
    order preservation ``f <= h => f_lam <= h_lam``, the Lipschitz gap
    ``f - f_lam <= lam Lip^2 / 2`` and, when a rotation fixing ``f`` is
    given, invariance ``f_lam(T x) = f_lam(x)``."""
    lam1, lam2 = sorted(lams)
    x = M.sample_ball(M.origin(), region_radius, n, cfg.rng())
    fx = f(x)
    v1 = inf_convolve(f, lam1, x, solver)[0]
    v2 = inf_convolve(f, lam2, x, solver)[0]
    kids = []

    def leq(name, a, b, extra=0.0):
        tau = slack(a, b) + extra
        exc = a - b
        i = int(np.argmax(exc - tau))
        ok = bool(np.all(exc <= tau))
        kids.append(CheckReport(suite=name, manifold=repr(M), seed=cfg.seed, attempted=len(a),
                                evaluated=len(a), worst_violation=float(exc[i]), slack=float(tau[i]),
                                witness=[x[i].tolist()], passed=ok,
                                rows=[Row(name, float(exc[i]), float(tau[i]), "pass" if ok else "fail")]))

    leq("f_lam<=f", v1, fx)
    leq("f_lam2<=f_lam1", v2, v1)
    if f.inf_value is not None:
        leq("inf f<=f_lam", np.full_like(v1, f.inf_value), v1)
    if f.lipschitz is not None:
        leq("f-f_lam<=lam Lip^2/2", fx - v1, np.full_like(v1, lam1 * f.lipschitz**2 / 2))
    if h is not None:
        leq("f_lam<=h_lam", v1, inf_convolve(h, lam1, x, solver)[0])
    if rotation is not None:
        tx = x @ np.asarray(rotation).T
        diff = np.abs(inf_convolve(f, lam1, tx, solver)[0] - v1)
        leq("isometry-invariance", diff, np.zeros_like(diff), 1e-8)
    rep = combine("envelope-properties", kids, repr(M), {"lams": [lam1, lam2], "n": n}, cfg.seed)
    rep.rows = [r for k in kids for r in k.rows]
    return rep


def convergence_errors(M, f, lam_grid, center, radius, spacing=0.1, solver=DEFAULT_SOLVER):
    """Grid maximum of ``|f_lam - f|`` over the chart disc ``B(center, radius)``
    for each ``lam``."""
    pts = chart_disc_grid(M, center, radius, spacing)
    fv = f(pts)
    return [float(np.max(np.abs(inf_convolve(f, lam, pts, solver)[0] - fv))) for lam in lam_grid]


def convexity_preservation(M, f, lam, region_radius=1.0, n=200, solver=DEFAULT_SOLVER, cfg=DEFAULT_DIFF):
    """Midpoint convexity of ``f_lam`` for a convex ``f`` (nonpositive
    curvature); violations must stay below ``1e-8``."""
    g = cached(moreau_field(f, lam, solver))
    return midpoint_convexity_check(g, Ball(M, M.origin(), region_radius), n, cfg,
                                    "convexity-preservation", slack_fn=lambda a, b: 1e-8 + 0 * a)


# --- counterexamples ---------------------------------------------------------
def hyperbolic_closed_form(lam, mu=None, variant="stated"):
    """Coefficients of ``d(., x0)^2`` for ``f = d(., x0)^2`` on ``H^n``.

    ``variant="stated"`` gives the formulas quoted for the example:
    ``f_lam = (2+lam)/(2(1+lam)^2) d^2`` with the minimizer at
    ``lam/(1+lam) d``. ``variant="exact"`` gives the true minimum of
    ``(d-s)^2 + s^2/(2 lam)`` along the geodesic: ``d^2/(1+2 lam)`` at
    ``s = 2 lam d/(1+2 lam)``. Either way ``lam' = 1/(2 coefficient)`` and
    ``(f_lam)^mu = d^2 / (2 (lam' - mu))``.

    Returns
    -------
    dict
        ``inf`` and ``argmin`` coefficients, ``lam_prime`` and (with ``mu``)
        ``double``.
    """
    if variant == "stated":
        coef = (2 + lam) / (2 * (1 + lam) ** 2)
        arg = lam / (1 + lam)
    elif variant == "exact":
        coef = 1 / (1 + 2 * lam)
        arg = 2 * lam / (1 + 2 * lam)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    lam_p = 1 / (2 * coef)
    out = {"inf": coef, "argmin": arg, "lam_prime": lam_p}
    if mu is not None:
        out["double"] = 1 / (2 * (lam_p - mu))
    return out


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def counterexample_hyperbolic(lam=1.0, mu=0.25, distances=(0.5, 1.0, 2.0), q=2.0, rtol_inf=1e-3,
                              rtol_double=5e-3, solver=DEFAULT_SOLVER, cfg=DEFAULT_DIFF,
                              variants=("stated", "exact"), hessian=True):
    """Numerical envelopes of ``d(., x0)^2`` on ``H^2`` against closed forms.

    For every variant in ``variants`` and every distance the coefficient of
    ``f_lam``, the minimizer distance and the coefficient of ``(f_lam)^mu``
    are compared with the formulas of :func:`hyperbolic_closed_form`. The
    Hessian growth of ``(f_lam)^mu`` between ``d = 1`` and ``d = 6`` is
    checked against the factor 3.
    """
    H = model("hyperbolic", 2)
    x0 = H.origin()
    f = dist_sq(H, x0)
    d = np.asarray(distances, float)
    pts = H.chart_exp(np.broadcast_to(x0, (len(d), 3)), np.stack([d, 0 * d], -1))
    val, y = inf_convolve(f, lam, pts, solver)
    arg = H.dist(pts, y)
    double = lasry_lions(f, EnvelopeParams(lam, mu, q), pts, solver) if mu is not None else None
    kids, rows = [], []
    for variant in variants:
        ref = hyperbolic_closed_form(lam, mu, variant)
        errs = []
        for i, di in enumerate(d):
            checks = [("inf", val[i] / di**2, ref["inf"], rtol_inf),
                      ("argmin", arg[i] / di, ref["argmin"], rtol_inf)]
            if double is not None:
                checks.append(("double", double[i] / di**2, ref["double"], rtol_double))
            for name, got, want, tol in checks:
                e = _rel(got, want)
                errs.append((e / tol, e, tol))
                numeric = got * (di**2 if name != "argmin" else di)
                reference = want * (di**2 if name != "argmin" else di)
                rows.append(Row(f"{variant}:{name}:d={di:g}", numeric, reference,
                                "pass" if e <= tol else "fail", lam, mu))
        worst = max(errs)
        kids.append(CheckReport(suite=f"closed-form[{variant}]", manifold=repr(H), seed=cfg.seed,
                                attempted=len(errs), evaluated=len(errs), worst_violation=worst[1],
                                slack=worst[2], passed=all(e[0] <= 1 for e in errs),
                                params={"variant": variant}))
    if hessian and mu is not None:
        kids.append(hessian_growth_hyperbolic(lam, mu, q, solver=solver, cfg=cfg))
        rows += kids[-1].rows
    rep = combine("counterexample-hyperbolic", kids, repr(H), {"lam": lam, "mu": mu}, cfg.seed)
    rep.rows = rows
    return rep


def hessian_growth_hyperbolic(lam=1.0, mu=0.25, q=2.0, near=1.0, far=6.0, threshold=3.0,
                              solver=DEFAULT_SOLVER, cfg=DEFAULT_DIFF, field=None):
    """Transverse second derivative of ``(f_lam)^mu`` (or of ``field``) at
    distances ``near`` and ``far`` from ``x0``; passes when the ratio
    reaches ``threshold``."""
    H = model("hyperbolic", 2)
    x0 = H.origin()
    if field is None:
        f = dist_sq(H, x0)
        field = ScalarField(H, lambda z: lasry_lions(f, EnvelopeParams(lam, mu, q), z, solver),
                            name="LL(dist2)")
    pts = H.chart_exp(np.broadcast_to(x0, (2, 3)), np.array([[near, 0.0], [far, 0.0]]))
    transverse = H.orthonormal_frame(pts)[:, 1]
    hq = hessian_quadform(field, pts, transverse, cfg)
    ratio = float(hq[1] / hq[0])
    predicted = (far / math.tanh(far)) / (near / math.tanh(near))
    ok = ratio >= threshold
    return CheckReport(suite="hessian-growth", manifold=repr(H), seed=cfg.seed, attempted=2, evaluated=2,
                       worst_violation=-ratio, slack=-threshold, passed=ok,
                       details={"hessian": hq.tolist(), "ratio": ratio, "predicted": predicted},
                       rows=[Row("hessian-ratio", ratio, predicted, "pass" if ok else "fail", lam, mu)])


def warped_hessian_ratio(heights=(1.0, 2.0, 4.0), distance=0.5, lam=1.0, mu=0.25, cfg=DEFAULT_DIFF,
                         manifold=None):
    """Transverse Hessian of ``C d(., p)^2`` on the warped half-plane at
    ``q = (0, h)`` for each height ``h``.

    The center ``p`` is reached from ``q`` by the geodesic that leaves
    horizontally with length ``distance``, so the Hessian is taken along the
    vertical unit vector at ``q``, orthogonal to that geodesic. ``C`` is the
    coefficient of the locally quadratic double envelope,
    ``1/(2(lam' - mu))`` with the exact ``lam'``; the growth ratio does not
    depend on it.
    """
    M = ConformalHalfPlane(WARPED) if manifold is None else manifold
    C = hyperbolic_closed_form(lam, mu, "exact")["double"]
    out = []
    for h in heights:
        q = np.array([0.0, h])
        horizontal, vertical = M.orthonormal_frame(q)
        p = M.exp(q, distance * horizontal)
        g = ScalarField(M, lambda z, p=p: C * M.dist(z, p) ** 2, name="C dist2")
        out.append(float(hessian_quadform(g, q, vertical, cfg)))
    return np.array(out)


def comparison_hessian(heights, distance, scale=1.0):
    """Hessian of ``scale * d^2`` transverse to a geodesic of length
    ``distance`` in constant curvature ``-2 h^2``: ``2 a d coth(a d)``."""
    ad = np.sqrt(2.0) * np.asarray(heights, float) * distance
    return scale * 2.0 * ad / np.tanh(ad)


def counterexample_warped(points=None, heights=(1.0, 2.0, 4.0), lam=1.0, mu=0.25, threshold=2.0,
                          curvature_rtol=1e-3, distance=0.5, cfg=DEFAULT_DIFF):
    """Curvature formula and Hessian growth on the warped half-plane."""
    if points is None:
        xs = np.linspace(0.5, 4.0, 10)
        points = np.stack([np.linspace(-1.0, 1.0, 10), xs], -1)
    points = np.asarray(points, float)
    rows, errs = [], []
    for i, p in enumerate(points):
        analytic = float(WARPED.gauss_curvature(p))
        est = float(curvature_check(WARPED, p))
        e = _rel(est, analytic)
        errs.append(e)
        rows.append(Row(f"curvature[{i}]", est, analytic, "pass" if e <= curvature_rtol else "fail"))
    k = int(np.argmax(errs))
    curv = CheckReport(suite="warped-curvature", manifold="warped-halfplane", seed=cfg.seed,
                       attempted=len(points), evaluated=len(points), worst_violation=errs[k],
                       slack=curvature_rtol, witness=[points[k].tolist()], passed=max(errs) <= curvature_rtol)
    hq = warped_hessian_ratio(heights, distance, lam=lam, mu=mu, cfg=cfg)
    comp = comparison_hessian(heights, distance, hyperbolic_closed_form(lam, mu, "exact")["double"])
    ratio = float(hq[-1] / hq[0])
    grow = CheckReport(suite="warped-hessian-growth", manifold="warped-halfplane", seed=cfg.seed,
                       attempted=len(heights), evaluated=len(heights), worst_violation=-ratio,
                       slack=-threshold, passed=ratio >= threshold,
                       details={"heights": list(heights), "hessian": hq.tolist(), "ratio": ratio,
                                "comparison": comp.tolist(), "comparison_ratio": float(comp[-1] / comp[0])})
    for h, v, c in zip(heights, hq, comp):
        rows.append(Row(f"hessian:x2={h:g}", v, float(c), "info", lam, mu))
    rows.append(Row("hessian-ratio", ratio, threshold, "pass" if grow.passed else "fail", lam, mu))
    rep = combine("counterexample-warped", [curv, grow], "warped-halfplane", {"lam": lam, "mu": mu}, cfg.seed)
    rep.rows = rows
    return rep


# --- Lipschitz preservation --------------------------------------------------
def lipschitz_preservation(M, f, lam_grid=(0.05, 0.02, 0.01), region=None, n=400,
                           solver=DEFAULT_SOLVER, cfg=DEFAULT_DIFF, upper=1.05, lower=0.95,
                           lower_below=0.01):
    """Estimated ``Lip(f_lam)`` for each ``lam``: at most ``upper * Lip(f)``
    everywhere on the grid and at least ``lower * Lip(f)`` once
    ``lam <= lower_below``."""
    region = region or Ball(M, M.origin(), 1.5)
    L = f.lipschitz
    kids, rows = [], []
    for lam in lam_grid:
        g = moreau_field(f, lam, solver)
        est = lipschitz_estimate(g, region, n, cfg)
        ok = est <= upper * L and (lam > lower_below or est >= lower * L)
        kids.append(CheckReport(suite=f"lip[lam={lam:g}]", manifold=repr(M), seed=cfg.seed, attempted=n,
                                evaluated=n, worst_violation=est, slack=upper * L, passed=ok,
                                details={"estimate": est}))
        rows.append(Row(f"lip:lam={lam:g}", est, L, "pass" if ok else "fail", lam))
    rep = combine("lipschitz", kids, repr(M), {"lam_grid": list(lam_grid)}, cfg.seed)
    rep.rows = rows
    return rep
