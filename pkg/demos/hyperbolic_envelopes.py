"""Envelopes of f = d(., x0)^2 on the hyperbolic plane.

Along a geodesic ray the problem reduces to one dimension, so the
inf-convolution is d^2 / (1 + 2 lam) with the minimizer at 2 lam d / (1 + 2 lam).
The often quoted alternative (2 + lam) / (2 (1 + lam)^2) d^2 is printed next
to it for comparison. The last part shows the transverse Hessian of d^2
growing like d coth d, so no single C^{1,1} constant works on all of H^2.

Run: python3 demos/hyperbolic_envelopes.py
"""

import numpy as np

from riemreg import model
from riemreg.analysis import hessian_quadform
from riemreg.envelope import EnvelopeParams, inf_convolve, lasry_lions
from riemreg.fields import dist_sq
from riemreg.theorems import hyperbolic_closed_form


def main():
    H = model("hyperbolic", 2)
    x0 = H.origin()
    f = dist_sq(H, x0)
    d = np.array([0.5, 1.0, 2.0])
    pts = H.chart_exp(np.broadcast_to(x0, (3, 3)), np.stack([d, 0 * d], -1))

    print("lam    d    f_lam/d^2   exact      quoted     |y-x|/d    exact      quoted")
    for lam in (0.5, 1.0):
        val, y = inf_convolve(f, lam, pts)
        exact = hyperbolic_closed_form(lam, variant="exact")
        quoted = hyperbolic_closed_form(lam, variant="stated")
        for di, v, yi, xi in zip(d, val, y, pts):
            print(f"{lam:<5g}{di:<5g}{v / di**2:<12.8f}{exact['inf']:<11.6f}{quoted['inf']:<11.6f}"
                  f"{H.dist(xi, yi) / di:<11.6f}{exact['argmin']:<11.6f}{quoted['argmin']:.6f}")

    lam, mu = 1.0, 0.25
    ll = lasry_lions(f, EnvelopeParams(lam, mu, 2.0), pts) / d**2
    print(f"\n(f_lam)^mu / d^2 at lam={lam}, mu={mu}: {np.round(ll, 8)}")
    print(f"exact 1/(2(lam'-mu)) = {hyperbolic_closed_form(lam, mu, 'exact')['double']:.8f}, "
          f"quoted = {hyperbolic_closed_form(lam, mu, 'stated')['double']:.8f}")

    print("\ntransverse Hessian of d^2 versus 2 d coth d")
    for di in (1.0, 2.0, 4.0, 6.0):
        x = H.chart_exp(x0, np.array([di, 0.0]))
        v = H.orthonormal_frame(x)[1]
        print(f"d={di:<4g} numeric {float(hessian_quadform(f, x, v)):10.6f}   "
              f"closed form {2 * di / np.tanh(di):10.6f}")


if __name__ == "__main__":
    main()
