"""The half-plane with metric |dx|^2 / x2^4.

Its Gauss curvature is -2 x2^2, unbounded below as x2 grows. The script
checks that value by the circumference deficit of small geodesic circles,
then shows the Hessian of C d(., p)^2 at a fixed distance from p growing
with height, next to the constant-curvature comparison value.

Run: python3 demos/warped_halfplane.py
"""

import numpy as np

from riemreg.theorems import comparison_hessian, warped_hessian_ratio
from riemreg.warped import WARPED, curvature_check, gauss_curvature


def main():
    print("height   analytic K   circumference estimate")
    for h in (0.5, 1.0, 2.0, 4.0):
        p = np.array([0.0, h])
        print(f"{h:<8g} {gauss_curvature(WARPED, p):<12.6f} {curvature_check(WARPED, p):.6f}")
    heights = (1.0, 2.0, 4.0)
    hq = warped_hessian_ratio(heights)
    comp = comparison_hessian(heights, 0.5, 0.4)
    print("\nHessian of 0.4 d(., p)^2 at distance 0.5, transverse to the geodesic")
    for h, v, c in zip(heights, hq, comp):
        print(f"x2={h:<4g} numeric {v:9.5f}   constant-curvature comparison {c:9.5f}")
    print(f"growth ratio x2=4 / x2=1: {hq[-1] / hq[0]:.4f}")


if __name__ == "__main__":
    main()
