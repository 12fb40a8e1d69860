"""How far d exp_x(v) is from parallel transport, as |v| shrinks.

On constant curvature the gap is |sin(r)/r - 1| or |sinh(r)/r - 1|, of
order r^2 / 6. The script prints the measured gaps beside the closed form
and the least-squares slope of log gap against log r.

Run: python3 demos/transport_gap_order.py
"""

import numpy as np

from riemreg import model
from riemreg.analysis import gap_closed_form, gap_order_fit


def main():
    t = np.geomspace(1e-3, 1e-1, 5)
    for kind in ("sphere", "hyperbolic"):
        M = model(kind, 2)
        x = M.origin()
        u = M.orthonormal_frame(x)[0]
        for which in ("dexp", "invexp"):
            slope, gaps = gap_order_fit(M, x, u, t, which)
            ref = gap_closed_form(M, t, "dexp" if which == "dexp" else "inv")
            print(f"{kind} {which}: slope {slope:.4f}")
            for ti, g, r in zip(t, gaps, ref):
                print(f"   r={ti:<8.3g} gap {g:.6e}   closed form {r:.6e}")


if __name__ == "__main__":
    main()
