"""Small helpers shared by the test modules."""

import numpy as np


def ray_point(M, d, axis=0):
    """Point at distance ``d`` from the base point along a frame vector."""
    c = np.zeros(M.dim)
    c[axis] = d
    return M.chart_exp(M.origin(), c)

