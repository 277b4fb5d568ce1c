"""Pure-numpy fixed-point kernel for the self-consistent density solve.

Mirrors the compiled kernel in ``_scf.pyx``; keep the two in sync. The
iteration is

    eps(x)  = b0(x) + ramp * (C @ n)(x)
    n_new   = (g_0 / beta) * log(1 + exp(-beta * (eps - mu)))
    n      <- (1 - mix) * n + mix * n_new

with the Coulomb coupling ramped linearly over the first ``ramp_iters``
iterations. The stopping test uses the unmixed fixed-point residual
``max|n_new - n|`` evaluated only once the ramp is complete, so a converged
result reproduces itself through the full-strength map to within ``tol``.
"""

from __future__ import annotations

import numpy as np


def scf_fixed_point(b0, C, g0, beta, mu, mix, ramp_iters, tol, max_iter):
    """Run the damped fixed-point iteration from n = 0.

    b0  bare band minimum (eV) per grid point
    C   interaction matrix (eV per nm^-1): Coulomb kernel times quadrature
        weights

    Returns (n, band_min, residual, iterations, converged) where residual
    is the recomputed full-strength fixed-point residual of the returned n.
    """
    b0 = np.asarray(b0, dtype=float)
    C = np.asarray(C, dtype=float)
    n = np.zeros_like(b0)
    iterations = 0
    for it in range(1, max_iter + 1):
        iterations = it
        ramp = 1.0 if ramp_iters <= 0 else min(1.0, it / ramp_iters)
        eps = b0 + ramp * (C @ n)
        n_new = (g0 / beta) * np.logaddexp(0.0, -beta * (eps - mu))
        resid = float(np.max(np.abs(n_new - n)))
        n = (1.0 - mix) * n + mix * n_new
        if ramp >= 1.0 and resid < tol:
            break
    band_min = b0 + C @ n
    final = (g0 / beta) * np.logaddexp(0.0, -beta * (band_min - mu))
    residual = float(np.max(np.abs(final - n)))
    return n, band_min, residual, iterations, residual <= tol
