# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled fixed-point kernel for the self-consistent density solve.

Same contract as qdsim._scf_py.scf_fixed_point; keep the two in sync. The
interaction matvec goes through BLAS dgemv; the Fermi update, residual, and
mixing are fused into one pass.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log1p
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()


cdef inline double softplus(double z) noexcept nogil:
    # log(1 + exp(z)) without overflow
    if z > 0.0:
        return z + log1p(exp(-z))
    return log1p(exp(z))


cdef double _matvec_band(double[:, ::1] C, double[::1] n, double[::1] out,
                         double[::1] b0, double ramp) noexcept nogil:
    # out = b0 + ramp * (C @ n); row-major C runs through dgemv as its
    # column-major transpose
    cdef int N = <int> C.shape[0]
    cdef int inc = 1
    cdef double beta_blas = 0.0
    cdef char trans = b'T'
    dgemv(&trans, &N, &N, &ramp, &C[0, 0], &N, &n[0], &inc, &beta_blas,
          &out[0], &inc)
    cdef Py_ssize_t i
    for i in range(N):
        out[i] += b0[i]
    return 0.0


def scf_fixed_point(double[::1] b0, double[:, ::1] C, double g0, double beta,
                    double mu, double mix, int ramp_iters, double tol,
                    int max_iter):
    """Run the damped fixed-point iteration from n = 0.

    Returns (n, band_min, residual, iterations, converged); see the pure
    backend for parameter meanings.
    """
    cdef Py_ssize_t N = b0.shape[0]
    cdef cnp.ndarray[double, ndim=1] n_arr = np.zeros(N)
    cdef cnp.ndarray[double, ndim=1] eps_arr = np.empty(N)
    cdef cnp.ndarray[double, ndim=1] band_arr = np.empty(N)
    cdef double[::1] n = n_arr
    cdef double[::1] eps = eps_arr
    cdef double[::1] band = band_arr
    cdef double ramp, resid, diff, n_new, scale
    cdef Py_ssize_t i
    cdef int it, iterations = 0

    scale = g0 / beta
    with nogil:
        for it in range(1, max_iter + 1):
            iterations = it
            if ramp_iters <= 0:
                ramp = 1.0
            else:
                ramp = it / (<double> ramp_iters)
                if ramp > 1.0:
                    ramp = 1.0
            _matvec_band(C, n, eps, b0, ramp)
            resid = 0.0
            for i in range(N):
                n_new = scale * softplus(-beta * (eps[i] - mu))
                diff = fabs(n_new - n[i])
                if diff > resid:
                    resid = diff
                n[i] = (1.0 - mix) * n[i] + mix * n_new
            if ramp >= 1.0 and resid < tol:
                break
        _matvec_band(C, n, band, b0, 1.0)
        resid = 0.0
        for i in range(N):
            diff = fabs(scale * softplus(-beta * (band[i] - mu)) - n[i])
            if diff > resid:
                resid = diff

    return n_arr, band_arr, resid, iterations, resid <= tol
