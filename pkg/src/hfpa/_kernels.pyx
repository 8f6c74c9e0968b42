# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled envelope-pipeline kernel.

Scalar single-pass twin of :mod:`hfpa._kernels_py`: fuses the soft-limiter,
clipped-cosine Fourier components, and overdrive shaping into one loop with
Kahan-compensated accumulators, avoiding the fallback's array temporaries.
"""
from libc.math cimport acos, pow, sqrt

cimport cython

cdef double PI = 3.141592653589793238462643383279502884


@cython.boundscheck(False)
@cython.wraparound(False)
def pa_pipeline(double[::1] env, double gain_lin, double a_sat, double smooth,
                double rload, double idq, double shape_beta, double shape_exp,
                double shape_sat, double[::1] aout_out):
    """Same contract as hfpa._kernels_py.pa_pipeline."""
    cdef Py_ssize_t i, n = env.shape[0]
    cdef double s2 = 2.0 * smooth
    cdef double inv_s2 = 1.0 / s2
    cdef double u, aout, ipk, x, thc, sin_thc, idc, i1, r, rp, shape
    cdef double sum_a2 = 0.0, c_a2 = 0.0
    cdef double sum_vi1 = 0.0, c_vi1 = 0.0
    cdef double sum_idc = 0.0, c_idc = 0.0
    cdef double term, t_acc, y

    for i in range(n):
        u = gain_lin * env[i]
        if u > 0.0:
            aout = u / pow(1.0 + pow(u / a_sat, s2), inv_s2)
        else:
            aout = 0.0
        aout_out[i] = aout
        ipk = aout / rload

        if ipk > 0.0:
            x = -idq / ipk
            if x < -1.0:
                x = -1.0
            elif x > 1.0:
                x = 1.0
            thc = acos(x)
            sin_thc = sqrt(1.0 - x * x)  # = sin(thc)
            idc = (idq * thc + ipk * sin_thc) / PI
            i1 = (2.0 * idq * sin_thc + ipk * (thc + sin_thc * x)) / PI
        else:
            idc = idq
            i1 = 0.0

        r = aout / a_sat
        rp = pow(r, shape_exp)
        shape = 1.0 - shape_beta * rp / (1.0 + shape_sat * rp)

        # Kahan-compensated sums keep parity with numpy's pairwise summation
        term = aout * aout
        y = term - c_a2; t_acc = sum_a2 + y; c_a2 = (t_acc - sum_a2) - y
        sum_a2 = t_acc

        term = aout * i1
        y = term - c_vi1; t_acc = sum_vi1 + y; c_vi1 = (t_acc - sum_vi1) - y
        sum_vi1 = t_acc

        term = idc * shape
        y = term - c_idc; t_acc = sum_idc + y; c_idc = (t_acc - sum_idc) - y
        sum_idc = t_acc

    return sum_a2, sum_vi1, sum_idc
