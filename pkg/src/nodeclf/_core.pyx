# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel core.

Same contract as ``nodeclf._pycore``: flat row-major float64 buffers,
caller-allocated outputs.  Any object exposing the buffer protocol works;
the package uses ``array('d')``.
"""

from libc.math cimport sqrt, isfinite

BACKEND_NAME = "compiled"


def dot(double[:] x, double[:] y):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double s = 0.0
    for i in range(n):
        s += x[i] * y[i]
    return s


def nrm2(double[:] x):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double s = 0.0
    for i in range(n):
        s += x[i] * x[i]
    return sqrt(s)


def all_finite(double[:] x):
    cdef Py_ssize_t i, n = x.shape[0]
    for i in range(n):
        if not isfinite(x[i]):
            return False
    return True


def fill(double[:] out, double v):
    cdef Py_ssize_t i, n = out.shape[0]
    for i in range(n):
        out[i] = v


def copy_into(double[:] out, double[:] x):
    cdef Py_ssize_t i, n = out.shape[0]
    for i in range(n):
        out[i] = x[i]


def scale_into(double[:] out, double a, double[:] x):
    cdef Py_ssize_t i, n = out.shape[0]
    for i in range(n):
        out[i] = a * x[i]


def axpy_into(double[:] out, double a, double[:] x, double[:] y):
    cdef Py_ssize_t i, n = out.shape[0]
    for i in range(n):
        out[i] = a * x[i] + y[i]


def acc_scaled(double[:] out, double a, double[:] x):
    cdef Py_ssize_t i, n = out.shape[0]
    if a == 0.0:
        return
    for i in range(n):
        out[i] += a * x[i]


def matvec_into(double[:] out, double[:] w, int rows, int cols, double[:] x):
    cdef Py_ssize_t i, j, k = 0
    cdef double s
    for i in range(rows):
        s = 0.0
        for j in range(cols):
            s += w[k] * x[j]
            k += 1
        out[i] = s


def matvec_t_into(double[:] out, double[:] w, int rows, int cols, double[:] x):
    cdef Py_ssize_t i, j, k = 0
    cdef double xi
    for j in range(cols):
        out[j] = 0.0
    for i in range(rows):
        xi = x[i]
        if xi != 0.0:
            for j in range(cols):
                out[j] += w[k + j] * xi
        k += cols


def outer_acc(double[:] w, int rows, int cols, double a, double[:] u, double[:] v):
    cdef Py_ssize_t i, j, k = 0
    cdef double s
    for i in range(rows):
        s = a * u[i]
        if s != 0.0:
            for j in range(cols):
                w[k + j] += s * v[j]
        k += cols


def relu_affine_into(double[:] out, double[:] w, double[:] b, int d, double[:] h):
    cdef Py_ssize_t i, j, k = 0
    cdef double s
    for i in range(d):
        s = b[i]
        for j in range(d):
            s += w[k] * h[j]
            k += 1
        out[i] = s if s > 0.0 else 0.0


def relu_mask_scaled_into(double[:] scratch, double[:] w, double[:] b, int d,
                          double[:] h, double[:] a):
    cdef Py_ssize_t i, j, k = 0
    cdef double s
    for i in range(d):
        s = b[i]
        for j in range(d):
            s += w[k] * h[j]
            k += 1
        scratch[i] = a[i] if s > 0.0 else 0.0


def dyn_vjp_state_into(double[:] out, double[:] scratch, double[:] w, double[:] b,
                       int d, double[:] h, double[:] a):
    relu_mask_scaled_into(scratch, w, b, d, h, a)
    matvec_t_into(out, w, d, d, scratch)


def adjoint_rhs_into(double[:] out, double[:] scratch, double[:] w, double[:] b,
                     int d, double[:] state):
    # state/out layout: [h (d) | a (d) | gW (d*d) | gb (d)]; see _pycore
    cdef Py_ssize_t i, j, k = 0, g
    cdef double s, si
    for i in range(d):
        s = b[i]
        for j in range(d):
            s += w[k] * state[j]
            k += 1
        if s > 0.0:
            out[i] = s
            scratch[i] = state[d + i]
        else:
            out[i] = 0.0
            scratch[i] = 0.0
    for j in range(d):
        out[d + j] = 0.0
    k = 0
    for i in range(d):
        si = scratch[i]
        if si != 0.0:
            for j in range(d):
                out[d + j] -= w[k + j] * si
        k += d
    g = 2 * d
    for i in range(d):
        si = scratch[i]
        if si == 0.0:
            for j in range(d):
                out[g] = 0.0
                g += 1
        else:
            for j in range(d):
                out[g] = -si * state[j]
                g += 1
    for i in range(d):
        out[g + i] = -scratch[i]


def error_norm(double[:] err, double[:] y_old, double[:] y_new, int m,
               double atol, double rtol):
    cdef Py_ssize_t i
    cdef double s = 0.0, ao, an, scale, r
    for i in range(m):
        ao = y_old[i]
        an = y_new[i]
        if ao < 0.0:
            ao = -ao
        if an < 0.0:
            an = -an
        scale = atol + rtol * (ao if ao > an else an)
        r = err[i] / scale
        s += r * r
    return sqrt(s / m)


def adam_step(double[:] p, double[:] m, double[:] v, double[:] g,
              double lr, double b1, double b2, double eps, double bc1, double bc2):
    cdef Py_ssize_t i, n = p.shape[0]
    cdef double gi, mi, vi
    for i in range(n):
        gi = g[i]
        mi = b1 * m[i] + (1.0 - b1) * gi
        vi = b2 * v[i] + (1.0 - b2) * gi * gi
        m[i] = mi
        v[i] = vi
        p[i] -= lr * (mi / bc1) / (sqrt(vi / bc2) + eps)
