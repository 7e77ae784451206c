"""Pure-Python kernel fallback.

Mirrors the compiled module ``nodeclf._core`` function for function. Every
mutating kernel writes into a caller-provided ``array('d')`` buffer, so the
hot loops above this layer allocate nothing per call.

Matrices are flat row-major buffers; ``w[i * cols + j]`` is entry (i, j).
"""

import math

BACKEND_NAME = "python"


def dot(x, y):
    s = 0.0
    for a, b in zip(x, y):
        s += a * b
    return s


def nrm2(x):
    s = 0.0
    for a in x:
        s += a * a
    return math.sqrt(s)


def all_finite(x):
    for a in x:
        if not math.isfinite(a):
            return False
    return True


def fill(out, v):
    for i in range(len(out)):
        out[i] = v


def copy_into(out, x):
    out[:] = x


def scale_into(out, a, x):
    for i in range(len(out)):
        out[i] = a * x[i]


def axpy_into(out, a, x, y):
    # out = a*x + y; safe when out aliases x or y
    for i in range(len(out)):
        out[i] = a * x[i] + y[i]


def acc_scaled(out, a, x):
    # out += a*x
    if a == 0.0:
        return
    for i in range(len(out)):
        out[i] += a * x[i]


def matvec_into(out, w, rows, cols, x):
    k = 0
    for i in range(rows):
        s = 0.0
        for j in range(cols):
            s += w[k] * x[j]
            k += 1
        out[i] = s


def matvec_t_into(out, w, rows, cols, x):
    # out = W^T x  (x has dim rows, out has dim cols)
    for j in range(cols):
        out[j] = 0.0
    k = 0
    for i in range(rows):
        xi = x[i]
        if xi != 0.0:
            for j in range(cols):
                out[j] += w[k + j] * xi
        k += cols


def outer_acc(w, rows, cols, a, u, v):
    # w += a * outer(u, v)
    k = 0
    for i in range(rows):
        s = a * u[i]
        if s != 0.0:
            for j in range(cols):
                w[k + j] += s * v[j]
        k += cols


def relu_affine_into(out, w, b, d, h):
    # out = max(W h + b, 0)
    k = 0
    for i in range(d):
        s = b[i]
        for j in range(d):
            s += w[k] * h[j]
            k += 1
        out[i] = s if s > 0.0 else 0.0


def relu_mask_scaled_into(scratch, w, b, d, h, a):
    # scratch_i = a_i where (W h + b)_i > 0, else 0
    k = 0
    for i in range(d):
        s = b[i]
        for j in range(d):
            s += w[k] * h[j]
            k += 1
        scratch[i] = a[i] if s > 0.0 else 0.0


def dyn_vjp_state_into(out, scratch, w, b, d, h, a):
    # out = W^T (mask ⊙ a) with mask from the pre-activation sign
    relu_mask_scaled_into(scratch, w, b, d, h, a)
    matvec_t_into(out, w, d, d, scratch)


def adjoint_rhs_into(out, scratch, w, b, d, state):
    # state/out layout: [h (d) | a (d) | gW (d*d) | gb (d)]
    #   dh/dt  =  relu(W h + b)
    #   da/dt  = -W^T (mask ⊙ a)
    #   dgW/dt = -(mask ⊙ a) h^T,  dgb/dt = -(mask ⊙ a)
    # The gW/gb slots of `state` never feed back into the derivative.
    k = 0
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
            for _ in range(d):
                out[g] = 0.0
                g += 1
        else:
            for j in range(d):
                out[g] = -si * state[j]
                g += 1
    for i in range(d):
        out[g + i] = -scratch[i]


def error_norm(err, y_old, y_new, m, atol, rtol):
    # RMS of err_i / (atol + rtol * max(|old_i|, |new_i|)) over the first m slots
    s = 0.0
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
    return math.sqrt(s / m)


def adam_step(p, m, v, g, lr, b1, b2, eps, bc1, bc2):
    # bc1 = 1 - b1^t, bc2 = 1 - b2^t (bias corrections for step t)
    for i in range(len(p)):
        gi = g[i]
        mi = b1 * m[i] + (1.0 - b1) * gi
        vi = b2 * v[i] + (1.0 - b2) * gi * gi
        m[i] = mi
        v[i] = vi
        p[i] -= lr * (mi / bc1) / (math.sqrt(vi / bc2) + eps)
