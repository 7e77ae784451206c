"""Shared test utilities: random instances and finite-difference oracles.

Finite differences near a ReLU kink are meaningless (the perturbed flows
straddle a derivative discontinuity), so instance samplers here condition
on the whole flow keeping a margin between every pre-activation and zero,
redrawing and counting the rejects.  This mirrors the convention the
VJP-level checks use (pre-activations bounded away from zero).
"""

from __future__ import annotations

import random

from nodeclf.dynamics import DynamicsParams
from nodeclf.linalg import Matrix, Vector
from nodeclf.model import NodeClassifier, init_classifier, loss
from nodeclf.odesolve import SolverConfig

KINK_MARGIN = 2e-3


def rel_close(a: float, b: float, rtol: float, floor: float = 1e-8) -> bool:
    """|a-b| within rtol of the larger magnitude, with an absolute floor
    for entries too small for finite differences to resolve."""
    err = abs(a - b)
    return err <= rtol * max(abs(a), abs(b)) or err <= floor


def max_rel_err(xs, ys, floor: float = 1e-8) -> float:
    worst = 0.0
    for a, b in zip(xs, ys):
        err = abs(a - b)
        if err > floor:
            worst = max(worst, err / max(abs(a), abs(b), 1e-300))
    return worst


def rand_vector(rng: random.Random, n: int, lo: float = -1.0, hi: float = 1.0) -> Vector:
    return Vector.of(rng.uniform(lo, hi) for _ in range(n))


def rand_matrix(rng: random.Random, rows: int, cols: int,
                scale: float = 1.0) -> Matrix:
    return Matrix.from_rows(
        [[rng.uniform(-scale, scale) for _ in range(cols)] for _ in range(rows)]
    )


def rand_params(rng: random.Random, d: int, scale: float = 0.5) -> DynamicsParams:
    return DynamicsParams(rand_matrix(rng, d, d, scale),
                          rand_vector(rng, d, -scale, scale))


def rand_feature(rng: random.Random, nv: int) -> Vector:
    """Sparse nonnegative unit vector, shaped like a TF-IDF output."""
    v = [0.0] * nv
    for _ in range(rng.randint(2, max(2, nv // 2))):
        v[rng.randrange(nv)] = rng.uniform(0.2, 1.0)
    norm = sum(x * x for x in v) ** 0.5
    return Vector.of(x / norm for x in v)


def conditioned_h(rng: random.Random, p: DynamicsParams,
                  margin: float = 1e-3) -> Vector:
    """Random state whose pre-activations all sit at least ``margin`` from 0."""
    d = p.d
    while True:
        h = rand_vector(rng, d)
        z_ok = True
        for i in range(d):
            z = p.b.data[i]
            for j in range(d):
                z += p.w.data[i * d + j] * h.data[j]
            if abs(z) < margin:
                z_ok = False
                break
        if z_ok:
            return h


def min_preactivation(p: DynamicsParams, h0: Vector, t0: float = 0.0,
                      t1: float = 1.0, steps: int = 64) -> float:
    """min over time and units of |W h(t) + b| along an rk4 flow."""
    d = p.d
    w, b = p.w.data, p.b.data
    h = list(h0.data)
    dt = (t1 - t0) / steps

    def f(state):
        out = []
        for i in range(d):
            z = b[i]
            for j in range(d):
                z += w[i * d + j] * state[j]
            out.append(z if z > 0.0 else 0.0)
        return out

    def zmin(state):
        best = float("inf")
        for i in range(d):
            z = b[i]
            for j in range(d):
                z += w[i * d + j] * state[j]
            best = min(best, abs(z))
        return best

    best = zmin(h)
    for _ in range(steps):
        k1 = f(h)
        k2 = f([h[j] + 0.5 * dt * k1[j] for j in range(d)])
        k3 = f([h[j] + 0.5 * dt * k2[j] for j in range(d)])
        k4 = f([h[j] + dt * k3[j] for j in range(d)])
        h = [h[j] + dt / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j])
             for j in range(d)]
        best = min(best, zmin(h))
    return best


def encode_h0(m: NodeClassifier, x: Vector) -> Vector:
    h0 = Vector.zeros(m.hidden_dim)
    for i in range(m.hidden_dim):
        s = m.enc_b.data[i]
        for j in range(m.n_features):
            s += m.enc_w.data[i * m.n_features + j] * x.data[j]
        h0.data[i] = s
    return h0


def sample_smooth_instance(rng: random.Random, d: int, solver: SolverConfig,
                           nv_range=(3, 16), classes=(2, 3)
                           ) -> tuple[NodeClassifier, list, int]:
    """Random small classifier + one-example batch whose flow stays clear
    of ReLU kinks.  Returns (model, batch, number of redraws)."""
    redraws = 0
    while True:
        nv = rng.randint(*nv_range)
        n_classes = rng.choice(classes)
        m = init_classifier(nv, d, n_classes, seed=rng.randrange(2 ** 32),
                            solver=solver)
        batch = [(rand_feature(rng, nv), rng.randrange(n_classes))]
        h0 = encode_h0(m, batch[0][0])
        if min_preactivation(m.dynamics, h0) >= KINK_MARGIN:
            return m, batch, redraws
        redraws += 1


def fd_param_check(m: NodeClassifier, batch, grads, eps: float = 1e-4,
                   rtol: float = 1e-4, floor: float = 1e-8) -> float:
    """Central finite differences of :func:`nodeclf.model.loss` over every
    parameter entry.  Returns the worst relative error beyond the floor
    (0.0 when every entry agrees)."""
    worst = 0.0
    for (_, parr), garr in zip(m.param_arrays(), grads.arrays()):
        for i in range(len(parr)):
            orig = parr[i]
            parr[i] = orig + eps
            lp = loss(m, batch)
            parr[i] = orig - eps
            lm = loss(m, batch)
            parr[i] = orig
            fd = (lp - lm) / (2.0 * eps)
            a = garr[i]
            err = abs(fd - a)
            if err > rtol * max(abs(fd), abs(a)) and err > floor:
                worst = max(worst, err / max(abs(fd), abs(a), 1e-300))
    return worst
