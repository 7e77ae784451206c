"""The learned state derivative: one linear map with a ReLU clamp.

dh/dt = relu(W h + b).  The derivative ignores t (the flow is
autonomous), and the ReLU subgradient at exactly zero is taken as zero,
which makes the all-zero parameter set an exact fixed point with an
exactly zero gradient.

Besides evaluation, this module provides the two vector-Jacobian products
the backward pass needs and a spectral-norm bound on the derivative's
Lipschitz constant (the ReLU is 1-Lipschitz, so the spectral norm of W
bounds the whole map).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from . import _backend
from .errors import DimensionError
from .linalg import Matrix, Vector, new_buffer

_POWER_ITERATIONS = 100
_POWER_SEED = 0x4E0D
_POWER_TOL = 1e-12


@dataclass
class DynamicsParams:
    """Weight matrix and bias of the derivative network."""

    w: Matrix
    b: Vector

    def __post_init__(self):
        if self.w.rows != self.w.cols:
            raise DimensionError(
                f"dynamics weight must be square, got {self.w.rows}x{self.w.cols}"
            )
        if self.b.dim != self.w.rows:
            raise DimensionError(
                f"dynamics bias has dim {self.b.dim}, weight is "
                f"{self.w.rows}x{self.w.cols}"
            )

    @property
    def d(self) -> int:
        return self.w.rows

    def copy(self) -> "DynamicsParams":
        return DynamicsParams(self.w.copy(), self.b.copy())

    @classmethod
    def zeros(cls, d: int) -> "DynamicsParams":
        return cls(Matrix.zeros(d, d), Vector.zeros(d))


@dataclass
class ParamGrad:
    """Gradient with respect to the dynamics parameters."""

    dw: Matrix
    db: Vector

    def __post_init__(self):
        if self.dw.rows != self.dw.cols or self.db.dim != self.dw.rows:
            raise DimensionError(
                f"gradient shapes inconsistent: dw {self.dw.rows}x{self.dw.cols}, "
                f"db dim {self.db.dim}"
            )

    @classmethod
    def zeros(cls, d: int) -> "ParamGrad":
        return cls(Matrix.zeros(d, d), Vector.zeros(d))


def _check_dim(p: DynamicsParams, v: Vector, name: str) -> None:
    if v.dim != p.d:
        raise DimensionError(
            f"{name} has dim {v.dim}, dynamics dimension is {p.d}"
        )


def evaluate(p: DynamicsParams, t: float, h: Vector) -> Vector:
    """relu(W h + b).  ``t`` is accepted for solver compatibility and ignored."""
    _check_dim(p, h, "state")
    out = Vector.zeros(p.d)
    _backend.kernels.relu_affine_into(out.data, p.w.data, p.b.data, p.d, h.data)
    return out


def vjp_state(p: DynamicsParams, t: float, h: Vector, a: Vector) -> Vector:
    """a^T times the Jacobian of :func:`evaluate` with respect to h.

    The Jacobian is diag(step(W h + b)) W with step(z) = 1 for z > 0 and
    0 otherwise.
    """
    _check_dim(p, h, "state")
    _check_dim(p, a, "cotangent")
    out = Vector.zeros(p.d)
    scratch = new_buffer(p.d)
    _backend.kernels.dyn_vjp_state_into(
        out.data, scratch, p.w.data, p.b.data, p.d, h.data, a.data
    )
    return out


def vjp_params(p: DynamicsParams, t: float, h: Vector, a: Vector) -> ParamGrad:
    """a^T times the Jacobian of :func:`evaluate` with respect to (W, b).

    dW = outer(mask ⊙ a, h) and db = mask ⊙ a, with the same step mask as
    :func:`vjp_state`.
    """
    _check_dim(p, h, "state")
    _check_dim(p, a, "cotangent")
    d = p.d
    scratch = new_buffer(d)
    _backend.kernels.relu_mask_scaled_into(
        scratch, p.w.data, p.b.data, d, h.data, a.data
    )
    grad = ParamGrad.zeros(d)
    _backend.kernels.outer_acc(grad.dw.data, d, d, 1.0, scratch, h.data)
    _backend.kernels.copy_into(grad.db.data, scratch)
    return grad


def lipschitz_bound(p: DynamicsParams, iterations: int = _POWER_ITERATIONS) -> float:
    """Upper bound on the Lipschitz constant of :func:`evaluate` in h.

    Estimates the spectral norm of W by power iteration on W^T W from a
    seeded start vector (deterministic for a fixed iteration count).  The
    converged estimate is inflated by one part in 1e8 to cover the
    remaining convergence gap, and never exceeds the Frobenius norm,
    which is itself returned if the iteration fails to settle.
    """
    K = _backend.kernels
    d = p.d
    w = p.w.data
    fro = K.nrm2(w)
    if fro == 0.0:
        return 0.0
    rng = random.Random(_POWER_SEED)
    v = new_buffer(d)
    u = new_buffer(d)
    for i in range(d):
        v[i] = rng.uniform(-1.0, 1.0)
    nv = K.nrm2(v)
    K.scale_into(v, 1.0 / nv, v)
    sigma = 0.0
    for _ in range(iterations):
        K.matvec_into(u, w, d, d, v)
        K.matvec_t_into(v, w, d, d, u)
        growth = K.nrm2(v)
        if growth == 0.0:
            # start vector landed in the null space; perturb and retry
            for i in range(d):
                v[i] = rng.uniform(-1.0, 1.0)
            K.scale_into(v, 1.0 / K.nrm2(v), v)
            continue
        K.scale_into(v, 1.0 / growth, v)
        estimate = math.sqrt(growth)
        if abs(estimate - sigma) <= _POWER_TOL * max(1.0, estimate):
            return min(estimate * (1.0 + 1e-8), fro)
        sigma = estimate
    return fro
