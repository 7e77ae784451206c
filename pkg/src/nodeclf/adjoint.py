"""Gradients through the flow.

:func:`backward` integrates the sensitivity system jointly with a
re-integration of the state, backward in time from the terminal
condition.  The integrated vector packs [h | a | gW | gb] where ``a`` is
the loss sensitivity to the state and (gW, gb) accumulate the parameter
gradient, so memory stays O(d^2) no matter how many steps the solver
takes.  Only the h and a slots feed the adaptive error norm; the gradient
accumulator is a scale-free integral that should not steer step control.

:func:`backward_discrete` is the memory-heavy cross-check: exact
reverse-mode differentiation of an unrolled fixed-step rk4 solve, storing
every stage of the forward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import _backend
from .dynamics import DynamicsParams, ParamGrad
from .errors import ConfigError, DimensionError, DivergenceError, StepLimitError
from .linalg import Matrix, Vector, new_buffer
from .odesolve import SolverConfig, SolveStats, solve


@dataclass
class AdjointState:
    """Unpacked snapshot of the augmented backward state."""

    a: Vector
    h: Vector
    grad_theta: ParamGrad


def _check(p: DynamicsParams, h1: Vector, dL_dh1: Vector) -> None:
    if h1.dim != p.d or dL_dh1.dim != p.d:
        raise DimensionError(
            f"state dim {h1.dim} and cotangent dim {dL_dh1.dim} must both "
            f"equal the dynamics dimension {p.d}"
        )


def backward(p: DynamicsParams, h1: Vector, dL_dh1: Vector, t0: float, t1: float,
             cfg: SolverConfig, stats_out: SolveStats | None = None
             ) -> tuple[Vector, ParamGrad]:
    """Propagate a loss gradient at ``h(t1)`` back to ``h(t0)`` and (W, b).

    Integrates, from t1 down to t0,

        dh/dt  = relu(W h + b)
        da/dt  = -a^T ∂(relu(W h + b))/∂h
        dgθ/dt = -a^T ∂(relu(W h + b))/∂θ

    with a(t1) = dL_dh1 and gθ(t1) = 0, and returns (a(t0), gθ(t0)).

    Pass ``stats_out`` to receive the solver counters, including the
    workspace census (which is independent of the step count).
    """
    _check(p, h1, dL_dh1)
    if not t1 > t0:
        raise ConfigError(f"backward needs t1 > t0, got t0={t0!r}, t1={t1!r}")
    d = p.d
    aug = 2 * d + d * d + d

    z1 = Vector.zeros(aug)
    K = _backend.kernels
    z1.data[0:d] = h1.data
    z1.data[d:2 * d] = dL_dh1.data

    out = new_buffer(aug)
    scratch = new_buffer(d)
    out_view = Vector(out)
    w_data = p.w.data
    b_data = p.b.data

    def rhs(t: float, state: Vector) -> Vector:
        K.adjoint_rhs_into(out, scratch, w_data, b_data, d, state.data)
        return out_view

    try:
        z0, stats = solve(rhs, z1, t1, t0, cfg, err_len=2 * d)
    except StepLimitError as e:
        raise StepLimitError(f"adjoint backward pass: {e}", e.stats) from e
    except DivergenceError as e:
        raise DivergenceError(f"adjoint backward pass: {e}", e.t) from e

    # census: augmented initial state + rhs output + mask scratch
    stats.workspace_floats += aug + aug + d
    if stats_out is not None:
        stats_out.copy_from(stats)

    dL_dh0 = Vector(z0.data[d:2 * d])
    gw = Matrix(d, d, z0.data[2 * d:2 * d + d * d])
    gb = Vector(z0.data[2 * d + d * d:])
    return dL_dh0, ParamGrad(gw, gb)


def backward_discrete(p: DynamicsParams, h0: Vector, dL_dh1: Vector, t0: float,
                      t1: float, n_steps: int) -> tuple[Vector, ParamGrad]:
    """Reverse-mode gradient of an unrolled fixed-step rk4 solve.

    Runs ``n_steps`` classic rk4 steps forward from ``h0`` storing every
    stage, then sweeps backward through the stored computation graph.
    The result is the exact gradient of the discrete forward map (up to
    float roundoff), which converges to :func:`backward`'s continuous
    gradient as ``n_steps`` grows.
    """
    _check(p, h0, dL_dh1)
    if n_steps < 1:
        raise ConfigError(f"n_steps must be >= 1, got {n_steps}")
    K = _backend.kernels
    d = p.d
    w = p.w.data
    b = p.b.data
    h = (t1 - t0) / n_steps

    # forward sweep: keep the step-start state and the first three slopes;
    # the stage inputs u2..u4 are rebuilt from these during the reverse sweep
    y = new_buffer(d)
    K.copy_into(y, h0.data)
    yv = Vector(y)
    tape: list[tuple] = []
    u = new_buffer(d)
    uv = Vector(u)
    k4 = new_buffer(d)
    for _ in range(n_steps):
        y_rec = new_buffer(d)
        k1 = new_buffer(d)
        k2 = new_buffer(d)
        k3 = new_buffer(d)
        K.copy_into(y_rec, y)
        K.relu_affine_into(k1, w, b, d, y)
        K.axpy_into(u, 0.5 * h, k1, y)
        K.relu_affine_into(k2, w, b, d, u)
        K.axpy_into(u, 0.5 * h, k2, y)
        K.relu_affine_into(k3, w, b, d, u)
        K.axpy_into(u, h, k3, y)
        K.relu_affine_into(k4, w, b, d, u)
        sixth = h / 6.0
        K.acc_scaled(y, sixth, k1)
        K.acc_scaled(y, 2.0 * sixth, k2)
        K.acc_scaled(y, 2.0 * sixth, k3)
        K.acc_scaled(y, sixth, k4)
        tape.append((y_rec, k1, k2, k3))

    # reverse sweep
    hbar = new_buffer(d)
    K.copy_into(hbar, dL_dh1.data)
    gw = Matrix.zeros(d, d)
    gb = Vector.zeros(d)
    kbar = new_buffer(d)
    ubar = new_buffer(d)
    scratch = new_buffer(d)
    stage_u = new_buffer(d)

    def pull_stage(point, cotangent):
        # accumulate parameter gradient at this stage and return the
        # state cotangent contribution into `ubar`
        K.relu_mask_scaled_into(scratch, w, b, d, point, cotangent)
        K.outer_acc(gw.data, d, d, 1.0, scratch, point)
        K.acc_scaled(gb.data, 1.0, scratch)
        K.matvec_t_into(ubar, w, d, d, scratch)

    for y_rec, k1, k2, k3 in reversed(tape):
        sixth = h / 6.0
        g = hbar  # cotangent of the step output
        new_hbar = new_buffer(d)
        K.copy_into(new_hbar, g)

        # stage 4: u4 = y + h*k3
        K.axpy_into(stage_u, h, k3, y_rec)
        K.scale_into(kbar, sixth, g)
        pull_stage(stage_u, kbar)
        K.acc_scaled(new_hbar, 1.0, ubar)
        u4bar = new_buffer(d)
        K.copy_into(u4bar, ubar)

        # stage 3: u3 = y + (h/2)*k2
        K.axpy_into(stage_u, 0.5 * h, k2, y_rec)
        K.scale_into(kbar, 2.0 * sixth, g)
        K.acc_scaled(kbar, h, u4bar)
        pull_stage(stage_u, kbar)
        K.acc_scaled(new_hbar, 1.0, ubar)
        u3bar = u4bar  # reuse buffer
        K.copy_into(u3bar, ubar)

        # stage 2: u2 = y + (h/2)*k1
        K.axpy_into(stage_u, 0.5 * h, k1, y_rec)
        K.scale_into(kbar, 2.0 * sixth, g)
        K.acc_scaled(kbar, 0.5 * h, u3bar)
        pull_stage(stage_u, kbar)
        K.acc_scaled(new_hbar, 1.0, ubar)
        u2bar = u3bar
        K.copy_into(u2bar, ubar)

        # stage 1: u1 = y
        K.scale_into(kbar, sixth, g)
        K.acc_scaled(kbar, 0.5 * h, u2bar)
        pull_stage(y_rec, kbar)
        K.acc_scaled(new_hbar, 1.0, ubar)

        hbar = new_hbar

    return Vector(hbar), ParamGrad(gw, gb)
