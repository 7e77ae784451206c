"""Explicit ODE integrators over float64 state vectors.

Three methods are available: forward Euler and the classic fourth-order
Runge-Kutta scheme (both fixed-step), and the adaptive Dormand-Prince
5(4) embedded pair ("dopri45", the default).  Integration runs forward or
backward in time depending on the ordering of ``t0`` and ``t1``.

The right-hand side is any callable ``rhs(t, h) -> Vector``.  The solver
copies the returned vector into its own stage storage before calling
``rhs`` again, so implementations may reuse a single output buffer across
calls.  All work buffers are claimed up front; the step loop allocates no
float storage, and :attr:`SolveStats.workspace_floats` reports the number
of float64 slots the solve claimed.  That census depends on the state
dimension and the method's stage count, never on how many steps were
taken.

Adaptive stepping follows the standard elementary controller: a step is
accepted when the RMS of the componentwise error, scaled by
``atol + rtol*max(|h_old|, |h_new|)``, is at most 1, and the step size is
multiplied by ``clamp(0.9 * norm^(-1/5), 0.2, 5.0)`` after every attempt.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from . import _backend
from .errors import ConfigError, DimensionError, DivergenceError, SolverError, StepLimitError
from .linalg import Vector, new_buffer

Rhs = Callable[[float, Vector], Vector]

_METHODS = ("euler", "rk4", "dopri45")

# Dormand-Prince 5(4) tableau.  Stage 7 reuses the propagated solution
# (first-same-as-last), so its A row equals the 5th-order weights and the
# 5th-order solution needs no separate combination pass.
_DP_C = (0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0)
_DP_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
     -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
     11.0 / 84.0),
)
# 5th-order minus embedded 4th-order weights; the per-step error estimate
# is h times this combination of the seven stage slopes.
_DP_ERR = (71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
           -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

_MAX_FACTOR = 5.0
_MIN_FACTOR = 0.2
_SAFETY = 0.9


@dataclass(frozen=True)
class SolverConfig:
    """Integration method and its control parameters."""

    method: str = "dopri45"
    rtol: float = 1e-6
    atol: float = 1e-8
    initial_step: float = 0.1
    max_steps: int = 10_000
    fixed_step_count: int = 100

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ConfigError(
                f"unknown method {self.method!r}, expected one of {_METHODS}"
            )
        if self.rtol < 1e-12:
            raise ConfigError(f"rtol must be >= 1e-12, got {self.rtol}")
        if self.atol < 1e-14:
            raise ConfigError(f"atol must be >= 1e-14, got {self.atol}")
        if self.initial_step <= 0.0:
            raise ConfigError(f"initial_step must be positive, got {self.initial_step}")
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.fixed_step_count < 1:
            raise ConfigError(
                f"fixed_step_count must be >= 1, got {self.fixed_step_count}"
            )


@dataclass
class SolveStats:
    """Counters for one integration."""

    accepted_steps: int = 0
    rejected_steps: int = 0
    rhs_evaluations: int = 0
    workspace_floats: int = 0

    def copy_from(self, other: "SolveStats") -> None:
        self.accepted_steps = other.accepted_steps
        self.rejected_steps = other.rejected_steps
        self.rhs_evaluations = other.rhs_evaluations
        self.workspace_floats = other.workspace_floats


class _Workspace:
    """Float buffer pool with an allocation census."""

    def __init__(self, stats: SolveStats):
        self._stats = stats

    def buf(self, n: int):
        self._stats.workspace_floats += n
        return new_buffer(n)


def _eval_rhs(rhs: Rhs, t: float, view: Vector, out, n: int, stats: SolveStats) -> None:
    f = rhs(t, view)
    fd = f.data
    if len(fd) != n:
        raise DimensionError(
            f"rhs returned a vector of dim {len(fd)}, state has dim {n}"
        )
    _backend.kernels.copy_into(out, fd)
    stats.rhs_evaluations += 1


def _check_finite(buf, t: float) -> None:
    if not _backend.kernels.all_finite(buf):
        raise DivergenceError(f"non-finite state at t={t!r}", t)


def solve(rhs: Rhs, h0: Vector, t0: float, t1: float, cfg: SolverConfig,
          err_len: Optional[int] = None) -> tuple[Vector, SolveStats]:
    """Integrate ``dh/dt = rhs(t, h)`` from ``t0`` to ``t1``.

    ``t1`` may lie on either side of ``t0``; equal endpoints return a copy
    of ``h0``.  ``err_len`` restricts the adaptive error norm to the first
    ``err_len`` state components (used when trailing components are
    scale-free accumulators that should not steer the step size).

    Returns the terminal state and the step counters.  Raises
    :class:`StepLimitError` (carrying partial stats) when ``max_steps`` is
    exhausted and :class:`DivergenceError` when the state stops being
    finite.
    """
    stats = SolveStats()
    ws = _Workspace(stats)
    n = h0.dim
    if err_len is not None and not (1 <= err_len <= n):
        raise ConfigError(f"err_len must be in [1, {n}], got {err_len}")
    y = ws.buf(n)
    _backend.kernels.copy_into(y, h0.data)
    if t0 == t1:
        return Vector(y), stats
    if cfg.method == "euler":
        _fixed_solve(rhs, y, t0, t1, cfg.fixed_step_count, stats, ws, n, rk4=False)
    elif cfg.method == "rk4":
        _fixed_solve(rhs, y, t0, t1, cfg.fixed_step_count, stats, ws, n, rk4=True)
    else:
        y = _dopri45(rhs, y, t0, t1, cfg, stats, ws, n, err_len)
    return Vector(y), stats


def _fixed_solve(rhs, y, t0, t1, steps, stats, ws, n, rk4: bool) -> None:
    K = _backend.kernels
    h = (t1 - t0) / steps
    y_view = Vector(y)
    k1 = ws.buf(n)
    if rk4:
        k2 = ws.buf(n)
        k3 = ws.buf(n)
        k4 = ws.buf(n)
        y_stage = ws.buf(n)
        stage_view = Vector(y_stage)
    for i in range(steps):
        t = t0 + i * h
        _eval_rhs(rhs, t, y_view, k1, n, stats)
        if rk4:
            K.axpy_into(y_stage, 0.5 * h, k1, y)
            _eval_rhs(rhs, t + 0.5 * h, stage_view, k2, n, stats)
            K.axpy_into(y_stage, 0.5 * h, k2, y)
            _eval_rhs(rhs, t + 0.5 * h, stage_view, k3, n, stats)
            K.axpy_into(y_stage, h, k3, y)
            _eval_rhs(rhs, t + h, stage_view, k4, n, stats)
            sixth = h / 6.0
            K.acc_scaled(y, sixth, k1)
            K.acc_scaled(y, 2.0 * sixth, k2)
            K.acc_scaled(y, 2.0 * sixth, k3)
            K.acc_scaled(y, sixth, k4)
        else:
            K.acc_scaled(y, h, k1)
        stats.accepted_steps += 1
        _check_finite(y, t + h)


def _dopri45(rhs, y, t0, t1, cfg, stats, ws, n, err_len):
    K = _backend.kernels
    m = n if err_len is None else err_len
    y_stage = ws.buf(n)
    err = ws.buf(n)
    k = [ws.buf(n) for _ in range(7)]
    y_view = Vector(y)
    stage_view = Vector(y_stage)

    direction = 1.0 if t1 > t0 else -1.0
    span = abs(t1 - t0)
    h = min(cfg.initial_step, span) * direction
    t = t0

    _eval_rhs(rhs, t, y_view, k[0], n, stats)  # FSAL keeps k[0] valid from here on

    attempts = 0
    while (t1 - t) * direction > 0.0:
        if attempts >= cfg.max_steps:
            raise StepLimitError(
                f"max_steps={cfg.max_steps} exhausted at t={t!r} "
                f"(target t1={t1!r})",
                stats,
            )
        attempts += 1
        hit_end = (t + h - t1) * direction >= 0.0
        if hit_end:
            h = t1 - t
        if t + h == t:
            raise SolverError(f"step size underflow at t={t!r}")

        for i in range(1, 7):
            K.copy_into(y_stage, y)
            row = _DP_A[i]
            for j in range(i):
                aij = row[j]
                if aij != 0.0:
                    K.acc_scaled(y_stage, h * aij, k[j])
            _eval_rhs(rhs, t + _DP_C[i] * h, stage_view, k[i], n, stats)
        # stage 7's input is the 5th-order solution; y_stage now holds y_new
        K.fill(err, 0.0)
        for j in range(7):
            ej = _DP_ERR[j]
            if ej != 0.0:
                K.acc_scaled(err, h * ej, k[j])
        norm = K.error_norm(err, y, y_stage, m, cfg.atol, cfg.rtol)

        if norm <= 1.0:
            t = t1 if hit_end else t + h
            y, y_stage = y_stage, y
            y_view, stage_view = stage_view, y_view
            k[0], k[6] = k[6], k[0]
            stats.accepted_steps += 1
            _check_finite(y, t)
        else:
            stats.rejected_steps += 1

        if norm == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = min(_MAX_FACTOR,
                         max(_MIN_FACTOR, _SAFETY * norm ** -0.2))
        h *= factor
    return y


def dense_trajectory(rhs: Rhs, h0: Vector, t0: float, t1: float,
                     cfg: SolverConfig, n_samples: int) -> list[tuple[float, Vector]]:
    """States at ``n_samples`` uniformly spaced times from ``t0`` to ``t1``.

    Both endpoints are included.  Each sample is produced by an
    independent solve from ``(t0, h0)``, so the final sample is exactly
    what :func:`solve` returns for the full interval.
    """
    if n_samples < 2:
        raise ConfigError(f"n_samples must be >= 2, got {n_samples}")
    out: list[tuple[float, Vector]] = []
    for i in range(n_samples):
        tk = t1 if i == n_samples - 1 else t0 + (t1 - t0) * i / (n_samples - 1)
        if i == 0:
            out.append((t0, h0.copy()))
        else:
            yk, _ = solve(rhs, h0, t0, tk, cfg)
            out.append((tk, yk))
    return out
