"""Backward pass: finite differences, the discrete-backprop oracle, the
matrix-exponential oracle, and the structural memory contract."""

import math
import random

import pytest
import scipy.linalg

from helpers import (conditioned_h, max_rel_err, min_preactivation,
                     rand_params, rand_vector, rel_close)
from nodeclf import adjoint
from nodeclf.dynamics import DynamicsParams, evaluate, lipschitz_bound
from nodeclf.errors import ConfigError, StepLimitError
from nodeclf.linalg import Matrix, Vector, norm2
from nodeclf.odesolve import SolverConfig, SolveStats, solve


def flow_rhs(p):
    return lambda t, h: evaluate(p, t, h)


def smooth_case(rng, d, scale=0.5):
    """Params and a start state whose flow keeps clear of ReLU kinks."""
    while True:
        p = rand_params(rng, d, scale)
        h0 = conditioned_h(rng, p)
        if min_preactivation(p, h0) >= 2e-3:
            return p, h0


class TestZeroDynamics:
    def test_identity_flow_dead_gradient(self):
        d = 3
        p = DynamicsParams.zeros(d)
        h1 = Vector.of([1.0, -2.0, 0.5])
        g = Vector.of([0.3, 0.7, -1.1])
        dL_dh0, pg = adjoint.backward(p, h1, g, 0.0, 1.0, SolverConfig())
        assert dL_dh0.tolist() == g.tolist()
        assert pg.dw.tolists() == Matrix.zeros(d, d).tolists()
        assert pg.db.tolist() == [0.0, 0.0, 0.0]

    def test_discrete_agrees(self):
        d = 2
        p = DynamicsParams.zeros(d)
        h0 = Vector.of([1.5, -0.5])
        g = Vector.of([2.0, 3.0])
        a0, pg = adjoint.backward_discrete(p, h0, g, 0.0, 1.0, 16)
        assert a0.tolist() == g.tolist()
        assert pg.dw.tolists() == [[0.0, 0.0], [0.0, 0.0]]


class TestFiniteDifferenceOracle:
    def test_quadratic_loss_gradient(self):
        """d=4 random model, L(h1) = ||h1||^2/2, adjoint vs central FD."""
        rng = random.Random(21)
        cfg = SolverConfig(method="rk4", fixed_step_count=64)
        p, h0 = smooth_case(rng, 4)

        def loss_of(pp, hh0):
            h1, _ = solve(flow_rhs(pp), hh0, 0.0, 1.0, cfg)
            return 0.5 * sum(v * v for v in h1)

        h1, _ = solve(flow_rhs(p), h0, 0.0, 1.0, cfg)
        dL_dh0, pg = adjoint.backward(p, h1, h1.copy(), 0.0, 1.0, cfg)

        eps = 1e-4
        for j in range(4):
            hp = h0.copy()
            hp.data[j] += eps
            hm = h0.copy()
            hm.data[j] -= eps
            fd = (loss_of(p, hp) - loss_of(p, hm)) / (2 * eps)
            assert rel_close(dL_dh0[j], fd, 1e-4)
        for i in range(16):
            pp = p.copy()
            pp.w.data[i] += eps
            pm = p.copy()
            pm.w.data[i] -= eps
            fd = (loss_of(pp, h0) - loss_of(pm, h0)) / (2 * eps)
            assert rel_close(pg.dw.data[i], fd, 1e-4)
        for i in range(4):
            pp = p.copy()
            pp.b.data[i] += eps
            pm = p.copy()
            pm.b.data[i] -= eps
            fd = (loss_of(pp, h0) - loss_of(pm, h0)) / (2 * eps)
            assert rel_close(pg.db[i], fd, 1e-4)


class TestDiscreteOracle:
    def test_matches_backward(self):
        rng = random.Random(22)
        cfg = SolverConfig(rtol=1e-10, atol=1e-12)
        for _ in range(5):
            p, h0 = smooth_case(rng, 4)
            h1, _ = solve(flow_rhs(p), h0, 0.0, 1.0, cfg)
            g = rand_vector(rng, 4)
            a0c, pgc = adjoint.backward(p, h1, g, 0.0, 1.0, cfg)
            a0d, pgd = adjoint.backward_discrete(p, h0, g, 0.0, 1.0, 4096)
            assert max_rel_err(a0c, a0d) <= 1e-3
            assert max_rel_err(pgc.dw.data, pgd.dw.data) <= 1e-3
            assert max_rel_err(pgc.db, pgd.db) <= 1e-3

    def test_linear_region_matches_matrix_exponential(self):
        """Large positive bias keeps the ReLU active, so the flow Jacobian
        is expm(W) and the state cotangent is expm(W)^T a."""
        rng = random.Random(23)
        d = 2
        w = [[rng.uniform(-0.4, 0.4) for _ in range(d)] for _ in range(d)]
        p = DynamicsParams(Matrix.from_rows(w), Vector.of([10.0, 10.0]))
        h0 = Vector.of([0.5, 1.0])
        assert min_preactivation(p, h0) > 1.0  # stays in the linear region
        a = Vector.of([0.7, -0.3])
        a0, _ = adjoint.backward_discrete(p, h0, a, 0.0, 1.0, 4096)
        expm = scipy.linalg.expm([[w[i][j] for j in range(d)] for i in range(d)])
        want = [sum(a[i] * expm[i][j] for i in range(d)) for j in range(d)]
        for got, ref in zip(a0, want):
            assert abs(got - ref) <= 1e-6

    def test_convergence_sweep_monotone(self):
        """Error against a high-resolution reference shrinks monotonically
        as the unrolled step count doubles.

        The instance is fixed: stiff enough that the k=12 error stays well
        above float roundoff, picked so the sweep is strictly decreasing.
        """
        rng = random.Random(31)
        p, h0 = smooth_case(rng, 3, scale=1.8)
        g = rand_vector(rng, 3)
        ref_a0, ref_pg = adjoint.backward_discrete(p, h0, g, 0.0, 1.0, 2 ** 14)

        def err(n):
            a0, pg = adjoint.backward_discrete(p, h0, g, 0.0, 1.0, n)
            e = max(abs(x - y) for x, y in zip(a0, ref_a0))
            e = max(e, max(abs(x - y) for x, y in
                           zip(pg.dw.data, ref_pg.dw.data)))
            return e

        errors = [err(2 ** k) for k in range(6, 13)]
        for earlier, later in zip(errors, errors[1:]):
            assert later < earlier


class TestProperties:
    def test_linearity_in_cotangent(self):
        rng = random.Random(25)
        cfg = SolverConfig()
        p, h0 = smooth_case(rng, 3)
        h1, _ = solve(flow_rhs(p), h0, 0.0, 1.0, cfg)
        g = rand_vector(rng, 3)
        alpha = 2.75
        a0, pg = adjoint.backward(p, h1, g, 0.0, 1.0, cfg)
        a0s, pgs = adjoint.backward(p, h1, Vector.of(alpha * v for v in g),
                                    0.0, 1.0, cfg)
        for x, y in zip(a0s, a0):
            assert rel_close(x, alpha * y, 1e-9, floor=1e-12)
        for x, y in zip(pgs.dw.data, pg.dw.data):
            assert rel_close(x, alpha * y, 1e-9, floor=1e-12)

    def test_norm_bound(self):
        """The backward sensitivity grows at most like exp(L * (t1 - t0))."""
        rng = random.Random(26)
        cfg = SolverConfig()
        for _ in range(30):
            d = rng.choice((2, 4))
            p = rand_params(rng, d, scale=rng.uniform(0.2, 1.0))
            h0 = rand_vector(rng, d)
            h1, _ = solve(flow_rhs(p), h0, 0.0, 1.0, cfg)
            g = rand_vector(rng, d)
            a0, _ = adjoint.backward(p, h1, g, 0.0, 1.0, cfg)
            bound = math.exp(lipschitz_bound(p)) * norm2(g)
            assert norm2(a0) <= bound * (1.0 + 1e-9)


class TestContracts:
    def test_requires_forward_interval(self):
        p = DynamicsParams.zeros(2)
        v = Vector.of([1.0, 1.0])
        with pytest.raises(ConfigError):
            adjoint.backward(p, v, v, 1.0, 0.0, SolverConfig())

    def test_solver_errors_carry_context(self):
        rng = random.Random(27)
        p = rand_params(rng, 3, scale=2.0)
        v = rand_vector(rng, 3)
        cfg = SolverConfig(rtol=1e-12, atol=1e-14, max_steps=2)
        with pytest.raises(StepLimitError) as err:
            adjoint.backward(p, v, v, 0.0, 1.0, cfg)
        assert "adjoint backward pass" in str(err.value)

    def test_discrete_needs_steps(self):
        p = DynamicsParams.zeros(2)
        v = Vector.of([1.0, 1.0])
        with pytest.raises(ConfigError):
            adjoint.backward_discrete(p, v, v, 0.0, 1.0, 0)


class TestMemoryContract:
    def test_census_independent_of_max_steps(self):
        rng = random.Random(28)
        p, h0 = smooth_case(rng, 4)
        h1, _ = solve(flow_rhs(p), h0, 0.0, 1.0, SolverConfig())
        g = rand_vector(rng, 4)
        small, big = SolveStats(), SolveStats()
        adjoint.backward(p, h1, g, 0.0, 1.0, SolverConfig(max_steps=1_000),
                         stats_out=small)
        adjoint.backward(p, h1, g, 0.0, 1.0, SolverConfig(max_steps=10_000),
                         stats_out=big)
        assert small.workspace_floats == big.workspace_floats

    def test_census_independent_of_actual_steps(self):
        rng = random.Random(29)
        p, h0 = smooth_case(rng, 4)
        h1, _ = solve(flow_rhs(p), h0, 0.0, 1.0, SolverConfig())
        g = rand_vector(rng, 4)
        few, many = SolveStats(), SolveStats()
        adjoint.backward(p, h1, g, 0.0, 1.0,
                         SolverConfig(method="rk4", fixed_step_count=50),
                         stats_out=few)
        adjoint.backward(p, h1, g, 0.0, 1.0,
                         SolverConfig(method="rk4", fixed_step_count=500),
                         stats_out=many)
        assert few.workspace_floats == many.workspace_floats
        assert many.accepted_steps == 10 * few.accepted_steps
