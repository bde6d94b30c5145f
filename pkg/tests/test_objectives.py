import numpy as np
import pytest

from smoothopt.core import ConfigurationError, RngStream
from smoothopt.objectives import (
    CANONICAL_CHECKER_2D,
    CANONICAL_GMM_1D,
    CheckerboardSpec,
    GmmSpec,
    make_blackbox,
    make_checkerboard,
    make_gmm_potential,
    make_objective,
    make_pendulum_swingup,
)


class TestBlackbox:
    def test_ackley_minimum(self):
        obj = make_blackbox("ackley", 200)
        assert abs(obj(np.zeros(200))) < 1e-12

    def test_rastrigin_values(self):
        obj = make_blackbox("rastrigin", 2)
        assert obj(np.zeros(2)) == 0.0
        # 10*2 + (1 - 10*cos(2pi)) + (1 - 10*cos(2pi)) = 2
        assert abs(obj(np.ones(2)) - 2.0) < 1e-12

    def test_levy_minimum(self):
        obj = make_blackbox("levy", 3)
        assert abs(obj(np.ones(3))) < 1e-12

    def test_sphere(self):
        obj = make_blackbox("sphere", 4)
        assert obj(np.array([1.0, 2.0, 3.0, 4.0])) == 30.0

    def test_unknown_name(self):
        with pytest.raises(ConfigurationError):
            make_blackbox("rosenbrock", 2)

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(0)
        for name in ("ackley", "levy", "rastrigin", "sphere"):
            obj = make_blackbox(name, 6)
            ys = rng.uniform(-3, 3, size=(40, 6))
            np.testing.assert_allclose(obj.batch(ys), [obj(y) for y in ys], rtol=1e-14)


class TestGmmPotential:
    def test_single_component_peak(self):
        spec = GmmSpec(weights=[1.0], means=[0.0], variances=[1.0], lam=1.0)
        obj = make_gmm_potential(spec)
        assert abs(obj(np.zeros(1)) - 0.5 * np.log(2 * np.pi)) < 1e-12
        assert abs(obj(np.array([2.0])) - (0.5 * np.log(2 * np.pi) + 2.0)) < 1e-12

    def test_two_component_mode_against_grid_bisection_oracle(self):
        # independent oracle: dense grid scan plus bisection on a central
        # finite-difference derivative of the raw potential
        spec = GmmSpec(weights=[0.7, 0.3], means=[-1.0, 2.0], variances=[0.25, 0.25], lam=1.0)

        def f(x):
            comp = spec.weights / np.sqrt(2 * np.pi * spec.variances) * np.exp(
                -((x - spec.means[:, 0]) ** 2) / (2 * spec.variances)
            )
            return -np.log(comp.sum())

        def fprime(x):
            comp = spec.weights / np.sqrt(2 * np.pi * spec.variances) * np.exp(
                -((x - spec.means[:, 0]) ** 2) / (2 * spec.variances)
            )
            dcomp = comp * (-(x - spec.means[:, 0]) / spec.variances)
            return -dcomp.sum() / comp.sum()

        xs = np.linspace(-4.0, 5.0, 1_000_001)
        comp = spec.weights[None, :] / np.sqrt(2 * np.pi * spec.variances)[None, :] * np.exp(
            -((xs[:, None] - spec.means[None, :, 0]) ** 2) / (2 * spec.variances)[None, :]
        )
        vals = -np.log(comp.sum(axis=1))
        x0 = xs[np.argmin(vals)]
        a, b = x0 - 2e-5, x0 + 2e-5
        da = fprime(a)
        for _ in range(100):
            m = 0.5 * (a + b)
            dm = fprime(m)
            if da * dm <= 0:
                b = m
            else:
                a, da = m, dm
        x_star_oracle = 0.5 * (a + b)
        obj = make_gmm_potential(spec)
        x_star, f_star = obj.optimum
        assert abs(x_star[0] - x_star_oracle) < 1e-8
        assert abs(f_star - f(x_star_oracle)) < 1e-10

    def test_high_dim_requires_opt_out(self):
        spec = GmmSpec(weights=[1.0], means=np.zeros((1, 3)), variances=[1.0])
        with pytest.raises(ConfigurationError):
            make_gmm_potential(spec)
        obj = make_gmm_potential(spec, find_mode=False)
        assert obj.optimum is None and obj.dim == 3

    def test_density_normalization_on_grid(self):
        # exp(-f/lam) is the mixture density itself: trapezoid mass = 1
        obj = make_gmm_potential(CANONICAL_GMM_1D)
        xs = np.linspace(-12, 14, 400_001)
        dens = np.exp(-obj.batch(xs[:, None]) / CANONICAL_GMM_1D.lam)
        assert abs(np.trapezoid(dens, xs) - 1.0) < 1e-3

    def test_invalid_specs(self):
        with pytest.raises(Exception):
            GmmSpec(weights=[0.5, 0.4], means=[0.0, 1.0], variances=[1.0, 1.0])
        with pytest.raises(Exception):
            GmmSpec(weights=[1.0], means=[0.0], variances=[0.0])
        with pytest.raises(Exception):
            GmmSpec(weights=[], means=[], variances=[])


class TestCheckerboard:
    def test_origin_is_global_minimum(self):
        obj = make_checkerboard(CANONICAL_CHECKER_2D)
        assert obj(np.zeros(2)) == 0.0

    def test_half_period_value(self):
        spec = CheckerboardSpec(base=0.05, amplitude=1.0, period=1.0, dim=1)
        obj = make_checkerboard(spec)
        assert abs(obj(np.array([0.5])) - 1.0125) < 1e-12

    def test_local_minimum_grid_by_dense_scan(self):
        # dense 1e5-point scan on [-5, 5]: local minima of bowl + egg crate
        # sit near the integers, with values increasing away from 0
        spec = CheckerboardSpec(base=0.05, amplitude=1.0, period=1.0, dim=1)
        obj = make_checkerboard(spec)
        xs = np.linspace(-5, 5, 100_001)
        vals = obj.batch(xs[:, None])
        interior = np.where((vals[1:-1] < vals[:-2]) & (vals[1:-1] <= vals[2:]))[0] + 1
        locs = xs[interior]
        assert len(locs) == 11
        assert np.all(np.abs(locs - np.round(locs)) < 0.05)
        f_by_k = {int(round(l)): vals[i] for l, i in zip(locs, interior)}
        for k in range(5):
            assert f_by_k[k] < f_by_k[k + 1]
            assert f_by_k[-k] < f_by_k[-(k + 1)]


class TestPendulum:
    def test_zero_torque_matches_rollout_oracle(self):
        horizon, dt = 50, 0.1
        obj = make_pendulum_swingup(horizon, dt)
        theta, omega, cost = np.pi, 0.0, 0.0
        for _ in range(horizon):
            theta, omega = theta + dt * omega, omega + dt * np.sin(theta)
            err = abs((theta + np.pi) % (2 * np.pi) - np.pi)
            cost += (err**2 + 0.1 * omega**2) * dt
        assert abs(obj(np.zeros(horizon)) - cost) < 1e-12

    def test_one_step_closed_form(self):
        dt = 0.1
        obj = make_pendulum_swingup(1, dt)
        # from (pi, 0): theta_1 = pi, omega_1 = dt*u; cost(u) = (pi^2 +
        # (0.1 dt^2 + 0.001) u^2) dt, minimized at the clamped stationary point 0
        us = np.linspace(-2, 2, 401)
        expected = (np.pi**2 + (0.1 * dt**2 + 0.001) * us**2) * dt
        np.testing.assert_allclose(obj.batch(us[:, None]), expected, atol=1e-12)
        assert obj(np.array([0.0])) <= obj.batch(us[:, None]).min() + 1e-15

    def test_torque_clamp_inside_eval(self):
        obj = make_pendulum_swingup(5, 0.1)
        u = np.full(5, 10.0)
        assert obj(u) == obj(np.full(5, 2.0))

    def test_resolution_halving(self):
        coarse = make_pendulum_swingup(25, 0.2)
        fine = make_pendulum_swingup(50, 0.1)
        # same physical horizon, different discretization: both costs come
        # from the same rollout oracle and stay within discretization error
        c0 = coarse(np.zeros(25))
        f0 = fine(np.zeros(50))
        assert abs(c0 - f0) / f0 < 0.2
        assert c0 != f0


class TestObjectiveContracts:
    @pytest.mark.parametrize("obj_id", ["ackley:8", "levy:8", "rastrigin:8", "sphere:8", "gmm1d:canonical", "checker2d:canonical"])
    def test_optimum_metadata_local_minimality(self, obj_id):
        obj = make_objective(obj_id)
        x_star, f_star = obj.optimum
        assert abs(obj(x_star) - f_star) < 1e-12
        g = RngStream(5).derive(obj_id).generator()
        for _ in range(100):
            j = g.integers(obj.dim)
            delta = 1e-3 if g.random() < 0.5 else -1e-3
            x = x_star.copy()
            x[j] += delta
            assert obj(x) >= f_star - 1e-9

    @pytest.mark.parametrize("obj_id", ["ackley:6", "gmm1d:canonical", "checker2d:canonical", "pendulum:20:0.1"])
    def test_purity(self, obj_id):
        obj = make_objective(obj_id)
        g = RngStream(17).derive(obj_id).generator()
        xs = g.uniform(-2, 2, size=(10, obj.dim))
        first = obj.batch(xs)
        for _ in range(100):
            assert np.array_equal(obj.batch(xs), first)

    def test_registry_roundtrip_and_errors(self):
        assert make_objective("ackley:200").dim == 200
        assert make_objective("pendulum:50:0.1").dim == 50
        assert make_objective("gmm1d:canonical").dim == 1
        with pytest.raises(ConfigurationError):
            make_objective("ackley")
        with pytest.raises(ConfigurationError):
            make_objective("ackley:xyz")
        with pytest.raises(ConfigurationError):
            make_objective("gmm1d:other")
        with pytest.raises(ConfigurationError):
            make_objective("nosuch:3")
