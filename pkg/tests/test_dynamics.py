import numpy as np
import pytest
from scipy.integrate import solve_ivp

from rcforecast.dynamics import (DivergenceError, SystemSpec, TimeSeries,
                                 builtin_names, builtin_system, generate,
                                 integrate, sample_test_ics)

ALL_SYSTEMS = builtin_names()


def _linear_system(rate=-1.0, dim=1):
    a = np.full(dim, rate) if np.isscalar(rate) else np.asarray(rate, dtype=float)

    def rhs(x, t=0.0):
        return a * x

    def jac(x):
        return np.diag(a)

    return SystemSpec(name="linear", dim=dim, rhs=rhs, jacobian=jac,
                      reference_les=tuple(a), lambda1=1.0, default_dt=0.01,
                      default_ic=np.ones(dim))


class TestTimeSeries:
    def test_validation(self):
        with pytest.raises(ValueError, match="2-D"):
            TimeSeries(np.zeros(5), 0.1)
        with pytest.raises(ValueError, match="2 samples"):
            TimeSeries(np.zeros((3, 1)), 0.1)
        with pytest.raises(ValueError, match="dt"):
            TimeSeries(np.zeros((3, 5)), 0.0)
        with pytest.raises(ValueError, match="finite"):
            TimeSeries(np.full((2, 4), np.nan), 0.1)

    def test_window_and_props(self):
        ts = TimeSeries(np.arange(12.0).reshape(2, 6), 0.5)
        assert ts.dim == 2 and ts.len == 6 and ts.span == 3.0
        w = ts.window(2, 5)
        assert w.len == 3
        assert np.array_equal(w.values, ts.values[:, 2:5])


class TestBuiltins:
    def test_unknown_name_lists_valid(self):
        with pytest.raises(ValueError, match="l96_40d"):
            builtin_system("lorenz")

    @pytest.mark.parametrize("name", ALL_SYSTEMS)
    def test_reference_spectrum_invariants(self, name):
        sys = builtin_system(name)
        ref = np.array(sys.reference_les)
        assert sys.lambda1 > 0
        assert sys.tau_lambda == pytest.approx(1.0 / sys.lambda1)
        if sys.reference_complete:
            # continuous flow: one exponent is 0 and the sum is dissipative
            assert np.sum(np.abs(ref) <= 0.01) >= 1
            assert ref.sum() <= 0

    @pytest.mark.parametrize("name", ALL_SYSTEMS)
    def test_jacobian_matches_finite_differences(self, name):
        sys = builtin_system(name)
        series = generate(sys, 2000, seed=9)
        rng = np.random.default_rng(42)
        h = 1e-6
        for _ in range(100):
            x = series.values[:, rng.integers(0, series.len)]
            jac = sys.jacobian(x)
            fd = np.empty_like(jac)
            for j in range(sys.dim):
                e = np.zeros(sys.dim)
                e[j] = h
                fd[:, j] = (sys.rhs(x + e, 0.0) - sys.rhs(x - e, 0.0)) / (2 * h)
            scale = max(np.max(np.abs(jac)), 1.0)
            assert np.max(np.abs(jac - fd)) / scale < 1e-5

    def test_l63_reference_values(self):
        sys = builtin_system("l63")
        assert tuple(sys.reference_les) == (0.9, 0.0, -14.7)
        # fixed points of the flow at (+-sqrt(beta(rho-1)), same, rho-1)
        c = np.sqrt((8.0 / 3.0) * 27.0)
        for s in (+1.0, -1.0):
            fp = np.array([s * c, s * c, 27.0])
            assert np.allclose(sys.rhs(fp, 0.0), 0.0, atol=1e-12)
            assert np.allclose(np.abs(fp[:2]), 8.485, atol=1e-3)

    def test_l96_40d_leading_exponent(self):
        assert builtin_system("l96_40d").lambda1 == pytest.approx(1.68)

    def test_malkus_com_relaxation(self):
        # with the wheel at rest the z equation relaxes toward R at the leak rate
        sys = builtin_system("malkus")
        rr, leak = 1.0, 0.1
        for z in (0.0, 0.4, 2.0):
            dz = sys.rhs(np.array([0.0, 0.3, z]), 0.0)[2]
            assert dz == pytest.approx(leak * (rr - z))


class TestIntegrate:
    def test_zero_rhs_constant(self):
        sys = SystemSpec(name="null", dim=2, rhs=lambda x, t=0.0: np.zeros(2),
                         jacobian=lambda x: np.zeros((2, 2)),
                         reference_les=(0.0,), lambda1=1.0, default_dt=0.1,
                         default_ic=np.zeros(2))
        x0 = np.array([1.5, -2.5])
        ts = integrate(sys, x0, 0.1, 50)
        assert ts.len == 50
        assert np.all(ts.values == x0[:, None])

    def test_linear_decay_analytic(self):
        ts = integrate(_linear_system(-1.0), np.array([1.0]), 0.1, 10)
        assert abs(ts.values[0, -1] - np.exp(-1.0)) < 1e-5

    def test_rk4_order(self):
        # halving dt shrinks the endpoint error ~16x on a smooth system
        sys = _linear_system((-0.5, -1.3), dim=2)
        x0 = np.array([1.0, 1.0])
        exact = x0 * np.exp(np.array([-0.5, -1.3]))
        err = []
        for dt, steps in ((0.1, 10), (0.05, 20)):
            ts = integrate(sys, x0, dt, steps)
            err.append(np.max(np.abs(ts.values[:, -1] - exact)))
        ratio = err[0] / err[1]
        assert 12.0 < ratio < 20.0

    def test_divergence_reports_step(self):
        sys = SystemSpec(name="blow", dim=1,
                         rhs=lambda x, t=0.0: x * x,
                         jacobian=lambda x: 2 * x[None, :],
                         reference_les=(1.0,), lambda1=1.0, default_dt=0.1,
                         default_ic=np.ones(1))
        with pytest.raises(DivergenceError, match=r"step \d+"):
            integrate(sys, np.array([50.0]), 0.5, 1000)

    def test_l63_longrun_means(self):
        # independent oracle: adaptive RK45 from scipy on the same vector field
        sys = builtin_system("l63")
        ours = generate(sys, 100_000, seed=2, transient_discard=1000)
        sol = solve_ivp(lambda t, x: sys.rhs(x, t), (0.0, 1100.0),
                        np.array([-8.6, -8.4, 27.0]), method="RK45",
                        rtol=1e-9, atol=1e-9, dense_output=False,
                        t_eval=np.linspace(100.0, 1100.0, 50_000))
        oracle_means = sol.y.mean(axis=1)
        our_means = ours.values.mean(axis=1)
        stds = ours.values.std(axis=1)
        # x and y center on 0 (tolerance scaled by the attractor width),
        # z centers on rho - 1 = 27 - (8/3 -> ~23.5) within 5%
        for m in (our_means, oracle_means):
            assert abs(m[0]) < 0.05 * stds[0] + 0.3
            assert abs(m[1]) < 0.05 * stds[1] + 0.3
            assert abs(m[2] - 23.5) < 0.05 * 23.5
        assert abs(our_means[2] - oracle_means[2]) < 0.05 * 23.5

    def test_l96_rotation_equivariance(self):
        sys = builtin_system("l96_5d")
        rng = np.random.default_rng(0)
        x0 = 8.0 + rng.standard_normal(5)
        for k in (1, 2):
            a = integrate(sys, np.roll(x0, k), 0.01, 200)
            b = integrate(sys, x0, 0.01, 200)
            assert np.array_equal(a.values, np.roll(b.values, k, axis=0))


class TestSampleTestIcs:
    def test_spacing_and_values(self):
        ts = TimeSeries(np.arange(2000.0)[None, :], 0.1)
        ics = sample_test_ics(ts, 2, 400, seed=3)
        (i0, s0), (i1, s1) = ics
        assert i1 - i0 >= 400
        assert s0[0] == float(i0) and s1[0] == float(i1)

    def test_protocol_scale(self):
        ts = TimeSeries(np.zeros((3, 70_000)) + np.arange(70_000), 0.01)
        ics = sample_test_ics(ts, 200, 300, seed=1)
        idx = np.array([i for i, _ in ics])
        assert idx.size == 200
        assert np.all(np.diff(idx) >= 300)

    def test_infeasible(self):
        ts = TimeSeries(np.zeros((2, 100)), 0.1)
        with pytest.raises(ValueError, match="1991"):
            sample_test_ics(ts, 200, 10)

    def test_deterministic_per_seed(self):
        ts = TimeSeries(np.random.default_rng(0).normal(size=(2, 5000)), 0.1)
        a = sample_test_ics(ts, 20, 100, seed=5)
        b = sample_test_ics(ts, 20, 100, seed=5)
        c = sample_test_ics(ts, 20, 100, seed=6)
        assert [i for i, _ in a] == [i for i, _ in b]
        assert [i for i, _ in a] != [i for i, _ in c]

    def test_bounds_respected(self):
        ts = TimeSeries(np.zeros((1, 1000)), 0.1)
        ics = sample_test_ics(ts, 5, 50, seed=0, lo=100, hi=900)
        idx = [i for i, _ in ics]
        assert min(idx) >= 100 and max(idx) < 900
