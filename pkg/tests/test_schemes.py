import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from patankar_lab.pds import TestProblem, exact_solution, linear_pds
from patankar_lab.schemes import (
    SchemeConfig,
    SchemeError,
    SingularSystemError,
    StepContext,
    UnimplementedSchemeError,
    has_step,
    integrate,
    register_extension,
    solve_patankar_system,
    step,
)

Y0 = np.array([0.99, 0.01])


def ctx(theta=0.3, dt=0.1):
    return StepContext(TestProblem(theta).as_pds(), dt)


CATALOG = [SchemeConfig.mprk22(a) for a in (0.5, 1.0, 2.0, 5.0)] + [
    SchemeConfig.mpdec(p, fam) for fam in ("eq", "gl") for p in range(1, 10)
]


class TestIdentifiers:
    @pytest.mark.parametrize(
        "text,ident",
        [
            ("mprk22:1.0", "mprk22:1.0"),
            ("mprk22:1", "mprk22:1.0"),
            ("mpdec:3:eq", "mpdec:3:eq"),
            ("MPDEC:9:GL", "mpdec:9:gl"),
            ("sspmprk43", "sspmprk43"),
            ("ext:mprk43ab:2:0.6", "ext:mprk43ab:2:0.6"),
        ],
    )
    def test_round_trip(self, text, ident):
        cfg = SchemeConfig.parse(text)
        assert cfg.identifier == ident
        assert SchemeConfig.parse(cfg.identifier) == cfg

    @pytest.mark.parametrize("text", ["mprk22:0.4", "mpdec:0:eq", "mpdec:3:radau", "rk4", "mprk22"])
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            SchemeConfig.parse(text)

    def test_step_context_rejects_bad_dt(self):
        for dt in (0.0, -1.0, float("inf"), float("nan")):
            with pytest.raises(ValueError):
                ctx(dt=dt)


class TestSolve:
    def test_identity(self):
        assert np.allclose(solve_patankar_system(np.eye(2), [0.7, 0.3]), [0.7, 0.3])

    def test_symmetric(self):
        assert np.allclose(solve_patankar_system([[1.5, -0.5], [-0.5, 1.5]], [1, 1]), [1, 1])

    def test_cramer(self):
        a = np.array([[1.3, -0.7], [-0.3, 1.7]])
        b = np.array([0.99, 0.01])
        det = 1.3 * 1.7 - 0.7 * 0.3
        expected = [(0.99 * 1.7 + 0.7 * 0.01) / det, (1.3 * 0.01 + 0.3 * 0.99) / det]
        x = solve_patankar_system(a, b)
        assert np.allclose(x, expected, atol=1e-15)
        assert x == pytest.approx([0.845, 0.155], abs=1e-15)

    def test_pivoting(self):
        assert np.allclose(solve_patankar_system([[0.0, 1.0], [1.0, 0.0]], [2.0, 3.0]), [3.0, 2.0])

    def test_large_system_matches_numpy(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(12, 12)) + 12 * np.eye(12)
        b = rng.normal(size=12)
        assert np.allclose(solve_patankar_system(a, b), np.linalg.solve(a, b))

    @pytest.mark.parametrize("n", [2, 12])
    def test_singular(self, n):
        a = np.ones((n, n))
        with pytest.raises(SingularSystemError) as info:
            solve_patankar_system(a, np.ones(n))
        assert info.value.diagnostics["column"] == 1
        assert len(info.value.diagnostics["matrix"]) == n

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            solve_patankar_system(np.eye(3), [1.0, 2.0])


class TestStep:
    @pytest.mark.parametrize("scheme", CATALOG, ids=str)
    @pytest.mark.parametrize("dt", [1e-3, 0.7, 50.0, 1e4])
    def test_steady_state_fixed(self, scheme, dt):
        y = np.array([0.7, 0.3])
        assert np.max(np.abs(step(scheme, ctx(dt=dt), y) - y)) <= 1e-13

    def test_mpdec2_local_error(self):
        out = step(SchemeConfig.mpdec(2, "eq"), ctx(dt=0.1), Y0)
        assert out.sum() == pytest.approx(1.0, abs=1e-15)
        assert np.max(np.abs(out - exact_solution(TestProblem(0.3), Y0, 0.1))) < 0.1**3

    @pytest.mark.parametrize("dt", [0.05, 0.5, 3.0, 40.0])
    def test_mpdec2_is_mprk22_alpha_one(self, dt):
        a = step(SchemeConfig.mprk22(1.0), ctx(dt=dt), Y0)
        b = step(SchemeConfig.mpdec(2, "eq"), ctx(dt=dt), Y0)
        c = step(SchemeConfig.mpdec(2, "gl"), ctx(dt=dt), Y0)
        assert np.max(np.abs(a - b)) <= 1e-13
        assert np.max(np.abs(b - c)) <= 1e-13

    def test_mprk22_overshoots_at_dt3(self):
        # stage 1 by hand: (1 + 3*0.3) y1 - 3*0.7 y2 = 0.99 etc. with y = Y0
        out = step(SchemeConfig.mprk22(1.0), ctx(dt=3.0), Y0)
        assert out[1] > 0.3

    def test_patankar_euler_by_hand(self):
        # one MP Euler step on the test problem is the linear solve below
        dt, th = 0.5, 0.3
        a = np.array([[1 + dt * th, -dt * (1 - th)], [-dt * th, 1 + dt * (1 - th)]])
        expected = np.linalg.solve(a, Y0)
        assert np.allclose(step(SchemeConfig.mpdec(1, "eq"), ctx(th, dt), Y0), expected, atol=1e-15)

    def test_rejects_non_positive_state(self):
        with pytest.raises(ValueError):
            step(SchemeConfig.mprk22(1.0), ctx(), [1.0, 0.0])

    def test_general_dimension(self):
        rates = np.array([[0, 1.0, 0.5], [2.0, 0, 0.1], [0.2, 0.3, 0]])
        system = linear_pds(rates)
        y = np.array([0.2, 0.3, 0.5])
        for scheme in (SchemeConfig.mprk22(0.7), SchemeConfig.mpdec(5, "gl")):
            out = step(scheme, StepContext(system, 2.0), y)
            assert out.sum() == pytest.approx(1.0, abs=1e-14)
            assert np.all(out > 0)


class TestExtensions:
    def test_unregistered_extension(self):
        scheme = SchemeConfig.parse("sspmprk43")
        assert not has_step(scheme)
        with pytest.raises(UnimplementedSchemeError):
            step(scheme, ctx(), Y0)

    def test_registered_extension_runs_through_step(self):
        def euler_like(config, context, y):
            return step(SchemeConfig.mpdec(1, "eq"), context, y)

        register_extension("toy", euler_like)
        scheme = SchemeConfig.ext("toy")
        assert has_step(scheme)
        assert np.allclose(step(scheme, ctx(), Y0), step(SchemeConfig.mpdec(1, "eq"), ctx(), Y0))

    def test_non_positive_extension_output_is_rejected(self):
        register_extension("broken", lambda config, context, y: np.array([1.1, -0.1]))
        with pytest.raises(SchemeError):
            step(SchemeConfig.ext("broken"), ctx(), Y0)


class TestIntegrate:
    @pytest.mark.parametrize("scheme", [SchemeConfig.mprk22(1.0), SchemeConfig.mpdec(4, "gl")], ids=str)
    def test_constant_at_steady_state(self, scheme):
        traj = integrate(scheme, ctx(dt=0.3), [0.7, 0.3], 10)
        assert traj.shape == (11, 2)
        assert np.allclose(traj, [0.7, 0.3], atol=1e-13)

    def test_shape_and_conservation(self):
        traj = integrate(SchemeConfig.mprk22(1.0), ctx(dt=0.5), Y0, 20)
        assert traj.shape == (21, 2)
        assert np.allclose(traj.sum(axis=1), 1.0, atol=1e-14)

    def test_rejects_zero_steps(self):
        with pytest.raises(ValueError):
            integrate(SchemeConfig.mprk22(1.0), ctx(), Y0, 0)

    def test_error_carries_step_index(self):
        calls = []

        def flaky(config, context, y):
            calls.append(1)
            if len(calls) == 3:
                return np.array([1.0, -1.0])
            return y

        register_extension("flaky", flaky)
        with pytest.raises(SchemeError) as info:
            integrate(SchemeConfig.ext("flaky"), ctx(), Y0, 5)
        assert info.value.diagnostics["step_index"] == 2

    def test_mpdec3_gl_converges_third_order(self):
        prob = TestProblem(0.3)
        ref = exact_solution(prob, Y0, 1.0)
        errs = []
        for k in (5, 6, 7):
            traj = integrate(SchemeConfig.mpdec(3, "gl"), StepContext(prob.as_pds(), 2.0**-k), Y0, 2**k)
            errs.append(np.max(np.abs(traj[-1] - ref)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all((orders > 2.7) & (orders < 3.5))


@settings(max_examples=60, deadline=None)
@given(
    idx=st.integers(0, len(CATALOG) - 1),
    theta=st.floats(0.01, 0.99),
    eps=st.floats(1e-9, 1 - 1e-9),
    log_dt=st.floats(-4, 4),
)
def test_conservation_and_positivity(idx, theta, eps, log_dt):
    scheme = CATALOG[idx]
    y = np.array([1 - eps, eps])
    out = step(scheme, ctx(theta, 10.0**log_dt), y)
    assert abs(out.sum() - y.sum()) <= 1e-12
    assert np.all(out > 0)
