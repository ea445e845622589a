import math

import numpy as np
import pytest

from patankar_lab.schemes import SchemeConfig
from patankar_lab.stability import (
    NotInCatalogError,
    RationalFn,
    StabilityEvaluator,
    StabilityMode,
    check_eigenstructure,
    closed_form,
    has_closed_form,
    jacobian_R,
    lyapunov_dt0,
    mpdec_recurrence,
    mprk22_bound,
)

CLOSED = [
    SchemeConfig.mprk22(1.0),
    SchemeConfig.mprk22(3.0),
    SchemeConfig.mpdec(2, "eq"),
    SchemeConfig.mpdec(3, "eq"),
    SchemeConfig.mpdec(3, "gl"),
    SchemeConfig.mpdec(4, "eq"),
    SchemeConfig.mpdec(4, "gl"),
    SchemeConfig.parse("sspmprk43"),
]


@pytest.mark.parametrize("scheme", CLOSED, ids=str)
def test_consistency_at_zero(scheme):
    assert closed_form(scheme)(0.0) == pytest.approx(1.0, abs=1e-14)


def test_not_in_catalog():
    for text in ("mpdec:5:eq", "mpdec:1:gl", "mprk32", "ext:mprk43ab:2:0.6"):
        scheme = SchemeConfig.parse(text)
        assert not has_closed_form(scheme)
        with pytest.raises(NotInCatalogError):
            closed_form(scheme)


def test_mprk22_value_by_hand():
    # (2 + 0.2 - 0.01) / (2 * 1.1 * 1.1)
    assert closed_form(SchemeConfig.mprk22(1.0))(-0.1) == pytest.approx(2.19 / 2.42, abs=1e-15)


@pytest.mark.parametrize("alpha", [0.5, 0.75, 1.0, 2.0, 5.0])
def test_mprk22_numerator_root(alpha):
    roots = closed_form(SchemeConfig.mprk22(alpha)).zeros()
    assert np.min(np.abs(roots - (-(alpha + math.sqrt(alpha**2 + 2))))) < 1e-12


def test_r2_at_minus_one():
    # (-1 + 2 + 2) / (2 * 4)
    assert mpdec_recurrence(2, "eq", -1.0) == pytest.approx(0.375, abs=1e-15)
    assert closed_form(SchemeConfig.mpdec(2, "gl"))(-1.0) == pytest.approx(0.375, abs=1e-15)


def test_sspmprk43_at_zero_is_ratio_of_leading_terms():
    rf = closed_form(SchemeConfig.parse("sspmprk43"))
    assert rf.numerator[0] / rf.denominator[0] == 1.0


def test_rational_from_factors_expands():
    rf = RationalFn.from_factors((1.0,), 2.0, [((1.0, -1.0), 2)])
    assert np.allclose(rf.denominator, [2.0, -4.0, 2.0])
    assert np.allclose(sorted(rf.poles().real), [1.0, 1.0])


class TestRecurrence:
    @pytest.mark.parametrize("z", [-0.3, -1.0, -4.0, 0.2, 0.1 + 0.5j])
    def test_p2_matches_closed_form(self, z):
        assert mpdec_recurrence(2, "eq", z) == pytest.approx(closed_form(SchemeConfig.mpdec(2, "eq"))(z), rel=1e-12)

    @pytest.mark.parametrize("z", [-0.5, -1.0, -2.0, -5.0])
    def test_p3(self, z):
        ref = closed_form(SchemeConfig.mpdec(3, "eq"))(z)
        assert mpdec_recurrence(3, "eq", z) == pytest.approx(ref, rel=1e-10)
        assert mpdec_recurrence(3, "gl", z) == pytest.approx(ref, rel=1e-10)

    @pytest.mark.parametrize("family", ["eq", "gl"])
    def test_p4(self, family):
        zs = -np.geomspace(1e-3, 50, 40)
        ref = closed_form(SchemeConfig.mpdec(4, family))(zs)
        got = mpdec_recurrence(4, family, zs)
        assert np.max(np.abs(got - ref) / np.maximum(1, np.abs(ref))) < 1e-10

    def test_vectorised_shape(self):
        out = mpdec_recurrence(5, "gl", np.array([[-1.0, -2.0], [-3.0, -4.0]]))
        assert out.shape == (2, 2)
        assert out[0, 1] == pytest.approx(mpdec_recurrence(5, "gl", -2.0))

    @pytest.mark.parametrize("p", range(1, 10))
    def test_consistency(self, p):
        assert mpdec_recurrence(p, "eq", 0.0) == pytest.approx(1.0)


class TestJacobian:
    def test_mprk22_against_closed_form(self):
        assert jacobian_R(SchemeConfig.mprk22(1.0), 0.3, 0.1, h=1e-6) == pytest.approx(2.19 / 2.42, abs=1e-8)

    @pytest.mark.parametrize("scheme", [SchemeConfig.mprk22(2.0), SchemeConfig.mpdec(5, "eq")], ids=str)
    def test_small_dt_consistency(self, scheme):
        assert jacobian_R(scheme, 0.4, 1e-3) == pytest.approx(1.0, abs=1e-3)

    @pytest.mark.parametrize("dt", [0.4, 2.5, 7.0])
    def test_theta_independence(self, dt):
        scheme = SchemeConfig.mpdec(4, "gl")
        assert jacobian_R(scheme, 0.2, dt) == pytest.approx(jacobian_R(scheme, 0.7, dt), abs=1e-7)

    def test_rejects_large_h(self):
        with pytest.raises(ValueError):
            jacobian_R(SchemeConfig.mprk22(1.0), 0.1, 1.0, h=0.05)

    @pytest.mark.parametrize("bad", [0.0, 1.0])
    def test_rejects_bad_theta(self, bad):
        with pytest.raises(ValueError):
            jacobian_R(SchemeConfig.mprk22(1.0), bad, 1.0)

    @pytest.mark.parametrize(
        "scheme,theta,dt",
        [(SchemeConfig.mprk22(1.0), 0.3, 1.0), (SchemeConfig.mpdec(3, "gl"), 0.5, 2.0), (SchemeConfig.mpdec(7, "eq"), 0.8, 5.0)],
        ids=str,
    )
    def test_eigenstructure(self, scheme, theta, dt):
        diag = check_eigenstructure(scheme, theta, dt)
        assert diag.fixed_residual <= 1e-6
        assert diag.eigen_residual <= 1e-6
        assert diag.ok()


class TestEvaluator:
    def test_modes_agree(self):
        scheme = SchemeConfig.mpdec(3, "gl")
        vals = [StabilityEvaluator(scheme, m)(-1.7) for m in ("closed", "recurrence", "jacobian")]
        assert vals[0] == pytest.approx(vals[1], rel=1e-12)
        assert vals[0] == pytest.approx(vals[2], rel=1e-6)

    def test_mode_restrictions(self):
        with pytest.raises(NotInCatalogError):
            StabilityEvaluator(SchemeConfig.mpdec(6, "eq"), "closed")
        with pytest.raises(NotInCatalogError):
            StabilityEvaluator(SchemeConfig.mprk22(1.0), "recurrence")
        with pytest.raises(ValueError):
            StabilityEvaluator(SchemeConfig.mprk22(1.0), "jacobian")(0.5)
        with pytest.raises(ValueError):
            StabilityMode.parse("contour")


class TestLyapunov:
    @pytest.mark.parametrize("alpha", [0.5, 0.75, 1.0, 2.0, 5.0])
    def test_mprk22_formula(self, alpha):
        bound = lyapunov_dt0(SchemeConfig.mprk22(alpha))
        assert bound.dt0 == pytest.approx(mprk22_bound(alpha), abs=1e-8)
        assert bound.bracket[1] - bound.bracket[0] <= 1e-10

    def test_mpdec4_gl(self):
        assert lyapunov_dt0(SchemeConfig.mpdec(4, "gl")).dt0 == pytest.approx(3.62, abs=0.01)

    def test_mpdec6_eq_is_unbounded(self):
        bound = lyapunov_dt0(SchemeConfig.mpdec(6, "eq"))
        assert bound.dt0 == math.inf and bound.status == "inf" and not bound.finite

    def test_root_and_sign(self):
        scheme = SchemeConfig.mpdec(5, "gl")
        bound = lyapunov_dt0(scheme)
        R = StabilityEvaluator(scheme, "recurrence")
        assert abs(R(-bound.dt0)) < 1e-8
        assert np.all(R(-np.geomspace(1e-3, bound.bracket[0], 500)) > 0)

    def test_scan_limit_recorded(self):
        bound = lyapunov_dt0(SchemeConfig.mpdec(9, "gl"), scan_limit=10.0)
        assert bound.status == "inf" and bound.scan_limit == 10.0

    def test_pole_reported(self, monkeypatch):
        # R = 1 / (1 + z/2): sign change at dt = 2 through a pole, no zero
        from patankar_lab import stability

        scheme = SchemeConfig.ext("polar")
        monkeypatch.setattr(stability, "closed_form", lambda s: RationalFn((1.0,), (1.0, 0.5)))
        bound = lyapunov_dt0(scheme, "closed", scan_limit=10.0)
        assert bound.status == "pole"
        assert bound.pole_at == pytest.approx(2.0, abs=1e-6)
        assert math.isnan(bound.dt0)
