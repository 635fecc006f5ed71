"""Dispersion relations: evaluation, inversion, and assumption checking.

Frozen reference values are computed by oracles that share no code with the
implementation: integer powers with explicit root-bisection for fractional
exponents, and exp/log for the inverse map.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavekin.dispersion import (
    DispersionRelation,
    eval_mho,
    eval_omega,
    invert_omega,
)


def _pow_oracle(base: float, num: int, den: int) -> float:
    """base**(num/den) via integer powers and den-th root bisection."""
    target = 1.0
    for _ in range(num):
        target *= base

    lo, hi = 0.0, max(1.0, target)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid ** den < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestEvalOmega:
    def test_quadratic(self, d_quad):
        assert eval_omega(d_quad, 3.0) == 9.0
        assert eval_omega(d_quad, 0.0) == 0.0

    def test_three_halves_exact(self, d_mid):
        # 4**1.5 = 8 exactly in floating point
        assert eval_omega(d_mid, 4.0) == 8.0

    def test_fractional_power_frozen(self):
        d = DispersionRelation.power_law(1.7)
        expected = _pow_oracle(0.3, 17, 10)
        assert expected == pytest.approx(0.12915348607498026, abs=1e-15)
        assert eval_omega(d, 0.3) == pytest.approx(expected, rel=1e-14)

    def test_array_input(self, d_quad):
        out = eval_omega(d_quad, np.array([1.0, 2.0, 3.0]))
        assert np.array_equal(out, [1.0, 4.0, 9.0])

    def test_negative_radius_rejected(self, d_quad):
        with pytest.raises(ValueError):
            eval_omega(d_quad, -1.0)


class TestEvalMho:
    def test_quadratic_is_constant_half(self, d_quad):
        # mho = r / omega'(r) = r / (2r) = 1/2 at every radius
        assert eval_mho(d_quad, 5.0) == 0.5
        assert eval_mho(d_quad, 0.037) == 0.5

    def test_three_halves(self, d_mid):
        # (1/alpha) r^(2-alpha) = (2/3) sqrt(4) = 4/3
        assert eval_mho(d_mid, 4.0) == pytest.approx(4.0 / 3.0, rel=1e-15)

    def test_origin_value_depends_on_iota(self, d_quad, d_mid):
        # iota > 0: continuous extension by zero; iota = 0: undefined
        assert eval_mho(d_mid, 0.0) == 0.0
        with pytest.raises(ValueError, match="mho\\(0\\) undefined"):
            eval_mho(d_quad, 0.0)

    def test_negative_radius_rejected(self, d_mid):
        with pytest.raises(ValueError):
            eval_mho(d_mid, -0.5)


class TestInvertOmega:
    def test_exact_squares(self, d_quad):
        assert invert_omega(d_quad, 9.0) == pytest.approx(3.0, abs=1e-12)
        assert invert_omega(d_quad, 0.0) == 0.0

    def test_three_halves(self, d_mid):
        assert invert_omega(d_mid, 8.0) == pytest.approx(4.0, abs=1e-12)

    def test_frozen_value_alpha_13(self):
        d = DispersionRelation.power_law(1.3)
        expected = math.exp(math.log(2.6) / 1.3)
        assert expected == pytest.approx(2.0855003528924816, abs=1e-15)
        assert invert_omega(d, 2.6) == pytest.approx(expected, rel=1e-12)

    def test_negative_frequency_rejected(self, d_quad):
        with pytest.raises(ValueError):
            invert_omega(d_quad, -4.0)

    @settings(max_examples=200, deadline=None)
    @given(
        r=st.floats(min_value=1e-3, max_value=1e3),
        alpha=st.floats(min_value=1.0 + 1e-6, max_value=2.0),
    )
    def test_round_trip_property(self, r, alpha):
        d = DispersionRelation.power_law(alpha)
        r_back = invert_omega(d, eval_omega(d, r))
        assert abs(r_back - r) <= 1e-10 * max(1.0, r)


class TestAssumptions:
    @settings(max_examples=60, deadline=None)
    @given(alpha=st.floats(min_value=1.0 + 1e-6, max_value=2.0))
    def test_power_law_family_admissible(self, alpha):
        d = DispersionRelation.power_law(alpha)
        d.check_assumptions()  # must not raise
        assert d.iota == pytest.approx(2.0 - alpha)

    def test_omega_strictly_increasing_and_convex(self, d_mid):
        r = np.linspace(1e-3, 10.0, 400)
        w = eval_omega(d_mid, r)
        assert np.all(np.diff(w) > 0.0)
        assert np.all(np.diff(w, 2) >= -1e-12)

    def test_mho_nondecreasing(self, d_mid):
        r = np.linspace(1e-3, 10.0, 400)
        m = np.array([eval_mho(d_mid, x) for x in r])
        assert np.all(np.diff(m) >= -1e-12)

    def test_alpha_out_of_range_rejected(self):
        for bad in (1.0, 2.5, 0.5, -1.0):
            with pytest.raises(ValueError):
                DispersionRelation.power_law(bad)

    def test_sublinear_growth_names_the_bound(self):
        # sqrt growth cannot satisfy any superlinear lower envelope
        with pytest.raises(ValueError, match="lower growth bound"):
            DispersionRelation.custom(
                omega=lambda r: math.sqrt(r),
                omega_prime=lambda r: 0.5 / math.sqrt(r),
                alpha=1.5,
                alpha_prime=1.5,
                c_omega_lower=0.1,
                c_omega_upper=10.0,
                c_mho=10.0,
                iota=0.5,
            )

    def test_concave_segment_rejected(self):
        # convex, then a concave parabolic stretch on [5, 8], then linear:
        # every growth/mho constraint holds but the curvature check must fire
        def omega(r):
            if r <= 5.0:
                return r * r
            if r <= 8.0:
                return 25.0 + 10.0 * (r - 5.0) - 0.1 * (r - 5.0) ** 2
            return 54.1 + 9.4 * (r - 8.0)

        def omega_prime(r):
            if r <= 5.0:
                return 2.0 * r
            if r <= 8.0:
                return 10.0 - 0.2 * (r - 5.0)
            return 9.4

        with pytest.raises(ValueError, match="convexity"):
            DispersionRelation.custom(
                omega=omega,
                omega_prime=omega_prime,
                alpha=2.0,
                alpha_prime=2.0,
                c_omega_lower=1e-6,
                c_omega_upper=1.0,
                c_mho=500.0,
                iota=1.0,
            )

    def test_mho_dip_rejected(self):
        # a localized convexity spike makes omega' outrun r, so mho dips
        shift = 2.0 * math.exp(-50.0)  # pins omega(0) back to exactly 0

        def omega(r):
            return r * r - 2.0 * math.exp(-2.0 * (r - 5.0) ** 2) + shift

        def omega_prime(r):
            return 2.0 * r + 8.0 * (r - 5.0) * math.exp(-2.0 * (r - 5.0) ** 2)

        with pytest.raises(ValueError, match="mho"):
            DispersionRelation.custom(
                omega=omega,
                omega_prime=omega_prime,
                alpha=2.0,
                alpha_prime=2.0,
                c_omega_lower=0.5,
                c_omega_upper=1.5,
                c_mho=2.0,
                iota=0.0,
            )

    def test_custom_matching_power_law_accepted(self):
        d = DispersionRelation.custom(
            omega=lambda r: r ** 1.5,
            omega_prime=lambda r: 1.5 * r ** 0.5,
            alpha=1.5,
            alpha_prime=1.5,
            c_omega_lower=1.0,
            c_omega_upper=1.0,
            c_mho=2.0 / 3.0,
            iota=0.5,
        )
        assert eval_omega(d, 4.0) == pytest.approx(8.0, rel=1e-14)
        assert eval_mho(d, 4.0) == pytest.approx(4.0 / 3.0, rel=1e-14)
        assert invert_omega(d, 8.0) == pytest.approx(4.0, rel=1e-10)
