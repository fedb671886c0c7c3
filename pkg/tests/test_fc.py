import math

import numpy as np
import pytest

from dyncool import fc
from dyncool.errors import DomainError, SingularRatioError

from oracles import fc_modulus_series, laguerre_series


class TestLaguerre:
    def test_degree_zero_is_one(self):
        # any alpha within the domain rule alpha >= -n
        for alpha in (0, 5, 40):
            assert fc.laguerre_assoc(0, alpha, 7.3) == 1.0

    def test_degree_one_closed_form(self):
        # L_1^s(x) = 1 + s - x, zero at x = s + 1
        assert fc.laguerre_assoc(1, 8, 9.0) == 0.0
        assert fc.laguerre_assoc(1, 3, 1.5) == pytest.approx(2.5)

    def test_degree_two_dark_roots(self):
        # L_2^s zeros at x = (s+2)(1 +- (s+2)^{-1/2})
        s = 11
        for sign in (-1.0, 1.0):
            x = (s + 2) * (1.0 + sign / math.sqrt(s + 2))
            assert abs(fc.laguerre_assoc(2, s, x)) < 1e-12

    @pytest.mark.parametrize("n", [0, 1, 2, 3, 5, 9, 17, 33])
    @pytest.mark.parametrize("alpha", [0, 1, 4, 11])
    def test_against_series_oracle(self, n, alpha):
        for x in (0.25, 1.0, 9.0, 16.61):
            ref = laguerre_series(n, alpha, x)
            got = fc.laguerre_assoc(n, alpha, x)
            assert got == pytest.approx(ref, rel=1e-11, abs=1e-11 * abs(ref) + 1e-13)

    def test_negative_alpha_allowed_to_minus_n(self):
        # alpha = -n is fine; alpha < -n is outside the matrix-element domain
        assert fc.laguerre_assoc(2, -2, 3.0) == pytest.approx(laguerre_series(2, -2, 3.0))
        with pytest.raises(DomainError):
            fc.laguerre_assoc(2, -3, 3.0)

    def test_degree_cap(self):
        with pytest.raises(DomainError):
            fc.laguerre_assoc(fc.MAX_LAGUERRE_DEGREE + 1, 0, 1.0)
        with pytest.raises(DomainError):
            fc.laguerre_assoc(3, 0, float("inf"))


class TestFcFactor:
    def test_diagonal_ground_state(self):
        assert fc.fc_factor(3.0, 0, 0).value == pytest.approx(math.exp(-4.5), rel=1e-14)

    def test_zero_displacement_is_identity(self):
        for m, n in [(0, 0), (4, 4), (3, 7)]:
            expected = 1.0 if m == n else 0.0
            assert fc.fc_factor(0.0, m, n).value == expected

    def test_first_sideband_closed_form(self):
        value = fc.fc_factor(3.0, 0, 1).value
        assert abs(value) == pytest.approx(3.0 * math.exp(-4.5), rel=1e-14)
        assert value == pytest.approx(1j * 3.0 * math.exp(-4.5), rel=1e-14)

    def test_dark_transition_eta3(self):
        # eta^2 = s + 1 with s = 8 darkens level 1
        assert abs(fc.fc_factor(3.0, 1, 9).value) < 1e-12

    def test_modulus_symmetry(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            m, n = rng.integers(0, 61, size=2)
            eta = float(rng.uniform(0.1, 4.0))
            a = abs(fc.fc_factor(eta, int(m), int(n)).value)
            b = abs(fc.fc_factor(eta, int(n), int(m)).value)
            assert a == pytest.approx(b, abs=1e-14 * max(1.0, a))

    def test_negative_eta_parity(self):
        for m, n in [(0, 3), (2, 2), (1, 6)]:
            plus = fc.fc_factor(2.2, m, n).value
            minus = fc.fc_factor(-2.2, m, n).value
            assert minus == pytest.approx((-1) ** abs(n - m) * plus, rel=1e-14)

    @pytest.mark.parametrize("eta", [0.5, 1.0, 2.0, 3.0, 3.065, 4.0])
    def test_unitarity(self, eta):
        # row norm of the displacement operator; headroom covers the
        # mean shift eta^2 plus 8 sigma of the eta*sqrt(2m+1) spread
        # (plus slack for the fat Poisson tail at small m)
        for m in (0, 5, 17, 40):
            n_max = m + math.ceil(eta * eta + 8.0 * eta * math.sqrt(2 * m + 1)) + 6
            total = sum(abs(fc.fc_factor(eta, m, n).value) ** 2
                        for n in range(n_max + 1))
            assert 1.0 - 1e-8 <= total <= 1.0 + 1e-12

    def test_series_oracle_spot_checks(self):
        rng = np.random.default_rng(11)
        for _ in range(120):
            m = int(rng.integers(0, 31))
            s = int(rng.integers(-20, 21))
            n = m + s
            if n < 0:
                continue
            eta = float(rng.choice([0.5, 1.0, 2.0, 3.0, 3.065, 4.0]))
            ref = fc_modulus_series(eta, m, n)
            got = abs(fc.fc_factor(eta, m, n).value)
            if ref > 1e-30:
                assert got == pytest.approx(ref, rel=1e-10)


class TestFcRow:
    def test_zero_eta_unit_vector(self):
        row = fc.fc_row(0.0, 5, 10)
        expected = np.zeros(11, dtype=complex)
        expected[5] = 1.0
        assert np.array_equal(row, expected)

    def test_matches_fc_factor(self):
        for eta in (0.7, 3.0, -2.1):
            for m in (0, 1, 7, 20):
                row = fc.fc_row(eta, m, 60)
                for n in range(61):
                    ref = fc.fc_factor(eta, m, n).value
                    if abs(ref) > 1e-300:
                        assert abs(row[n] - ref) <= 1e-14 * abs(ref)
                    else:
                        assert abs(row[n]) <= 1e-300

    def test_unitarity_partial_sum(self):
        row = fc.fc_row(3.0, 0, 60)
        assert np.sum(np.abs(row) ** 2) >= 1.0 - 1e-10

    def test_dark_entry(self):
        row = fc.fc_row(3.0, 1, 60)
        assert abs(row[9]) < 1e-12

    def test_rejects_small_n_max(self):
        with pytest.raises(DomainError):
            fc.fc_row(1.0, 5, 3)


class TestDisplacementTable:
    def test_agrees_with_fc_factor(self):
        table = fc.displacement_table(3.0, 50, 60)
        for m in (0, 3, 25, 50):
            for l in (0, 10, 42, 60):
                ref = fc.fc_factor(3.0, m, l).value
                if abs(ref) > 1e-280:
                    assert abs(table[m, l] - ref) <= 1e-12 * abs(ref)

    def test_reduced_stack_many_etas(self):
        etas = np.array([-2.5, -0.3, 0.0, 0.9, 3.0])
        stack = fc.reduced_stack(etas, 20, 25)
        for k, eta in enumerate(etas):
            for n in (0, 7, 20):
                for l in (0, 13, 25):
                    ref = fc.fc_reduced(float(eta), l, n)
                    assert stack[k, n, l] == pytest.approx(ref, rel=1e-12, abs=1e-280)


class TestDarkSolvers:
    def test_level1_closed_form(self):
        for s in range(1, 21):
            roots = fc.dark_eta_for_level(1, s)
            assert len(roots) == 1
            assert roots[0] == pytest.approx(math.sqrt(s + 1), rel=1e-10)

    def test_level1_s_zero(self):
        assert fc.dark_eta_for_level(1, 0) == pytest.approx([1.0])

    def test_level2_closed_form(self):
        s = 11
        roots = fc.dark_eta_for_level(2, s)
        x_lo = (s + 2) * (1 - 1 / math.sqrt(s + 2))
        x_hi = (s + 2) * (1 + 1 / math.sqrt(s + 2))
        assert roots == pytest.approx([math.sqrt(x_lo), math.sqrt(x_hi)], rel=1e-10)

    @pytest.mark.parametrize("m", [1, 2, 3, 5, 8])
    @pytest.mark.parametrize("s", [0, 1, 4, 11])
    def test_root_count_and_residuals(self, m, s):
        roots = fc.dark_eta_for_level(m, s)
        assert len(roots) == m
        assert all(b > a for a, b in zip(roots, roots[1:]))
        for eta in roots:
            assert abs(fc.laguerre_assoc(m, s, eta * eta)) < 1e-10 * max(
                1.0, abs(laguerre_series(m, s, eta * eta + 0.1)))
            # the dark level really is dark
            assert abs(fc.fc_factor(eta, m, m + s).value) < 1e-10

    def test_level_zero_rejected(self):
        with pytest.raises(DomainError):
            fc.dark_eta_for_level(0, 3)


class TestDarkRatio:
    def test_published_one_eighth(self):
        assert fc.dark_ratio_A(3.0, (0, 1)) == pytest.approx(0.125 + 0j, abs=1e-15)

    def test_diagonal_targets_give_minus_one(self):
        for m in (0, 1, 3, 6):
            if abs(fc.fc_reduced(3.0, m, m)) > 1e-14:
                assert fc.dark_ratio_A(3.0, (m, m)) == pytest.approx(-1.0 + 0j)

    def test_singular_denominator(self):
        # L_1(1) = 0: the y-diagonal factor of level 1 vanishes at eta = 1
        with pytest.raises(SingularRatioError) as err:
            fc.dark_ratio_A(1.0, (0, 1))
        assert "1.0" in str(err.value)

    def test_design_bundles(self):
        d1 = fc.dark_design_for_level(2, 11)
        assert d1.eta_roots == pytest.approx(
            (math.sqrt(13 - math.sqrt(13)), math.sqrt(13 + math.sqrt(13))), rel=1e-10)
        d2 = fc.dark_design_for_ratio(3.0, (0, 1))
        assert d2.amplitude_ratio == pytest.approx(0.125 + 0j)
