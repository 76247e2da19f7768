"""
Tests for the exact truncated series kernel.
"""
import math
import pytest
import sys
import os
from fractions import Fraction

from hypothesis import given, settings, strategies as st

# Add the parent directory to the path to import gevreykit
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from gevreykit.series import (
    BiSeries, GevreyOrder, SeriesDomainError, TruncationError, UniSeries, borel_m, dominance, dominates,
    dx, euler_op, falling_factorial, falling_op, format_rat, inverse_power_series, log_borel_m,
    majorant_abs, mul, nagumo_constant, parse_rat, parse_series_literal, read_biseries_csv, valuation2,
    write_biseries_csv,
)

small_rats = st.fractions(min_value=-5, max_value=5, max_denominator=6)


def series_strategy(trunc: int):
    return st.lists(small_rats, min_size=trunc + 1, max_size=trunc + 1).map(
        lambda values: UniSeries(tuple(values), trunc))


class TestRationals:
    """Test rational literals"""

    def test_parse_forms(self):
        """Test integers, p/q strings and Fractions"""
        assert parse_rat(3) == Fraction(3)
        assert parse_rat("-7/4") == Fraction(-7, 4)
        assert parse_rat(" 5 ") == Fraction(5)
        assert parse_rat(Fraction(1, 3)) == Fraction(1, 3)

    @pytest.mark.parametrize("bad", ["1/0", "x", "1.5", True, 2.0])
    def test_parse_rejects(self, bad):
        """Test that malformed literals are rejected"""
        with pytest.raises(SeriesDomainError):
            parse_rat(bad)

    def test_format(self):
        """Test literal rendering"""
        assert format_rat(Fraction(4)) == "4"
        assert format_rat(Fraction(-3, 2)) == "-3/2"

    def test_falling_factorial(self):
        """Test [n]_alpha including the vanishing range"""
        assert falling_factorial(5, 0) == 1
        assert falling_factorial(5, 2) == 20
        assert falling_factorial(1, 2) == 0
        assert falling_factorial(0, 1) == 0


class TestUniSeries:
    """Test truncated series in x"""

    def test_padding_and_access(self):
        """Test that short literals are padded and reads beyond trunc fail"""
        f = UniSeries.from_coeffs([1, 2], 4)
        assert f.coeffs == (1, 2, 0, 0, 0)
        assert f[4] == 0
        assert f[-1] == 0
        with pytest.raises(TruncationError):
            f[5]

    def test_literal_beyond_trunc(self):
        """Test that nonzero literal entries past the trusted order are an error"""
        assert parse_series_literal(["1", "0", "0"], 1).coeffs == (1, 0)
        with pytest.raises(TruncationError):
            parse_series_literal(["1", "0", "2"], 1)

    def test_builders_agree_beyond_trunc(self):
        """Test that from_coeffs rejects what the literal parser rejects and the constructor truncates"""
        assert UniSeries.from_coeffs([1, 0, 0], 1) == parse_series_literal(["1", "0", "0"], 1)
        with pytest.raises(TruncationError):
            UniSeries.from_coeffs([1, 0, 2], 1)
        assert UniSeries((1, 0, 2), 1).coeffs == (1, 0)

    def test_mul_geometric_square(self):
        """Test that (1/(1-x))^2 has coefficients l + 1"""
        g = UniSeries.geometric(10)
        assert mul(g, g).coeffs == tuple(Fraction(l + 1) for l in range(11))

    def test_mul_uses_smaller_trunc(self):
        """Test that products are trusted to the smaller order"""
        assert mul(UniSeries.geometric(3), UniSeries.geometric(7)).trunc == 3

    def test_dx_lowers_trunc(self):
        """Test derivatives and their trust loss"""
        f = UniSeries.from_coeffs([0, 0, 0, 1], 5)
        d2 = dx(f, 2)
        assert d2.trunc == 3
        assert d2.coeffs == (0, 6, 0, 0)
        with pytest.raises(TruncationError):
            dx(f, 6)

    def test_euler_and_falling_operators(self):
        """Test (x d/dx)^2 and [x d/dx]_2 coefficient weights"""
        f = UniSeries.geometric(4)
        assert euler_op(f, 2).coeffs == (0, 1, 4, 9, 16)
        assert falling_op(f, 2).coeffs == (0, 0, 2, 6, 12)

    def test_shift_down_requires_divisibility(self):
        """Test division by x^k"""
        f = UniSeries.from_coeffs([0, 0, 3], 4)
        assert f.shift_down(2).coeffs == (3, 0, 0)
        with pytest.raises(SeriesDomainError):
            UniSeries.from_coeffs([1], 3).shift_down(1)

    def test_valuation_and_zero(self):
        """Test first nonzero index"""
        assert UniSeries.monomial(3, 5).valuation() == 3
        assert UniSeries.zeros(5).valuation() is None
        assert UniSeries.zeros(5).is_zero()

    def test_dominates(self):
        """Test coefficientwise domination"""
        assert dominates(UniSeries.geometric(5, 2), UniSeries.geometric(5))
        assert not dominates(UniSeries.geometric(5), UniSeries.geometric(5, 2))

    def test_dominance_reports_common_order(self):
        """Test that domination is only decided up to the shorter trusted order"""
        assert dominance(UniSeries.geometric(5, 2), UniSeries.geometric(3)) == (True, 3)
        tail = UniSeries.from_coeffs([1, 1, 1, 100], 3)
        assert dominance(UniSeries.geometric(2), tail) == (True, 2)
        assert dominance(UniSeries.geometric(3), tail) == (False, 3)

    @given(series_strategy(6), series_strategy(6), series_strategy(6))
    @settings(max_examples=40, deadline=None)
    def test_mul_distributes(self, f, g, h):
        """Test f (g + h) = f g + f h exactly"""
        assert mul(f, g + h) == mul(f, g) + mul(f, h)

    @given(series_strategy(6), series_strategy(6))
    @settings(max_examples=40, deadline=None)
    def test_leibniz(self, f, g):
        """Test (f g)' = f' g + f g' on the common trusted order"""
        left = dx(mul(f, g), 1)
        right = mul(dx(f, 1), g) + mul(f, dx(g, 1))
        assert left.coeffs[:left.trunc + 1] == right.coeffs[:left.trunc + 1]


class TestBorel:
    """Test Borel-type weights"""

    def test_borel_exact(self):
        """Test that B_2 turns l! into 1"""
        f = UniSeries(tuple(math.factorial(l) for l in range(8)), 7)
        assert borel_m(f, 2, 0).coeffs == (1,) * 8

    def test_borel_shifted(self):
        """Test the shift m: orders below m pass through"""
        f = UniSeries(tuple(Fraction(math.factorial(max(l - 2, 0))) for l in range(6)), 5)
        assert borel_m(f, 2, 2).coeffs == (1,) * 6

    def test_borel_fractional_needs_log(self):
        """Test that sigma - 1 must be integral for exact weights"""
        with pytest.raises(SeriesDomainError):
            borel_m(UniSeries.geometric(3), Fraction(3, 2), 0)
        with pytest.raises(SeriesDomainError):
            borel_m(UniSeries.geometric(3), Fraction(1, 2), 0)

    def test_log_borel_matches_exact(self):
        """Test the float route against the exact route"""
        f = UniSeries(tuple(Fraction(math.factorial(l)) * 3 ** l for l in range(12)), 11)
        logs = log_borel_m(f, 2.0, 0)
        assert list(logs) == pytest.approx([l * math.log(3) for l in range(12)], abs=1e-9)

    def test_log_borel_zero_coefficient(self):
        """Test that zero coefficients map to -inf"""
        logs = log_borel_m(UniSeries.from_coeffs([0, 1], 1), 1.5)
        assert logs[0] == -math.inf

    def test_inverse_power_series(self):
        """Test C/(R - x)^b against the binomial series"""
        f = inverse_power_series(2, 1, 3, 6)
        assert f.coeffs == tuple(Fraction(2 * math.comb(j + 2, 2)) for j in range(7))
        with pytest.raises(SeriesDomainError):
            inverse_power_series(1, 0, 1, 3)

    def test_nagumo_constant(self):
        """Test the product form and its monotonicity in k"""
        assert nagumo_constant(1.0, 1.0, 0) == pytest.approx(1.0)
        assert nagumo_constant(0.0, 1.0, 2) == pytest.approx(math.exp(2) * 1 * 2)
        assert nagumo_constant(1.0, 2.0, 3) > nagumo_constant(1.0, 2.0, 2)

    @given(series_strategy(8), st.integers(min_value=0, max_value=3), st.integers(min_value=0, max_value=3))
    @settings(max_examples=100, deadline=None)
    def test_borel_monotone_in_m(self, f, m_low, extra):
        """Test B^(m') |f| << B^(m) |f| for m' <= m"""
        f = majorant_abs(f)
        assert dominates(borel_m(f, 2, m_low + extra), borel_m(f, 2, m_low))

    @given(series_strategy(8), st.integers(min_value=1, max_value=3))
    @settings(max_examples=100, deadline=None)
    def test_borel_monotone_in_sigma(self, f, step):
        """Test that a larger order gives a smaller transform of |f|"""
        f = majorant_abs(f)
        assert dominates(borel_m(f, 2, 0), borel_m(f, 2 + step, 0))

    @given(series_strategy(6), st.integers(min_value=0, max_value=3), st.integers(min_value=0, max_value=3))
    @settings(max_examples=100, deadline=None)
    def test_borel_commutes_with_shift(self, f, k, m):
        """Test B^(m+k)[x^k f] = x^k B^(m)[f]"""
        assert borel_m(f.shift(k), 3, m + k) == borel_m(f, 3, m).shift(k)

    @given(series_strategy(6), series_strategy(6))
    @settings(max_examples=100, deadline=None)
    def test_borel_product_domination(self, f, g):
        """Test B[|f| |g|] << B[|f|] B[|g|]"""
        f, g = majorant_abs(f), majorant_abs(g)
        assert dominates(mul(borel_m(f, 2, 0), borel_m(g, 2, 0)), borel_m(mul(f, g), 2, 0))

    @pytest.mark.parametrize("a", [1, 2, 3])
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_nagumo_derivative_bound(self, a, k):
        """Test B_2[d^k f] << A_k / (1 - x)^(a + 2k) when B_2[f] = 1 / (1 - x)^a"""
        trunc = 60
        majorant = inverse_power_series(1, 1, a, trunc)
        f = UniSeries(tuple(c * math.factorial(j) for j, c in enumerate(majorant.coeffs)), trunc)
        assert borel_m(f, 2, 0) == majorant
        lhs = borel_m(dx(f, k), 2, 0)
        rhs = inverse_power_series(1, 1, a + 2 * k, lhs.trunc)
        constant = nagumo_constant(float(a), 2.0, k)
        for j in range(lhs.trunc + 1):
            assert float(lhs[j]) <= constant * float(rhs[j]) * (1 + 1e-12)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_nagumo_factorial_row(self, k):
        """Test the derivative bound on (l - 1)!, whose B_2 transform is 1/l << 1/(1 - x)"""
        trunc = 60
        values = [Fraction(0)] + [Fraction(math.factorial(l - 1)) for l in range(1, trunc + 1)]
        f = UniSeries(tuple(values), trunc)
        assert dominates(inverse_power_series(1, 1, 1, trunc), borel_m(f, 2, 0))
        lhs = borel_m(dx(f, k), 2, 0)
        rhs = inverse_power_series(1, 1, 1 + 2 * k, lhs.trunc)
        constant = nagumo_constant(1.0, 2.0, k)
        assert all(float(lhs[j]) <= constant * float(rhs[j]) * (1 + 1e-12) for j in range(lhs.trunc + 1))


class TestValuation:
    """Test the two-variable valuation"""

    def test_minimum_weight(self):
        """Test min{i + |nu|} over surviving terms"""
        F = {(1, 1): UniSeries.from_coeffs([1], 3), (0, 1): UniSeries.from_coeffs([0, 2], 3)}
        assert valuation2(F, at_x_zero=True) == 2
        assert valuation2(F, at_x_zero=False) == 1

    def test_empty_is_infinite(self):
        """Test that nothing surviving gives infinity"""
        assert valuation2({}) == math.inf

    def test_gevrey_order_domain(self):
        """Test G(s, sigma) needs both orders >= 1"""
        assert str(GevreyOrder(2, "3/2")) == "G(2, 3/2)"
        with pytest.raises(SeriesDomainError):
            GevreyOrder(0, 1)


class TestBiSeries:
    """Test two-variable series"""

    def test_rows_keep_own_trust(self):
        """Test per-row trusted orders and the common trusted order"""
        u = BiSeries((UniSeries.zeros(5), UniSeries.geometric(3)))
        assert u.trunc_t == 1
        assert u.trunc_x == 3
        assert u.row_trunc(0) == 5

    def test_euler_t_and_shift(self):
        """Test (t d/dt) and multiplication by t"""
        u = BiSeries.from_coefficients({(1, 0): 1, (2, 1): 3}, 3, 2)
        assert u.euler_t(1).coeff(2, 1) == 6
        shifted = u.shift_t(1)
        assert shifted.coeff(2, 0) == 1
        assert shifted.coeff(3, 1) == 3
        assert shifted.trunc_t == 3

    def test_mul_is_cauchy_product(self):
        """Test (t x + t^2)^2 = t^2 x^2 + 2 t^3 x + t^4"""
        u = BiSeries.from_coefficients({(1, 1): 1, (2, 0): 1}, 4, 3)
        sq = u.mul(u)
        assert sq.nonzero() == {(2, 2): 1, (3, 1): 2, (4, 0): 1}

    def test_from_coefficients_bounds(self):
        """Test that coefficients outside the rectangle are rejected"""
        with pytest.raises(TruncationError):
            BiSeries.from_coefficients({(3, 0): 1}, 2, 2)

    def test_row_beyond_trunc(self):
        """Test reading a missing t-row"""
        with pytest.raises(TruncationError):
            BiSeries.zeros(1, 1).row(2)

    def test_csv_reingest(self, tmp_path):
        """Test that a written coefficient table reads back with row truncations"""
        u = BiSeries((UniSeries.zeros(4), UniSeries.from_coeffs(["1/2", -3], 2)))
        path = write_biseries_csv(u, str(tmp_path / "u.csv"))
        assert read_biseries_csv(path) == u

    def test_csv_bad_header(self, tmp_path):
        """Test header validation"""
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c,d\n0,0,1,1\n")
        with pytest.raises(SeriesDomainError):
            read_biseries_csv(str(path))

    def test_csv_gap(self, tmp_path):
        """Test that a row with a missing order is rejected"""
        path = tmp_path / "gap.csv"
        path.write_text("k,l,numerator,denominator\n0,0,0,1\n0,2,1,1\n")
        with pytest.raises(SeriesDomainError):
            read_biseries_csv(str(path))
