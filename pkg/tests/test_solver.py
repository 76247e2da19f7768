"""
Tests for the exact formal solver and the residual check.
"""
import pytest
import sys
import os
from fractions import Fraction

from hypothesis import given, settings, strategies as st

# Add the parent directory to the path to import gevreykit
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from gevreykit.equation import (
    EquationSpec, LinearTerm, MultiIndex, NonlinearTerm, apply_C, im_pairs, normalize,
)
from gevreykit.fixtures import (
    e62_row1, example_e27, example_e62, example_regular, example_resonant, model_e58,
)
from gevreykit.series import BiSeries, UniSeries
from gevreykit.solver import (
    ResonanceError, build_rhs, build_rhs_enumerated, check_residual, required_trunc, residual,
    solve_formal, solve_linear_step, solve_state,
)
from gevreykit.validation import InvariantBreach


@st.composite
def small_specs(draw):
    """Equations with L(k, l) = k^m + l and random polynomial nonlinear terms."""
    m = draw(st.integers(min_value=1, max_value=2))
    pairs = sorted(im_pairs(m))
    terms = []
    for _ in range(draw(st.integers(min_value=1, max_value=3))):
        factors = draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=2))
        nu = MultiIndex.of([(p, 1) for p in factors])
        i = draw(st.integers(min_value=max(0, 2 - nu.order), max_value=2))
        coeffs = draw(st.lists(st.integers(min_value=-2, max_value=2), min_size=1, max_size=3))
        terms.append(NonlinearTerm(i, nu, UniSeries.from_coeffs(coeffs)))
    return EquationSpec(
        m=m,
        a=UniSeries.from_coeffs(draw(st.lists(st.integers(min_value=-2, max_value=2), min_size=1, max_size=3))),
        linear=(LinearTerm(0, 1, UniSeries.monomial(1, 1, -1)),),
        nonlinear=tuple(terms),
        trunc_x=6,
        name="random",
    )


class TestLinearStep:
    """Test the per-degree linear solve"""

    def test_inverse_of_apply_C(self):
        """Test apply_C(solve_linear_step(g)) = g"""
        norm = normalize(example_e27(trunc_x=10).spec)
        g = UniSeries.geometric(10, 3)
        for k in (1, 2, 5):
            w = solve_linear_step(norm, k, g)
            assert apply_C(norm, k, w) == g

    def test_resonance_raises_with_witness(self):
        """Test that L(k, l) = 0 stops the recurrence"""
        norm = normalize(example_resonant().spec)
        with pytest.raises(ResonanceError) as info:
            solve_formal(norm, 3, 5)
        assert info.value.witness == (1, 1)
        assert "condition (N) fails" in str(info.value)


class TestSolveFormal:
    """Test the exact recurrence"""

    def test_e62_coefficients(self):
        """Test u_{1,l} = (l-1)!, u_{2,3} = 1 and u_{2,4} = 15/2"""
        norm = normalize(example_e62().spec)
        u = solve_formal(norm, 4, 12)
        assert [u.coeff(1, l) for l in range(13)] == [e62_row1(l) for l in range(13)]
        assert u.coeff(2, 3) == 1
        assert u.coeff(2, 4) == Fraction(15, 2)
        assert u.row(0).is_zero()

    def test_trusted_rectangle(self):
        """Test that every row is trusted through L_x"""
        spec = example_e62().spec
        assert required_trunc(spec, 4, 12) == 18
        state = solve_state(normalize(spec), 4, 12)
        assert state.degree == 4
        assert min(state.trusted) >= 12
        u = solve_formal(normalize(spec), 4, 12)
        assert u.trunc_t == 4 and u.trunc_x == 12

    def test_zero_orders(self):
        """Test K_t = 0 and invalid orders"""
        norm = normalize(example_e62(trunc_x=10).spec)
        assert solve_formal(norm, 0, 5).trunc_t == 0
        with pytest.raises(ValueError):
            solve_formal(norm, -1, 5)

    def test_regular_solution_bounded(self):
        """Test that the convergent fixture has coefficients bounded by 1"""
        u = solve_formal(normalize(example_regular().spec), 6, 10)
        assert u.coeff(1, 0) == 1
        assert all(abs(v) <= 1 for _, _, v in u.items())

    @pytest.mark.parametrize("params", [(0, 1, 3, 1, 1), (4, 1, 3, 1, 1), (2, 0, 1, 1, 2)])
    def test_positivity_transport(self, params):
        """Test nonnegative coefficients when every sign hypothesis holds"""
        u = solve_formal(normalize(example_e27(*params, trunc_x=10).spec), 8, 10)
        assert all(v >= 0 for _, _, v in u.items())
        assert u.coeff(1, 0) > 0


class TestRightHandSide:
    """Test the two constructions of f_k"""

    @pytest.mark.parametrize("fixture", [
        example_e27(trunc_x=8), example_e62(trunc_x=8), model_e58(trunc_x=8), example_regular(trunc_x=8),
    ], ids=lambda f: f.name)
    def test_enumeration_matches_memoized(self, fixture):
        """Test partition enumeration against incremental substitution"""
        state = solve_state(normalize(fixture.spec), 6, 4)
        for k in range(1, 7):
            assert build_rhs(state.norm, state, k) == build_rhs_enumerated(state.norm, state.rows, k)

    @given(small_specs())
    @settings(max_examples=25, deadline=None)
    def test_enumeration_matches_random(self, spec):
        """Test both constructions on random small equations"""
        state = solve_state(normalize(spec), 5, 3)
        for k in range(1, 6):
            assert build_rhs(state.norm, state, k) == build_rhs_enumerated(state.norm, state.rows, k)

    def test_rhs_needs_previous_rows(self):
        """Test that f_k needs u_1..u_{k-1}"""
        state = solve_state(normalize(example_e62(trunc_x=8).spec), 1, 4)
        with pytest.raises(ValueError):
            build_rhs(state.norm, state, 4)


class TestResidual:
    """Test substitution back into the equation"""

    @pytest.mark.parametrize("fixture", [
        example_e27(trunc_x=8), example_e62(trunc_x=8), model_e58(trunc_x=8), model_e58(euler_variant=True, trunc_x=8),
        example_regular(trunc_x=8),
    ], ids=lambda f: f.name)
    def test_solution_residual_vanishes(self, fixture):
        """Test zero residual on the trusted region"""
        norm = normalize(fixture.spec)
        u = solve_formal(norm, 5, 6)
        assert check_residual(norm, u).is_zero()

    @given(small_specs())
    @settings(max_examples=15, deadline=None)
    def test_random_residual_vanishes(self, spec):
        """Test zero residual on random small equations"""
        norm = normalize(spec)
        assert residual(norm, solve_formal(norm, 4, 3)).is_zero()

    def test_perturbation_detected(self):
        """Test that u + t x leaves a residual at (1, 1)"""
        norm = normalize(example_e62().spec)
        u = solve_formal(norm, 3, 8)
        bump = BiSeries.from_coefficients({(1, 1): 1}, 3, 8)
        r = residual(norm, u + bump)
        assert min(r.nonzero()) == (1, 1)
        with pytest.raises(InvariantBreach, match=r"\(1,1\)"):
            check_residual(norm, u + bump)

    def test_decoupled_closed_form(self):
        """Test that the closed-form u_1(x) t solves the decoupled model equation"""
        fixture = model_e58(C=0, trunc_x=12)
        u1 = fixture.oracles['u1']
        d0 = fixture.oracles['model'].d0
        coeffs = {(1, l + d0): u1(l) for l in range(12 - d0 + 1)}
        u = BiSeries.from_coefficients(coeffs, 3, 12)
        assert residual(normalize(fixture.spec), u).is_zero()
