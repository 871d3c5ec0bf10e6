import numpy as np
import pytest

from hybridlab.grid import GridSpec, grid_moments, init_product_gaussian
from hybridlab.observables import (
    KindMismatchError,
    ObservableKind,
    ObservableSpec,
    ParseError,
    apply_quantum,
    classical,
    classical_partial,
    classical_poisson,
    classical_value,
    parse_observable,
    quantum,
    quantum_commutator_over_ihbar,
)


class TestParsing:
    @pytest.mark.parametrize("text", [
        "C[ x*u ]",
        "C[ x*x + u*u ]",
        "C[ 2*x ]",
        "C[ 0.5*x*u + 3*u ]",
        "Q[ q ]",
        "Q[ sym(q*p') ]",
        "Q[ sym(p'*p') ]",
        "Q[ q*q + 2*sym(x*k) ]",
    ])
    def test_round_trip(self, text):
        spec = parse_observable(text)
        again = parse_observable(str(spec))
        assert again == spec

    def test_shorthand_helpers(self):
        assert classical("x*u") == parse_observable("C[ x*u ]")
        assert quantum("sym(q*p')") == parse_observable("Q[ sym(q*p') ]")

    def test_signs_and_constants(self):
        spec = classical("1 - 2*x + x*u")
        assert spec.terms == ((1.0, ()), (-2.0, ("x",)), (1.0, ("x", "u")))

    def test_primed_symbols(self):
        spec = quantum("q'*p'")
        assert spec.terms == ((1.0, ("q'", "p'")),)

    @pytest.mark.parametrize("text", [
        "C[ q ]",            # quantum primitive in a classical spec
        "Q[ u ]",            # classical primitive in a quantum spec
        "X[ x ]",
        "C[ x u ]",          # missing '*'
        "C[ x",
        "Q[ sym(q*p' ]",     # unclosed sym
        "C[ x ? u ]",
    ])
    def test_rejects_malformed(self, text):
        with pytest.raises((ParseError, ValueError)):
            parse_observable(text)

    def test_mode_support(self):
        assert quantum("sym(q*p')").mode_support == {"Q", "Qprime"}
        assert quantum("x*k").mode_support == {"C"}
        assert classical("x*u").mode_support == {"C"}


class TestClassicalCalculus:
    def test_value_evaluation(self):
        x = np.array([1.0, 2.0])
        u = np.array([3.0, -1.0])
        spec = classical("2*x*u + u*u - 1")
        np.testing.assert_allclose(classical_value(spec, x, u),
                                   2 * x * u + u * u - 1)

    def test_partial_derivatives(self):
        spec = classical("x*x*u")
        dx = classical_partial(spec, "x")
        du = classical_partial(spec, "u")
        x = np.linspace(-1, 1, 5)
        u = np.linspace(0, 2, 5)
        np.testing.assert_allclose(classical_value(dx, x, u), 2 * x * u)
        np.testing.assert_allclose(classical_value(du, x, u), x * x)

    def test_poisson_canonical_pair(self):
        pb = classical_poisson(classical("x"), classical("u"))
        x = np.zeros(3)
        np.testing.assert_allclose(classical_value(pb, x, x), 1.0)

    def test_poisson_antisymmetry(self):
        a, b = classical("x*x"), classical("x*u + u*u")
        x = np.linspace(-2, 2, 7)
        u = np.linspace(-1, 3, 7)
        np.testing.assert_allclose(
            classical_value(classical_poisson(a, b), x, u),
            -classical_value(classical_poisson(b, a), x, u))

    def test_kind_checked(self):
        with pytest.raises(KindMismatchError):
            classical_value(quantum("q"), np.zeros(2), np.zeros(2))
        with pytest.raises(KindMismatchError):
            classical_partial(quantum("q"), "x")


@pytest.fixture(scope="module")
def state():
    spec = GridSpec((64, 32, 32), (10.0, 8.0, 8.0))
    return init_product_gaussian(spec, means=(0.5, 0.0, 0.0),
                                 widths=(0.9, None, None),
                                 tilts=(0.4, 0.0, 0.0))


class TestQuantumApplication:
    def expectation(self, spec, state):
        field = apply_quantum(spec, state)
        return float(np.real(np.sum(np.conj(state.amplitudes) * field))
                     * state.spec.cell_volume)

    def test_first_moments_match_grid_moments(self, state):
        means, _ = grid_moments(state)
        assert self.expectation(quantum("q"), state) \
            == pytest.approx(means[0], abs=1e-12)
        assert self.expectation(quantum("p"), state) \
            == pytest.approx(means[1], abs=1e-12)

    def test_symmetrized_cross_moment(self, state):
        means, cov = grid_moments(state)
        val = self.expectation(quantum("sym(q*p)"), state)
        assert val == pytest.approx(cov[0, 1] + means[0] * means[1], abs=1e-10)

    def test_symmetrization_order_invariance(self, state):
        a = apply_quantum(quantum("sym(q*p)"), state)
        b = apply_quantum(quantum("sym(p*q)"), state)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_unsymmetrized_product_differs_by_commutator(self, state):
        qp = apply_quantum(quantum("q*p"), state, symmetrize=False)
        pq = apply_quantum(quantum("p*q"), state, symmetrize=False)
        np.testing.assert_allclose(qp - pq, 1j * state.spec.hbar
                                   * state.amplitudes, atol=1e-8)

    def test_canonical_commutator(self, state):
        field = quantum_commutator_over_ihbar(quantum("q"), quantum("p"), state)
        np.testing.assert_allclose(field, state.amplitudes, atol=1e-8)

    def test_commuting_pair(self, state):
        field = quantum_commutator_over_ihbar(quantum("q"), quantum("p'"),
                                              state)
        np.testing.assert_allclose(field, 0.0, atol=1e-10)

    def test_kind_checked(self, state):
        with pytest.raises(KindMismatchError):
            apply_quantum(classical("x"), state)


def test_spec_rejects_nonfinite_coefficient():
    with pytest.raises(ValueError):
        ObservableSpec(ObservableKind.CLASSICAL, ((float("nan"), ("x",)),))
