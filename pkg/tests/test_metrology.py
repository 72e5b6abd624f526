import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from nmtherm.metrology import (
    K, TruncationError, build_state, displacement_probabilities, equilibrium_qfi, f_scaled,
    fock_cutoff, gaussian_qfi, number_measurement_cfi, photon_distribution, qfi_direct,
    qfi_direct_array, qfi_gaussian, qfi_markovian,
)
from nmtherm.spectral import DomainError, thermal_occupation


def displaced_thermal_pn(alpha, v, n):
    """Closed-form photon statistics of a displaced thermal state."""
    x = abs(alpha) ** 2
    if x == 0:
        return v ** n / (1 + v) ** (n + 1)
    lag = special.eval_laguerre(n, -x / (v * (1 + v)))
    return v ** n / (1 + v) ** (n + 1) * np.exp(-x / (1 + v)) * lag


class TestState:
    def test_vacuum(self):
        st_ = build_state(0, 1, 0.0)
        assert np.all(st_.d == 0) and np.array_equal(st_.sigma, np.eye(2)) and st_.m == 1

    def test_plug_in(self):
        st_ = build_state(2, 0.5, 1.0)
        assert np.allclose(st_.d, [1, 1]) and np.array_equal(st_.sigma, 3 * np.eye(2))
        assert st_.m == 0.5 and st_.alpha == 1

    def test_complex_displacement_pair(self):
        st_ = build_state(1 + 1j, 1j, 0.3)
        assert st_.d[0] == pytest.approx(-1 + 1j) and st_.d[1] == np.conj(st_.d[0])

    @pytest.mark.parametrize("v", [0.0, 0.1, 5.0])
    def test_physical(self, v):
        st_ = build_state(1.0, 0.3, v)
        assert np.all(np.linalg.eigvalsh(st_.sigma + K) >= -1e-15)

    def test_negative_v(self):
        with pytest.raises(DomainError):
            build_state(0, 1, -0.1)


class TestDirect:
    def test_zero_noise(self):
        assert qfi_direct(0.0, 3.0).value == 0.0
        assert qfi_direct(1e-13, 3.0).value == 0.0

    def test_equilibrium_value(self):
        w, t = 1.0, 0.7
        n = thermal_occupation(w, t)
        dv = (w / t) * n * (1 + n) / t
        assert qfi_direct(n, dv).value == pytest.approx(equilibrium_qfi(w, t), rel=1e-13)

    def test_f_of_one(self):
        assert equilibrium_qfi(1.0, 1.0) == pytest.approx(0.9206735942077923, rel=1e-13)

    def test_array_form(self):
        v = np.array([0.0, 0.5, 2.0])
        dv = np.array([1.0, 1.0, 3.0])
        assert np.allclose(qfi_direct_array(v, dv), [0.0, 1 / 0.75, 9 / 6])

    def test_flag_propagates(self):
        assert qfi_direct(1.0, 1.0, converged=False).converged is False


class TestGaussian:
    def test_hand_value(self):
        assert qfi_gaussian(build_state(3 - 1j, 0.4, 1.0), 1.0).value == pytest.approx(0.5, rel=1e-14)

    def test_no_dependence(self):
        s = build_state(1.0, 1.0, 1.0)
        assert gaussian_qfi(s.sigma, np.zeros((2, 2)), np.zeros(2)) == 0.0

    def test_vacuum_falls_back(self):
        assert qfi_gaussian(build_state(0, 1, 0.0), 1.0).value == 0.0

    def test_displacement_term(self):
        # pure displacement sensitivity of a thermal state: 2 |dd|^2 * 2 / (1 + 2v)
        s = build_state(0, 1, 0.5)
        dd = np.array([0.1 + 0.2j, 0.1 - 0.2j])
        got = gaussian_qfi(s.sigma, np.zeros((2, 2)), dd)
        assert got == pytest.approx(4 * 0.05 / 2.0, rel=1e-13)

    @settings(max_examples=60, deadline=None)
    @given(v=st.floats(1e-3, 100.0), dv=st.floats(0.1, 10.0),
           a=st.complex_numbers(max_magnitude=5.0), u=st.complex_numbers(max_magnitude=1.0))
    def test_equals_direct(self, v, dv, a, u):
        ref = qfi_direct(v, dv).value
        assert qfi_gaussian(build_state(a, u, v), dv).value == pytest.approx(ref, rel=1e-8)


class TestMarkovian:
    def test_start_and_saturation(self):
        assert qfi_markovian(0.0, 1.0, 0.1, 0.5) == 0.0
        assert qfi_markovian(1000.0, 1.0, 0.1, 0.5) == pytest.approx(equilibrium_qfi(1.0, 0.5),
                                                                     rel=1e-12)

    def test_monotone(self):
        f = qfi_markovian(np.linspace(0, 100, 5001), 1.0, 0.2, 2.0)
        assert np.all(np.diff(f) >= 0)

    def test_landau_limit(self):
        assert qfi_markovian(1e6, 1.0, 0.1, 1e4) * 1e8 == pytest.approx(1.0, abs=1e-8)

    def test_negative_time(self):
        with pytest.raises(DomainError):
            qfi_markovian(-1.0, 1.0, 0.1, 1.0)


class TestScaledFunction:
    def test_limits(self):
        assert f_scaled(0.0) == 1.0
        assert f_scaled(1e-8) == pytest.approx(1.0, abs=1e-15)
        assert f_scaled(800.0) == 0.0

    def test_monotone(self):
        assert np.all(np.diff(f_scaled(np.linspace(0.01, 20, 4000))) < 0)


class TestPhotonCounting:
    @pytest.mark.parametrize("alpha,v", [(0, 0.5), (1.0, 0.5), (2 - 1j, 1.3), (0.3j, 4.0)])
    def test_distribution_closed_form(self, alpha, v):
        p = photon_distribution(alpha, v)
        n = np.arange(p.size)
        assert np.allclose(p, displaced_thermal_pn(alpha, v, n), atol=1e-14)
        assert p.sum() == pytest.approx(1.0, abs=1e-10)

    def test_thermal_geometric(self):
        p = photon_distribution(0, 0.25)
        assert np.allclose(p[:5], 0.8 * 0.2 ** np.arange(5))

    def test_displacement_doubly_stochastic(self):
        pm = displacement_probabilities(0.7 + 0.4j, 120)
        assert np.allclose(pm[:40].sum(axis=1), 1.0, atol=1e-12)
        assert np.allclose(pm, pm.T)

    def test_coherent_state_poisson(self):
        p = photon_distribution(1.5, 0.0)
        n = np.arange(p.size)
        assert np.allclose(p, np.exp(-2.25 + n * np.log(2.25) - special.gammaln(n + 1)))

    def test_cutoff_rule(self):
        assert fock_cutoff(0.1, 0.0) == 50
        assert fock_cutoff(3.0, 1.0) == 80

    def test_truncation_detected(self):
        with pytest.raises(TruncationError):
            photon_distribution(0, 5.0, n_max=20)

    @pytest.mark.parametrize("v", [0.05, 0.5, 3.0])
    def test_thermal_cfi_exact(self, v):
        st_ = build_state(0, 1, v)
        assert number_measurement_cfi(st_, 1.7).value == pytest.approx(
            qfi_direct(v, 1.7).value, rel=1e-6)

    def test_no_temperature_dependence(self):
        assert number_measurement_cfi(build_state(1, 1, 0.5), 0.0).value == 0.0

    def test_needs_positive_v(self):
        with pytest.raises(DomainError):
            number_measurement_cfi(build_state(1, 1, 0.0), 1.0)

    def test_displaced_cfi_matches_independent_fisher(self):
        # Fisher information of the closed-form distribution by Richardson-extrapolated differences
        a, v = 1.0, 0.5
        n = np.arange(200)
        def dp(h):
            return (displaced_thermal_pn(a, v + h, n) - displaced_thermal_pn(a, v - h, n)) / (2 * h)
        d = (4 * dp(1e-4) - dp(2e-4)) / 3
        ref = float(np.sum(d ** 2 / displaced_thermal_pn(a, v, n)))
        got = number_measurement_cfi(build_state(a, 1, v), 1.0).value
        assert got == pytest.approx(ref, rel=1e-6)
        # counting photons discards information once the state is displaced
        assert got < 0.5 * qfi_direct(v, 1.0).value

    def test_cfi_never_exceeds_qfi(self):
        for a in (0.0, 0.5, 1.0, 2.0, 2j):
            for v in (0.1, 1.0):
                st_ = build_state(a, 1, v)
                assert number_measurement_cfi(st_, 1.0).value <= qfi_direct(v, 1.0).value * (1 + 1e-6)
