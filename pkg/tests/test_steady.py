import math

import numpy as np
import pytest

from nmtherm.grids import FrequencyGrid
from nmtherm.metrology import equilibrium_qfi
from nmtherm.spectral import (
    DomainError, SpectralDensity, find_bound_state, lamb_shift, theta_spectrum,
)
from nmtherm.steady import (
    asymptotic_spectrum, asymptotic_sum_rule, critical_window, is_critical, landau_factor,
    locate_peak_and_fit, peak_frequency, qfi_upper_bound, steady_noise, steady_qfi,
)


@pytest.fixture(scope="module")
def spec20():
    return asymptotic_spectrum(SpectralDensity(0.1, 1.0, 20.0))


@pytest.fixture(scope="module")
def spec_cp():
    return asymptotic_spectrum(SpectralDensity(0.1, 1.0, 10.0))


class TestSpectrum:
    def test_pointwise_decomposition(self, spec20):
        sd = spec20.sd
        bs = find_bound_state(sd, 1.0)
        w = spec20.nodes
        expect = theta_spectrum(sd, 1.0, w) + bs.z ** 2 * sd(w) / (w - bs.e_b) ** 2
        assert np.allclose(spec20.a_inf, expect, rtol=1e-12, atol=0)
        assert spec20.z == bs.z and spec20.e_b == bs.e_b

    @pytest.mark.parametrize("eta,wc,s", [(0.05, 5, 1), (0.1, 20, 1), (0.2, 40, 0.5),
                                          (0.1, 10, 2), (0.2, 5, 2), (0.1, 10, 1)])
    def test_sum_rule(self, eta, wc, s):
        assert abs(asymptotic_sum_rule(asymptotic_spectrum(SpectralDensity(eta, s, wc)))) <= 1e-3

    def test_no_bound_state_branch(self):
        spec = asymptotic_spectrum(SpectralDensity(0.1, 1.0, 5.0))
        assert spec.z == 0 and spec.bound is None
        assert np.array_equal(spec.a_inf, spec.theta)

    def test_critical_flag(self, spec_cp, spec20):
        assert spec_cp.diverges_ir and is_critical(spec_cp.sd, 1.0)
        assert not spec20.diverges_ir
        assert not is_critical(SpectralDensity(0.1, 1.0, 10.0 + 1e-6), 1.0)

    def test_critical_infrared_peak(self, spec_cp):
        sd = spec_cp.sd
        assert np.array_equal(spec_cp.a_inf, spec_cp.theta)
        w = np.array([1e-30, 1e-60, 1e-120])
        a = theta_spectrum(sd, 1.0, w)
        assert np.all(np.diff(a) > 0)
        # the logarithmic Lamb-shift term sets the divergence: 0.1 / (w gap**2)
        gap = 1 - 0.1 * np.euler_gamma - 0.1 * np.log(w / 10)
        assert np.allclose(a, 0.1 / (w * (gap ** 2 + (math.pi * 0.1) ** 2)), rtol=1e-10)

    def test_weak_coupling_lorentzian(self):
        sd = SpectralDensity(0.01, 1.0, 5.0)
        spec = asymptotic_spectrum(sd)
        peak = peak_frequency(spec)
        assert peak == pytest.approx(1.0 + lamb_shift(sd, 1.0), abs=1e-3)
        half = spec.nodes[spec.a_inf > 0.5 * spec.a_inf.max()]
        assert half.max() - half.min() < 0.1

    def test_explicit_grid(self):
        sd = SpectralDensity(0.1, 1.0, 20.0)
        spec = asymptotic_spectrum(sd, fgrid=FrequencyGrid.build(20.0, None))
        assert abs(asymptotic_sum_rule(spec)) <= 1e-3


class TestNoiseAndBound:
    def test_decoupled(self):
        spec = asymptotic_spectrum(SpectralDensity(0.0, 1.0, 10.0))
        assert steady_noise(spec, 1.0).v == 0.0
        assert qfi_upper_bound(spec, 1.0).value == 0.0

    def test_critical_limits(self, spec_cp):
        nz = steady_noise(spec_cp, 0.5)
        assert math.isinf(nz.v) and not nz.finite
        b = qfi_upper_bound(spec_cp, 0.5)
        assert b.value == 4.0 and b.method == "critical-limit" and not b.converged

    def test_critical_qfi_falls_back_to_horizon(self, spec_cp):
        f = steady_qfi(spec_cp, 0.5, t_max=30.0, dt=0.05)
        assert not f.converged and 0 < f.value < 4.0

    def test_noise_derivative(self, spec20):
        t, h = 0.4, 1e-5
        d = steady_noise(spec20, t).dv_dT
        fd = (steady_noise(spec20, t + h).v - steady_noise(spec20, t - h).v) / (2 * h)
        assert d == pytest.approx(fd, rel=1e-6)

    @pytest.mark.parametrize("temp", [0.1, 0.5, 2.0, 10.0])
    def test_bound_dominates_steady_qfi(self, spec20, temp):
        assert steady_qfi(spec20, temp).value <= qfi_upper_bound(spec20, temp).value

    def test_high_temperature_limit(self, spec20):
        t = 1e3
        b = qfi_upper_bound(spec20, t).value * t ** 2
        assert b == pytest.approx(landau_factor(spec20, t), rel=1e-3)
        z2 = spec20.z ** 2
        assert 1 - z2 < landau_factor(spec20, t) < 1

    def test_landau_factor_critical(self, spec_cp):
        assert landau_factor(spec_cp, 1.0) == 1.0

    def test_weak_coupling_reaches_equilibrium(self):
        spec = asymptotic_spectrum(SpectralDensity(0.005, 1.0, 10.0))
        w = 1.0 + lamb_shift(spec.sd, 1.0)
        assert steady_qfi(spec, 1.0).value == pytest.approx(equilibrium_qfi(w, 1.0), rel=0.02)


@pytest.fixture(scope="module")
def fit():
    return locate_peak_and_fit()


class TestPeakFit:
    def test_samples_and_quality(self, fit):
        assert len(fit.samples) == 12 and not fit.rejected
        assert fit.p > 0 and fit.good and fit.r2 > 0.999

    def test_peak_moves_to_zero(self, fit):
        d, w = np.array(fit.samples).T
        assert np.all(np.diff(w) > 0) and np.all(np.diff(d) > 0)

    def test_golden_section_improves_grid(self):
        sd = SpectralDensity(0.1, 1.0, 11.0)
        spec = asymptotic_spectrum(sd)
        w = peak_frequency(spec)
        a = lambda x: theta_spectrum(sd, 1.0, np.array([x]))[0] + spec.bound_term(x)
        assert a(w) >= spec.a_inf.max()
        assert a(w) >= max(a(w * (1 + 1e-5)), a(w * (1 - 1e-5)))

    def test_critical_sample_rejected(self):
        fit = locate_peak_and_fit(detunings=[0.0, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3])
        assert len(fit.samples) == 6 and fit.rejected[0][0] == 0.0

    def test_too_few_samples(self):
        with pytest.raises(DomainError):
            locate_peak_and_fit(detunings=[0.1, 0.2])


class TestWindow:
    def test_examples(self):
        inside, margin = critical_window(1.0, SpectralDensity(0.1, 1.0, 10.0), 0.3)
        assert inside and margin == pytest.approx(1.52 * 0.3)
        assert not critical_window(1.0, SpectralDensity(0.1, 1.0, 12.0), 0.1)[0]
        inside, margin = critical_window(1.0, SpectralDensity(0.1, 1.0, 12.0), 0.2)
        assert inside and margin == pytest.approx(0.104)

    def test_warns_off_ohmic(self):
        with pytest.warns(RuntimeWarning):
            critical_window(1.0, SpectralDensity(0.1, 2.0, 10.0), 0.2)
