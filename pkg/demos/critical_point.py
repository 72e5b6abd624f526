"""The steady-state QFI peaks where the bound state is born.

Sweeps the cutoff through the critical value omega_c = omega0 / eta and
prints the stationary QFI, the upper bound and the residue Z. At the
critical point itself the noise never settles; the QFI is taken at a
finite horizon and scales like T**-2.
"""
import numpy as np

from nmtherm.metrology import qfi_direct
from nmtherm.spectral import SpectralDensity
from nmtherm.steady import (
    asymptotic_spectrum, finite_horizon_noise, qfi_upper_bound, steady_qfi,
)

T = 0.1
print("omega_c   F(inf) T^2   bound T^2   Z")
for wc in np.arange(7.0, 14.0):
    spec = asymptotic_spectrum(SpectralDensity(0.1, 1.0, wc))
    f = steady_qfi(spec, T)
    b = qfi_upper_bound(spec, T)
    note = "  (finite horizon)" if not f.converged else ""
    print(f"{wc:7g}   {f.value * T**2:10.4f}   {b.value * T**2:9.4f}   {spec.z:.4f}{note}")

temps = [0.1, 0.2, 0.5, 1.0]
pairs = finite_horizon_noise(SpectralDensity(0.1, 1.0, 10.0), 1.0, temps)
f = [qfi_direct(v, dv).value for v, dv in pairs]
slope = np.polyfit(np.log(temps), np.log(f), 1)[0]
print(f"\ncritical point: d log F / d log T = {slope:.3f}")
