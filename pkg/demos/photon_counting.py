"""Is counting photons enough to reach the QFI?

For an undisplaced thermal state the photon-number distribution is
geometric and carries all of the temperature information. Displacing the
state mixes the thermal and coherent statistics and the number
measurement falls short of the bound.
"""
from nmtherm.metrology import build_state, number_measurement_cfi, qfi_direct

print("alpha0     v      CFI / QFI")
for a0 in (0, 0.5, 1, 2, 2j):
    for v in (0.1, 0.5, 2.0):
        state = build_state(a0, 1.0, v)
        ratio = number_measurement_cfi(state, 1.0).value / qfi_direct(v, 1.0).value
        print(f"{str(a0):6s} {v:6.2f}   {ratio:.6f}")
