"""How much a probe mode learns about the bath temperature over time.

Solves the exact single-mode dynamics for a few reservoir cutoffs and
compares the temperature QFI with the Born-Markov prediction. Once the
cutoff passes eta * omega_c = omega0 a bound state forms and the late-time
QFI climbs above the equilibrium value.
"""
import numpy as np

from nmtherm.dynamics import compute_v, markovian_rate, solve_u_volterra
from nmtherm.grids import TimeGrid
from nmtherm.metrology import equilibrium_qfi, qfi_direct_array, qfi_markovian
from nmtherm.spectral import SpectralDensity, find_bound_state

T = 0.1
grid = TimeGrid.from_dt(50.0, 0.01)
marks = [5.0, 10.0, 25.0, 50.0]
idx = [int(round(t / grid.dt)) for t in marks]

print(f"equilibrium QFI at omega0: {equilibrium_qfi(1.0, T):.4f}")
print("omega_c  bound?  " + "  ".join(f"F(t={t:g})" for t in marks) + "   Markov F(50)")
for wc in (3.0, 5.0, 10.0, 20.0):
    sd = SpectralDensity(0.1, 1.0, wc)
    traj = solve_u_volterra(sd, 1.0, grid, snapshots=())
    noise = compute_v(traj, sd, T)
    f = qfi_direct_array(noise.v, noise.dv_dT)
    fma = qfi_markovian(grid.times[-1], 1.0, markovian_rate(sd, 1.0), T)
    bound = "yes" if find_bound_state(sd, 1.0) else "no"
    print(f"{wc:7g}  {bound:6s}  " + "  ".join(f"{f[k]:9.4f}" for k in idx) + f"   {fma:9.4f}")

# weak coupling: the exact curve approaches the Markovian one
sd = SpectralDensity(0.005, 1.0, 10.0)
traj = solve_u_volterra(sd, 1.0, grid, snapshots=())
noise = compute_v(traj, sd, 1.0)
f = qfi_direct_array(noise.v, noise.dv_dT)
fma = qfi_markovian(grid.times, 1.0, markovian_rate(sd, 1.0), 1.0)
late = grid.times >= 10
print(f"\nweak coupling, T=1: F/F_MA over t >= 10 in "
      f"[{np.min(f[late] / fma[late]):.3f}, {np.max(f[late] / fma[late]):.3f}]")
