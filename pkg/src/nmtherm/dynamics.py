"""Reduced dynamics of the thermometer mode.

The propagator ``u(t)`` obeys

    u'(t) + i*omega0*u(t) + int_0^t mu(t - t1) u(t1) dt1 = 0,   u(0) = 1,

and the thermal noise is ``v(t) = int A_w(t) nbar(w) dw`` with the
heat-exchange spectrum ``A_w(t) = J(w) |int_0^t u(tau) exp(i w tau) dtau|**2``.

Two independent routes give ``u``: a product-integration / implicit
trapezoid stepper for the integro-differential equation, and quadrature
over the continuum weight ``Theta(E)`` plus the bound-state pole.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .grids import FrequencyGrid, TimeGrid, adaptive_edges
from .spectral import (
    SolverError,
    SpectralDensity,
    _temperature,
    asymptotic_bound_state,
    lamb_shift,
    memory_kernel,
    thermal_derivative,
    thermal_occupation,
    theta_ir_integral,
    theta_spectrum,
)

log = logging.getLogger(__name__)

STEADY_TOL = 1e-6


class RefinementError(SolverError):
    """The discretisation is too coarse for the requested accuracy."""


@dataclass(eq=False)
class PropagatorTrajectory:
    grid: TimeGrid
    u: np.ndarray
    fgrid: FrequencyGrid
    snapshot_indices: tuple = ()
    u_tilde: Optional[np.ndarray] = None  # shape (len(snapshot_indices), len(fgrid))
    method: str = "volterra"

    def u_tilde_at(self, index: int) -> np.ndarray:
        index = _check_index(self.grid, index)
        if index in self.snapshot_indices:
            return self.u_tilde[self.snapshot_indices.index(index)]
        for n, ut in cumulative_fourier(self.u, self.grid.dt, self.fgrid.nodes):
            if n == index:
                return ut
        raise AssertionError("unreachable")


@dataclass(eq=False)
class NoiseTrajectory:
    grid: TimeGrid
    v: np.ndarray
    dv_dT: np.ndarray
    temperature: float
    converged: bool = True


@dataclass(eq=False)
class MasterEqCoefficients:
    omega: np.ndarray
    gamma: np.ndarray
    gamma_beta: np.ndarray
    singular: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def _check_index(grid: TimeGrid, index: int) -> int:
    index = int(index)
    if index < 0:
        index += len(grid)
    if not 0 <= index < len(grid):
        raise IndexError(f"time index {index} outside grid of {len(grid)} nodes")
    return index


# ----------------------------------------------------------------------------
# Volterra stepper
# ----------------------------------------------------------------------------

def _hat_moments(sd: SpectralDensity, h: float, n: int, order: int = 16):
    """Exact-kernel moments against linear interpolation on each step.

    For interval m = [m h, (m+1) h] returns

        up[m]   = int mu(x) (x - m h)/h dx
        down[m] = int mu(x) ((m+1) h - x)/h dx
    """
    x, w = np.polynomial.legendre.leggauss(order)
    frac = 0.5 * (x + 1.0)
    m = np.arange(n)[:, None]
    pts = (m + frac[None, :]) * h
    mu = memory_kernel(sd, pts.ravel()).reshape(pts.shape)
    ww = 0.5 * h * w[None, :]
    up = np.sum(mu * frac[None, :] * ww, axis=1)
    down = np.sum(mu * (1.0 - frac[None, :]) * ww, axis=1)
    return up, down


def _step_volterra(sd: SpectralDensity, omega0: float, grid: TimeGrid) -> np.ndarray:
    n = grid.n_steps
    h = grid.dt
    up, down = _hat_moments(sd, h, n)
    # weight for lag k >= 1 at an interior node
    interior = np.empty(n + 1, dtype=complex)
    interior[0] = down[0]
    interior[1:n] = up[: n - 1] + down[1:n]
    interior[n] = 0.0
    u = np.zeros(n + 1, dtype=complex)
    u[0] = 1.0
    conv = 0.0 + 0.0j  # I_0 = 0
    lhs = 1.0 + 0.5 * h * (1j * omega0 + down[0])
    for k in range(n):
        # I_{k+1} = down[0] u_{k+1} + rest
        rest = up[k] * u[0]
        if k:
            rest += np.dot(interior[1 : k + 1], u[k:0:-1])
        rhs = u[k] - 0.5 * h * (1j * omega0 * u[k] + conv + rest)
        u[k + 1] = rhs / lhs
        conv = down[0] * u[k + 1] + rest
        if abs(u[k + 1]) > 1.0 + 1e-3:
            raise RefinementError(
                f"|u| = {abs(u[k + 1]):.6f} > 1 at t = {(k + 1) * h:.4g}; reduce dt")
    return u


def cumulative_fourier(u: np.ndarray, dt: float, omegas: np.ndarray
                       ) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(n, u_tilde(t_n))`` with ``u_tilde_w(t) = int_0^t u e^{i w tau}``.

    Each step integrates the linear interpolant of ``u`` against the
    exponential exactly, so large ``w * dt`` is handled without aliasing.
    """
    omegas = np.asarray(omegas, dtype=float)
    theta = omegas * dt
    small = np.abs(theta) < 1e-2
    a = np.empty_like(theta, dtype=complex)
    b = np.empty_like(theta, dtype=complex)
    big = ~small
    eit = np.exp(1j * theta[big])
    a[big] = (eit - 1.0) / (1j * omegas[big])
    b[big] = eit / (1j * omegas[big]) + (eit - 1.0) / (omegas[big] ** 2 * dt)
    z = 1j * theta[small]
    sa = np.zeros_like(z)
    sb = np.zeros_like(z)
    term = np.ones_like(z)
    for k in range(8):
        sa += term / math.factorial(k + 1)
        sb += term / math.factorial(k + 2)
        term = term * z
    a[small] = dt * sa
    b[small] = dt * sb
    step_phase = np.exp(1j * theta)
    phase = np.ones_like(a)
    acc = np.zeros_like(a)
    yield 0, acc.copy()
    for n in range(len(u) - 1):
        acc += phase * (u[n] * a + (u[n + 1] - u[n]) * b)
        yield n + 1, acc
        if (n + 1) % 512 == 0:
            phase = np.exp(1j * omegas * ((n + 1) * dt))
        else:
            phase = phase * step_phase


def _default_fgrid(sd: SpectralDensity, grid: TimeGrid, omega0: float) -> FrequencyGrid:
    return FrequencyGrid.build(sd.omega_c, grid.t_max, omega0=omega0)


def _fill_snapshots(u, grid, fgrid, snapshots):
    snaps = tuple(sorted({_check_index(grid, i) for i in snapshots}))
    if not snaps:
        return snaps, None
    out = np.empty((len(snaps), len(fgrid)), dtype=complex)
    want = {n: k for k, n in enumerate(snaps)}
    for n, ut in cumulative_fourier(u, grid.dt, fgrid.nodes):
        if n in want:
            out[want[n]] = ut
        if n >= snaps[-1]:
            break
    return snaps, out


def solve_u_volterra(sd: SpectralDensity, omega0: float, grid: TimeGrid,
                     fgrid: FrequencyGrid | None = None,
                     snapshots: Iterable[int] = (-1,),
                     extrapolate: bool = True) -> PropagatorTrajectory:
    """Propagator by product integration of the memory term.

    The convolution uses the exact kernel against the piecewise-linear
    interpolant of ``u`` and the local derivative is advanced with the
    implicit trapezoid rule; both are second order in ``dt``. With
    ``extrapolate`` the run is repeated at ``dt/2`` and the two are
    Richardson-combined, removing the leading ``dt**2`` error.
    ``u_tilde`` is stored at the requested ``snapshots`` (time indices).
    """
    fgrid = fgrid or _default_fgrid(sd, grid, omega0)
    if sd.eta == 0:
        u = np.exp(-1j * omega0 * grid.times)
    elif extrapolate:
        coarse = _step_volterra(sd, omega0, grid)
        fine = _step_volterra(sd, omega0, TimeGrid(grid.t_max, 2 * grid.n_steps))[::2]
        u = (4.0 * fine - coarse) / 3.0
    else:
        u = _step_volterra(sd, omega0, grid)
    snaps, ut = _fill_snapshots(u, grid, fgrid, snapshots)
    return PropagatorTrajectory(grid, u, fgrid, snaps, ut, method="volterra")


# ----------------------------------------------------------------------------
# Spectral reconstruction
# ----------------------------------------------------------------------------

def continuum_grid(sd: SpectralDensity, omega0: float, t_max: float | None,
                   omega_lo: float = 1e-6, rtol: float = 1e-10) -> FrequencyGrid:
    """Panel grid on ``[omega_lo, omega_max]`` refined adaptively on ``Theta(E)``.

    The interval below ``omega_lo`` is left to :func:`theta_ir_integral`.
    """
    base = FrequencyGrid.build(sd.omega_c, t_max, omega0=omega0, omega_lo=omega_lo)
    edges = adaptive_edges(lambda e: theta_spectrum(sd, omega0, e), base.edges[1:], rtol=rtol)
    return FrequencyGrid.from_edges(edges, omega_lo=omega_lo)


def solve_u_spectral(sd: SpectralDensity, omega0: float, grid: TimeGrid,
                     fgrid: FrequencyGrid | None = None,
                     snapshots: Iterable[int] = ()) -> PropagatorTrajectory:
    """``u(t) = Z exp(-i E_b t) + int Theta(E) exp(-i E t) dE``."""
    t = grid.times
    out_grid = fgrid or _default_fgrid(sd, grid, omega0)
    if sd.eta == 0:
        u = np.exp(-1j * omega0 * t)
    else:
        cg = continuum_grid(sd, omega0, grid.t_max, omega_lo=out_grid.omega_lo)
        weights = cg.weights * theta_spectrum(sd, omega0, cg.nodes)
        # below omega_lo the phase exp(-iEt) is 1 to within omega_lo * t_max
        ir = theta_ir_integral(sd, omega0, cg.edges[0])
        u = np.full(t.shape, ir, dtype=complex)
        for start in range(0, t.size, 256):
            sl = slice(start, start + 256)
            u[sl] += np.exp(-1j * np.outer(t[sl], cg.nodes)) @ weights
        bs = asymptotic_bound_state(sd, omega0)
        if bs is not None:
            u += bs.z * np.exp(-1j * bs.e_b * t)
        if abs(u[0] - 1.0) > 1e-3:
            raise RefinementError(f"spectral completeness violated: u(0) = {u[0]}")
    snaps, ut = _fill_snapshots(u, grid, out_grid, snapshots)
    return PropagatorTrajectory(grid, u, out_grid, snaps, ut, method="spectral")


# ----------------------------------------------------------------------------
# Heat-exchange spectrum and thermal noise
# ----------------------------------------------------------------------------

def heat_exchange_spectrum(traj: PropagatorTrajectory, sd: SpectralDensity,
                           t_index: int) -> np.ndarray:
    """``A_w(t) = J(w) |u_tilde_w(t)|**2`` on ``traj.fgrid``."""
    ut = traj.u_tilde_at(t_index)
    return sd(traj.fgrid.nodes) * np.abs(ut) ** 2


def spectral_moments(traj: PropagatorTrajectory, sd: SpectralDensity,
                     weight_rows: np.ndarray) -> np.ndarray:
    """``int A_w(t_n) f_k(w) dw`` for every node n and every row ``f_k``.

    ``weight_rows`` has shape ``(K, len(fgrid))`` and already includes the
    quadrature weights. Returns shape ``(K, len(grid))``.
    """
    fg = traj.fgrid
    rows = np.atleast_2d(weight_rows) * sd(fg.nodes)[None, :]
    out = np.empty((rows.shape[0], len(traj.grid)))
    for n, ut in cumulative_fourier(traj.u, traj.grid.dt, fg.nodes):
        out[:, n] = rows @ (ut.real ** 2 + ut.imag ** 2)
    return out


def sum_rule_residual(traj: PropagatorTrajectory, sd: SpectralDensity) -> np.ndarray:
    """``int A_w(t) dw - (1 - |u(t)|**2)`` at every node."""
    total = spectral_moments(traj, sd, traj.fgrid.weights[None, :])[0]
    return total - (1.0 - np.abs(traj.u) ** 2)


def _is_converged(grid: TimeGrid, series: Sequence[np.ndarray]) -> bool:
    tail = max(2, len(grid) // 10)
    for y in series:
        d = np.gradient(y, grid.dt)[-tail:]
        if np.max(np.abs(d)) >= STEADY_TOL:
            return False
    return True


def compute_v(traj: PropagatorTrajectory, sd: SpectralDensity, temp):
    """Thermal noise ``v(t)`` and its temperature derivative.

    ``temp`` may be a single temperature or a sequence; a list of
    trajectories is returned in the latter case. ``dv_dT`` differentiates
    the Bose factor analytically under the frequency integral.
    """
    many = isinstance(temp, (list, tuple, np.ndarray))
    temps = [_temperature(x) for x in (temp if many else [temp])]
    nodes = traj.fgrid.nodes
    w = traj.fgrid.weights
    rows = []
    for t in temps:
        rows.append(w * thermal_occupation(nodes, t))
        rows.append(w * thermal_derivative(nodes, t))
    mom = spectral_moments(traj, sd, np.array(rows))
    absu2 = np.abs(traj.u) ** 2
    out = []
    for k, t in enumerate(temps):
        v, dv = mom[2 * k], mom[2 * k + 1]
        ok = _is_converged(traj.grid, [absu2, v])
        if not ok:
            log.info("v(t) not stationary at t_max=%g for T=%g", traj.grid.t_max, t)
        out.append(NoiseTrajectory(traj.grid, v, dv, t, converged=ok))
    return out if many else out[0]


def noise_kernel(sd: SpectralDensity, temp, x: np.ndarray, fgrid: FrequencyGrid) -> np.ndarray:
    """``nu(x) = int J(w) nbar(w) exp(-i w x) dw`` by frequency quadrature."""
    f = fgrid.weights * sd(fgrid.nodes) * thermal_occupation(fgrid.nodes, temp)
    return np.exp(-1j * np.outer(np.asarray(x, float), fgrid.nodes)) @ f


def noise_double_integral(u: np.ndarray, dt: float, sd: SpectralDensity, temp,
                          fgrid: FrequencyGrid) -> np.ndarray:
    """Slow reference: ``v(t) = int int u*(t1) nu(t1 - t2) u(t2)`` (trapezoid).

    Cost is cubic in the number of nodes; meant for coarse grids only.
    """
    n = len(u)
    lags = dt * np.arange(n)
    nu = noise_kernel(sd, temp, lags, fgrid)
    i, j = np.indices((n, n))
    k = i - j
    mat = np.where(k >= 0, nu[np.abs(k)], np.conj(nu[np.abs(k)]))
    v = np.zeros(n)
    for m in range(1, n):
        c = np.full(m + 1, dt)
        c[0] = c[-1] = 0.5 * dt
        x = c * u[: m + 1]
        v[m] = float(np.real(np.conj(x) @ mat[: m + 1, : m + 1] @ x))
    return v


# ----------------------------------------------------------------------------
# Born-Markov closed forms and master-equation coefficients
# ----------------------------------------------------------------------------

def markovian_rate(sd: SpectralDensity, omega0: float) -> float:
    """``kappa = pi J(omega0)``."""
    return math.pi * float(sd(omega0))


def markovian_solution(sd: SpectralDensity, omega0: float, temp, grid: TimeGrid,
                       fgrid: FrequencyGrid | None = None):
    t = grid.times
    kappa = markovian_rate(sd, omega0)
    shift = lamb_shift(sd, omega0)
    u = np.exp(-(kappa + 1j * (omega0 + shift)) * t)
    tt = _temperature(temp)
    growth = -np.expm1(-2.0 * kappa * t)
    v = thermal_occupation(omega0, tt) * growth
    dv = thermal_derivative(omega0, tt) * growth
    fgrid = fgrid or _default_fgrid(sd, grid, omega0)
    return (PropagatorTrajectory(grid, u, fgrid, method="markovian"),
            NoiseTrajectory(grid, v, dv, tt, converged=_is_converged(grid, [np.abs(u) ** 2, v])))


def master_eq_coefficients(traj: PropagatorTrajectory, noise: NoiseTrajectory
                           ) -> MasterEqCoefficients:
    """Renormalised frequency, dissipation and noise coefficients.

    Nodes where ``|u| < 1e-10`` are reported in ``singular`` and set to NaN.
    """
    dt = traj.grid.dt
    u = traj.u
    du = np.gradient(u, dt, edge_order=2)
    dv = np.gradient(noise.v, dt, edge_order=2)
    singular = np.flatnonzero(np.abs(u) < 1e-10)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = du / u
    ratio[singular] = np.nan
    omega = -ratio.imag
    gamma = -ratio.real
    gamma_beta = dv + 2.0 * noise.v * gamma
    if singular.size:
        log.warning("master-equation coefficients singular at %d nodes", singular.size)
    return MasterEqCoefficients(omega, gamma, gamma_beta, singular)
