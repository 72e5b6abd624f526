"""Long-time limits: the asymptotic heat-exchange spectrum, the steady QFI
and its upper bound, and the near-critical peak law."""
from __future__ import annotations

import functools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .dynamics import compute_v, solve_u_volterra
from .grids import FrequencyGrid, TimeGrid, adaptive_edges
from .metrology import QfiEstimate, equilibrium_qfi, qfi_direct
from .spectral import (IR_FLOOR, BoundState, DomainError, SpectralDensity, _quad,
                       _temperature, asymptotic_bound_state, detuning, gamma_fn,
                       theta_ir_integral, theta_spectrum, thermal_derivative,
                       thermal_occupation)

log = logging.getLogger(__name__)

CRITICAL_TOL = 1e-9
WINDOW_CONSTANT = 1.52
# finite horizon used when the steady noise diverges (exact critical point)
FINITE_HORIZON = 400.0
HORIZON_DT = 0.025


def _bound_term(sd: SpectralDensity, bound: Optional[BoundState], omega):
    """``Z**2 J(omega) / (omega - E_b)**2``."""
    omega = np.asarray(omega, dtype=float)
    if bound is None:
        return np.zeros_like(omega)
    if bound.e_b == 0.0:
        # band-edge state: J/omega**2 written out to avoid 0/0
        return (bound.z ** 2 * sd.eta * sd.omega_c ** (1.0 - sd.s)
                * omega ** (sd.s - 2.0) * np.exp(-omega / sd.omega_c))
    return bound.z ** 2 * sd(omega) / (omega - bound.e_b) ** 2


@dataclass(frozen=True, eq=False)
class AsymptoticSpectrum:
    """``A(omega, t -> inf)`` on an adaptive panel grid.

    The grid starts at ``fgrid.omega_lo``; the piece below it is integrated
    separately in log frequency by :meth:`integrate`.
    """

    sd: SpectralDensity
    omega0: float
    fgrid: FrequencyGrid
    theta: np.ndarray
    a_inf: np.ndarray
    bound: Optional[BoundState]
    diverges_ir: bool

    @property
    def nodes(self) -> np.ndarray:
        return self.fgrid.nodes

    @property
    def z(self) -> float:
        return self.bound.z if self.bound is not None else 0.0

    @property
    def e_b(self) -> Optional[float]:
        return self.bound.e_b if self.bound is not None else None

    def bound_term(self, omega):
        return _bound_term(self.sd, self.bound, omega)

    def integrate(self, weight=None) -> float:
        """``int_0^omega_max A(omega) weight(omega) d omega``; ``weight`` is
        vectorised and defaults to 1."""
        if self.sd.eta == 0:
            return 0.0
        w = 1.0 if weight is None else weight(self.nodes)
        total = float(np.dot(self.fgrid.weights, self.a_inf * w))
        lo = self.fgrid.omega_lo
        total += theta_ir_integral(self.sd, self.omega0, lo, weight)
        if self.bound is not None:
            def f(x):
                om = math.exp(x)
                val = float(self.bound_term(om)) * om
                return val * float(weight(om)) if weight is not None else val
            total += _quad(f, math.log(IR_FLOOR), math.log(lo))
        return total


def is_critical(sd: SpectralDensity, omega0: float) -> bool:
    return sd.eta > 0 and abs(detuning(sd, omega0)) < CRITICAL_TOL * omega0


def asymptotic_spectrum(sd: SpectralDensity, omega0: float = 1.0,
                        fgrid: FrequencyGrid | None = None,
                        rtol: float = 1e-8) -> AsymptoticSpectrum:
    """Build ``A(inf) = Theta + Z**2 J/(omega - E_b)**2``.

    Without a bound state ``Z = 0`` and ``A(inf) = Theta``. If ``fgrid`` is
    not given, panels are refined adaptively on ``A(inf)``.
    """
    if omega0 <= 0:
        raise DomainError("omega0 must be positive")
    bound = asymptotic_bound_state(sd, omega0) if sd.eta > 0 else None

    def a_fn(e):
        return theta_spectrum(sd, omega0, e) + _bound_term(sd, bound, e)

    if fgrid is None:
        base = FrequencyGrid.build(sd.omega_c, None, omega0=omega0)
        if sd.eta > 0:
            edges = adaptive_edges(a_fn, base.edges[1:], rtol=rtol)
        else:
            edges = base.edges[1:]
        fgrid = FrequencyGrid.from_edges(edges, omega_lo=base.omega_lo)
    nodes = fgrid.nodes
    theta = theta_spectrum(sd, omega0, nodes) if sd.eta > 0 else np.zeros_like(nodes)
    a_inf = a_fn(nodes) if sd.eta > 0 else np.zeros_like(nodes)
    return AsymptoticSpectrum(sd=sd, omega0=omega0, fgrid=fgrid, theta=theta,
                              a_inf=a_inf, bound=bound,
                              diverges_ir=is_critical(sd, omega0))


def asymptotic_sum_rule(spec: AsymptoticSpectrum) -> float:
    """``int A(inf) - (1 - Z**2)``; zero in exact arithmetic."""
    if spec.sd.eta == 0:
        return 0.0
    return spec.integrate() - (1.0 - spec.z ** 2)


@dataclass(frozen=True)
class SteadyNoise:
    v: float
    dv_dT: float
    temperature: float
    finite: bool

    @property
    def m(self) -> float:
        return 1.0 / (1.0 + self.v)


def steady_noise(spec: AsymptoticSpectrum, temp) -> SteadyNoise:
    """``v(inf) = int A(inf) nbar`` and its temperature derivative.

    At the critical point the integrand is not integrable at ``omega -> 0``
    and ``v(inf) = inf`` is returned with ``finite=False``.
    """
    t = _temperature(temp)
    if spec.diverges_ir:
        return SteadyNoise(math.inf, math.inf, t, False)
    if spec.sd.eta == 0:
        return SteadyNoise(0.0, 0.0, t, True)
    v = spec.integrate(lambda w: thermal_occupation(w, t))
    dv = spec.integrate(lambda w: thermal_derivative(w, t))
    return SteadyNoise(v, dv, t, True)


@functools.lru_cache(maxsize=8)
def _horizon_trajectory(sd: SpectralDensity, omega0: float, t_max: float, dt: float):
    return solve_u_volterra(sd, omega0, TimeGrid.from_dt(t_max, dt), snapshots=())


def finite_horizon_noise(sd: SpectralDensity, omega0: float, temps: Sequence[float],
                         t_max: float = FINITE_HORIZON, dt: float = HORIZON_DT):
    """``(v, dv/dT)`` at ``t_max`` from the dynamical solver, one pair per temperature."""
    traj = _horizon_trajectory(sd, float(omega0), float(t_max), float(dt))
    noises = compute_v(traj, sd, list(temps))
    return [(float(n.v[-1]), float(n.dv_dT[-1])) for n in noises]


def steady_qfi(spec: AsymptoticSpectrum, temp, *, t_max: float = FINITE_HORIZON,
               dt: float = HORIZON_DT) -> QfiEstimate:
    """QFI of the stationary state.

    Falls back to the finite-horizon value at ``t_max`` (``converged=False``)
    when ``v(inf)`` diverges.
    """
    noise = steady_noise(spec, temp)
    if noise.finite:
        return qfi_direct(noise.v, noise.dv_dT)
    log.warning("critical point: steady noise diverges, using horizon t=%g", t_max)
    (v, dv), = finite_horizon_noise(spec.sd, spec.omega0, [noise.temperature], t_max, dt)
    return qfi_direct(v, dv, converged=False)


def landau_factor(spec: AsymptoticSpectrum, temp) -> float:
    """``1 - Z**2 M(inf)``, the high-temperature limit of ``F T**2``."""
    noise = steady_noise(spec, temp)
    return 1.0 - spec.z ** 2 * (noise.m if noise.finite else 0.0)


def qfi_upper_bound(spec: AsymptoticSpectrum, temp) -> QfiEstimate:
    """``M(inf) int Fbar(omega) A(inf) [1 + nbar] d omega``.

    At the critical point the integral diverges and the analytic limit
    ``T**-2`` is returned instead, tagged ``critical-limit``.
    """
    t = _temperature(temp)
    if spec.diverges_ir:
        return QfiEstimate(t ** -2, "critical-limit", converged=False)
    if spec.sd.eta == 0:
        return QfiEstimate(0.0, "bound")
    noise = steady_noise(spec, t)
    integral = spec.integrate(
        lambda w: equilibrium_qfi(w, t) * (1.0 + thermal_occupation(w, t)))
    return QfiEstimate(noise.m * integral, "bound")


# ----------------------------------------------------------------------------
# peak law near criticality
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalFit:
    """``omega_max / omega0 = c * (detuning / omega0) ** p``."""

    c: float
    p: float
    samples: list = field(default_factory=list)
    r2: float = float("nan")
    residual: float = float("nan")
    rejected: list = field(default_factory=list)

    @property
    def good(self) -> bool:
        return self.residual < 1e-2


class PeakAtBoundary(ValueError):
    pass


def peak_frequency(spec: AsymptoticSpectrum) -> float:
    """Location of the maximum of ``A(inf)``: gridded argmax refined by a
    bounded golden-section search."""
    k = int(np.argmax(spec.a_inf))
    nodes = spec.nodes
    if k == 0 or k == nodes.size - 1:
        raise PeakAtBoundary(f"maximum at grid boundary omega={nodes[k]:.3g}")

    def neg(w):
        return -float(spec.a_inf[k] if w <= 0 else
                      theta_spectrum(spec.sd, spec.omega0, np.array([w]))[0]
                      + spec.bound_term(w))

    res = optimize.minimize_scalar(neg, bracket=(nodes[k - 1], nodes[k], nodes[k + 1]),
                                   method="golden", tol=1e-10)
    return float(res.x)


def locate_peak_and_fit(eta: float = 0.1, s: float = 1.0, omega0: float = 1.0,
                        detunings: Sequence[float] | None = None) -> CriticalFit:
    """Fit the peak position of ``A(inf)`` against the detuning from criticality.

    Samples sit on the bound-state side: ``omega_c`` is chosen so that
    ``eta omega_c Gamma(s) - omega0`` equals each detuning.
    """
    if detunings is None:
        detunings = np.geomspace(0.01, 0.3, 12) * omega0
    detunings = np.asarray(detunings, dtype=float)
    if detunings.size < 6:
        raise DomainError("need at least 6 detuning samples")
    samples, rejected = [], []
    for d in detunings:
        if d <= 0:
            rejected.append((float(d), "zero detuning: peak sits at omega = 0"))
            continue
        omega_c = (omega0 + d) / (eta * gamma_fn(s))
        spec = asymptotic_spectrum(SpectralDensity(eta, s, omega_c), omega0)
        try:
            samples.append((float(d), peak_frequency(spec)))
        except PeakAtBoundary as exc:
            log.warning("detuning %g rejected: %s", d, exc)
            rejected.append((float(d), str(exc)))
    if len(samples) < 2:
        raise DomainError("too few usable samples for a power-law fit")
    x = np.log(np.array([d for d, _ in samples]) / omega0)
    y = np.log(np.array([w for _, w in samples]) / omega0)
    p, logc = np.polyfit(x, y, 1)
    resid = y - (p * x + logc)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    rms = float(np.sqrt(np.mean(resid ** 2)))
    if rms >= 1e-2:
        log.warning("power-law fit residual %.3g exceeds 1e-2", rms)
    return CriticalFit(c=float(np.exp(logc)), p=float(p), samples=samples,
                       r2=r2, residual=rms, rejected=rejected)


def critical_window(omega0: float, sd: SpectralDensity, temp) -> tuple[bool, float]:
    """Whether the detuning from criticality is within ``1.52 T``.

    Returns ``(inside, margin)`` with ``margin = 1.52 T - |detuning|``.
    """
    t = _temperature(temp)
    if sd.s != 1:
        warnings.warn("the window constant 1.52 was fitted for s = 1", RuntimeWarning,
                      stacklevel=2)
    margin = WINDOW_CONSTANT * t - abs(detuning(sd, omega0))
    return margin >= 0, margin


__all__ = [
    "AsymptoticSpectrum", "CriticalFit", "PeakAtBoundary", "SteadyNoise",
    "asymptotic_spectrum", "asymptotic_sum_rule", "critical_window",
    "finite_horizon_noise", "is_critical", "landau_factor", "locate_peak_and_fit",
    "peak_frequency", "qfi_upper_bound", "steady_noise", "steady_qfi",
]
