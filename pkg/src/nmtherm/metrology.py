"""Temperature estimation from the thermometer's Gaussian state.

The reduced state is a displaced thermal state: displacement ``alpha0*u(t)``
and mean thermal occupation ``v(t)``. Only ``v`` depends on the temperature,
so every QFI here reduces to ``(dv/dT)**2 / [v (1 + v)]``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .spectral import DomainError, SolverError, _temperature, thermal_occupation

log = logging.getLogger(__name__)

EPS_V = 1e-12
K = np.diag([1.0, -1.0])


class TruncationError(SolverError):
    """Fock-space truncation leaves too much probability outside."""


@dataclass(frozen=True)
class GaussianThermometerState:
    """Displacement ``d = (alpha, alpha*)`` and covariance ``sigma`` in the
    ``(a, a^dagger)`` ordering, plus ``m = 1/(1 + v)``."""

    d: np.ndarray
    sigma: np.ndarray
    m: float
    alpha0: complex
    v: float

    @property
    def alpha(self) -> complex:
        return complex(self.d[0])


@dataclass(frozen=True)
class QfiEstimate:
    value: float
    method: str
    converged: bool = True

    def __float__(self) -> float:
        return self.value


def build_state(alpha0: complex, u: complex, v: float) -> GaussianThermometerState:
    if v < 0:
        raise DomainError(f"v must be non-negative, got {v}")
    alpha = complex(alpha0) * complex(u)
    d = np.array([alpha, alpha.conjugate()])
    sigma = (1.0 + 2.0 * v) * np.eye(2)
    return GaussianThermometerState(d=d, sigma=sigma, m=1.0 / (1.0 + v),
                                    alpha0=complex(alpha0), v=float(v))


def qfi_direct(v: float, dv_dT: float, converged: bool = True) -> QfiEstimate:
    """``F_T = M (dv/dT)**2 / v`` with ``M = 1/(1+v)``."""
    if v < 0:
        raise DomainError(f"v must be non-negative, got {v}")
    if v < EPS_V:
        return QfiEstimate(0.0, "direct", converged)
    return QfiEstimate(dv_dT ** 2 / (v * (1.0 + v)), "direct", converged)


def qfi_direct_array(v: np.ndarray, dv_dT: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    ok = v >= EPS_V
    out[ok] = np.asarray(dv_dT)[ok] ** 2 / (v[ok] * (1.0 + v[ok]))
    return out


def gaussian_qfi(sigma: np.ndarray, d_sigma: np.ndarray, d_disp: np.ndarray) -> float:
    """Single-mode Gaussian QFI in the complex ``(a, a^dagger)`` form:

        F = 1/2 vec(dS)^H Mc^{-1} vec(dS) + 2 dd^H S^{-1} dd,
        Mc = conj(S) (x) S - K (x) K.
    """
    mc = np.kron(np.conj(sigma), sigma) - np.kron(K, K)
    vec = np.asarray(d_sigma, dtype=complex).reshape(-1, order="F")
    cond = np.linalg.cond(mc)
    log.debug("Gaussian QFI matrix condition number %.3g", cond)
    first = 0.5 * np.real(np.conj(vec) @ np.linalg.solve(mc, vec))
    dd = np.asarray(d_disp, dtype=complex)
    second = 2.0 * np.real(np.conj(dd) @ np.linalg.solve(sigma, dd))
    return float(first + second)


def qfi_gaussian(state: GaussianThermometerState, dv_dT: float,
                 d_disp_dT: np.ndarray | None = None) -> QfiEstimate:
    """QFI of ``state`` for a parameter that moves ``v`` at rate ``dv_dT``.

    The displacement does not depend on temperature in this model, so
    ``d_disp_dT`` defaults to zero.
    """
    if state.v < EPS_V:
        return QfiEstimate(0.0, "gaussian")
    d_sigma = 2.0 * dv_dT * np.eye(2)
    dd = np.zeros(2, dtype=complex) if d_disp_dT is None else d_disp_dT
    return QfiEstimate(gaussian_qfi(state.sigma, d_sigma, dd), "gaussian")


def equilibrium_qfi(omega, temp):
    """QFI of a thermal mode at frequency ``omega``:
    ``(omega/T)**2 nbar (1 + nbar) / T**2``."""
    t = _temperature(temp)
    return f_scaled(np.asarray(omega, float) / t) / t ** 2


def f_scaled(x):
    """``f(x) = x**2 nbar(x) [1 + nbar(x)]`` with ``nbar(x) = 1/(e^x - 1)``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = (x / np.expm1(x)) * (x / -np.expm1(-x))
    out = np.where(x == 0, 1.0, out)
    return float(out) if out.ndim == 0 else out


def qfi_markovian(t, omega0: float, kappa: float, temp):
    """Born-Markov QFI ``Fbar (nbar + 1)/(nbar + 1/(1 - exp(-2 kappa t)))``."""
    tt = _temperature(temp)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("time must be non-negative")
    nbar = thermal_occupation(omega0, tt)
    fbar = equilibrium_qfi(omega0, tt)
    growth = -np.expm1(-2.0 * kappa * t)
    with np.errstate(divide="ignore"):
        out = np.where(growth > 0, fbar * (nbar + 1.0) / (nbar + 1.0 / np.where(growth > 0, growth, 1.0)), 0.0)
    return float(out) if out.ndim == 0 else out


# ----------------------------------------------------------------------------
# photon counting
# ----------------------------------------------------------------------------

def fock_cutoff(v: float, alpha: complex) -> int:
    return max(50, int(math.ceil(20.0 * (v + abs(alpha) ** 2))))


def displacement_probabilities(alpha: complex, n_max: int) -> np.ndarray:
    """``P[m, k] = |<m|D(alpha)|k>|**2`` for ``m, k <= n_max``.

    Uses the generalised-Laguerre form of the matrix elements, evaluated in
    log space.
    """
    x = abs(alpha) ** 2
    m = np.arange(n_max + 1)[:, None]
    k = np.arange(n_max + 1)[None, :]
    lo = np.minimum(m, k)
    hi = np.maximum(m, k)
    diff = hi - lo
    if x == 0:
        return np.eye(n_max + 1)
    lag = special.eval_genlaguerre(lo, diff, x)
    logmag = special.gammaln(lo + 1) - special.gammaln(hi + 1) + diff * np.log(x) - x
    return np.exp(logmag) * lag ** 2


def photon_distribution(alpha: complex, v: float, n_max: int | None = None) -> np.ndarray:
    """Photon-number probabilities of ``D(alpha) rho_th(v) D(alpha)^dagger``.

    Built from the truncated Fock-basis density matrix: geometric thermal
    weights propagated through ``|<n|D|k>|**2``. Raises
    :class:`TruncationError` when more than ``1e-10`` probability lies
    beyond an explicit ``n_max``; without one, the default cutoff is doubled
    until the tail is small enough.
    """
    if v < 0:
        raise DomainError("v must be non-negative")
    if n_max is None:
        n_max = fock_cutoff(v, alpha)
        for _ in range(6):
            try:
                return photon_distribution(alpha, v, n_max)
            except TruncationError:
                n_max *= 2
    k = np.arange(n_max + 1)
    if v == 0:
        thermal = (k == 0).astype(float)
    else:
        thermal = np.exp(k * math.log(v / (1.0 + v)) - math.log1p(v))
    p = displacement_probabilities(alpha, n_max) @ thermal
    tail = 1.0 - p.sum()
    if tail > 1e-10:
        raise TruncationError(f"Fock truncation at {n_max} leaves {tail:.2e} outside")
    return p


def number_measurement_cfi(state: GaussianThermometerState, dv_dT: float,
                           rel_step: float = 1e-5, max_doublings: int = 6) -> QfiEstimate:
    """Classical Fisher information of counting photons in ``state``.

    ``dp_n/dT = (dp_n/dv) dv/dT`` with the ``v``-derivative taken by a
    centred difference of relative size ``rel_step``. The Fock cutoff is
    doubled while the truncated tail exceeds ``1e-10``.
    """
    v = state.v
    if v <= 0:
        raise DomainError("photon-counting CFI needs v > 0")
    if dv_dT == 0:
        return QfiEstimate(0.0, "number-cfi")
    alpha = state.alpha
    h = rel_step * v
    n_max = fock_cutoff(v + h, alpha)
    for _ in range(max_doublings):
        try:
            p_hi = photon_distribution(alpha, v + h, n_max)
            break
        except TruncationError:
            n_max *= 2
    else:
        raise TruncationError(f"Fock truncation still too small at {n_max}")
    p = photon_distribution(alpha, v, n_max)
    dp = (p_hi - photon_distribution(alpha, v - h, n_max)) / (2.0 * h)
    keep = p > 1e-300
    fisher_v = float(np.sum(dp[keep] ** 2 / p[keep]))
    return QfiEstimate(fisher_v * dv_dT ** 2, "number-cfi")
