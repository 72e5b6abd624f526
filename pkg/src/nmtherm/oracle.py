"""Brute-force check: the reservoir as ``N`` discrete modes.

In the single-excitation sector the Hamiltonian is an arrowhead matrix
with ``omega0`` in the corner, the mode frequencies on the diagonal and
the couplings ``g_k`` on the border. One eigendecomposition gives the
spectrum, ``u(t)`` and ``v(t)`` at any time.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .grids import TimeGrid
from .spectral import DomainError, SolverError, SpectralDensity, _temperature, thermal_occupation

log = logging.getLogger(__name__)

GAP_EPS = 1e-4


@dataclass(frozen=True, eq=False)
class DiscretizedModel:
    """Midpoint discretisation ``omega_k = (k - 1/2) delta``, ``k = 1..N``,
    with ``g_k = sqrt(J(omega_k) delta)``."""

    sd: SpectralDensity
    n_modes: int
    omega0: float = 1.0
    omega_max: float | None = None
    omegas: np.ndarray = field(init=False, repr=False)
    couplings: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.n_modes) != self.n_modes or self.n_modes < 2:
            raise DomainError("n_modes must be an integer >= 2")
        if self.omega0 <= 0:
            raise DomainError("omega0 must be positive")
        wmax = self.sd.omega_max if self.omega_max is None else float(self.omega_max)
        if wmax <= 0:
            raise DomainError("omega_max must be positive")
        object.__setattr__(self, "omega_max", wmax)
        delta = wmax / self.n_modes
        omegas = (np.arange(1, self.n_modes + 1) - 0.5) * delta
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "couplings", np.sqrt(self.sd(omegas) * delta))

    @property
    def delta(self) -> float:
        return self.omega_max / self.n_modes

    @property
    def recurrence_time(self) -> float:
        """Revival time ``2 pi / delta``; trajectories beyond it are artefacts."""
        return 2.0 * math.pi / self.delta

    def hamiltonian(self) -> np.ndarray:
        n = self.n_modes
        h = np.zeros((n + 1, n + 1))
        h[0, 0] = self.omega0
        h[np.arange(1, n + 1), np.arange(1, n + 1)] = self.omegas
        h[0, 1:] = self.couplings
        h[1:, 0] = self.couplings
        return h


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = field(default=None, repr=False)

    @property
    def lowest(self) -> float:
        return float(self.eigenvalues[0])

    def isolated_levels(self, eps: float = GAP_EPS) -> np.ndarray:
        """Eigenvalues below ``-eps``: bound states split off the band."""
        return self.eigenvalues[self.eigenvalues < -eps]


def build_and_diagonalize(model: DiscretizedModel, vectors: bool = True) -> SpectrumResult:
    """Symmetric eigensolve of the single-excitation matrix, ascending order."""
    h = model.hamiltonian()
    try:
        if vectors:
            w, v = linalg.eigh(h, driver="evd", check_finite=False)
        else:
            w, v = linalg.eigh(h, eigvals_only=True, check_finite=False), None
    except linalg.LinAlgError as exc:
        raise SolverError(f"eigensolver failed: {exc}") from exc
    return SpectrumResult(eigenvalues=w, eigenvectors=v)


@dataclass(frozen=True, eq=False)
class OracleTrajectory:
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray  # shape (n_temperatures, n_times)
    reservoir_weight: np.ndarray  # sum_k |U_0k|**2


def exact_dynamics(model: DiscretizedModel, temp, grid: TimeGrid,
                   spectrum: SpectrumResult | None = None,
                   chunk: int = 64) -> OracleTrajectory:
    """``u(t) = U_00(t)`` and ``v(t) = sum_k |U_0k(t)|**2 nbar(omega_k)``.

    ``temp`` may be one temperature or a sequence. ``grid.t_max`` must stay
    below the recurrence time of the discretised band.
    """
    if grid.t_max >= model.recurrence_time:
        raise DomainError(f"t_max={grid.t_max} exceeds the recurrence time "
                          f"{model.recurrence_time:.4g} of the mode grid")
    temps = [_temperature(t) for t in (temp if isinstance(temp, Sequence) else [temp])]
    spectrum = spectrum or build_and_diagonalize(model)
    if spectrum.eigenvectors is None:
        raise DomainError("exact_dynamics needs eigenvectors")
    e, vec = spectrum.eigenvalues, spectrum.eigenvectors
    row0 = vec[0, :]
    w = vec[1:, :] * row0[None, :]
    nbar = np.stack([thermal_occupation(model.omegas, t) for t in temps], axis=1)
    times = grid.times
    u = np.empty(times.size, dtype=complex)
    v = np.empty((len(temps), times.size))
    weight = np.empty(times.size)
    for start in range(0, times.size, chunk):
        t = times[start:start + chunk]
        phase = np.exp(-1j * np.outer(t, e))
        u[start:start + chunk] = phase @ (row0 * row0)
        amp2 = np.abs(phase @ w.T) ** 2
        v[:, start:start + chunk] = (amp2 @ nbar).T
        weight[start:start + chunk] = amp2.sum(axis=1)
    return OracleTrajectory(times=times, u=u, v=v, reservoir_weight=weight)


__all__ = ["DiscretizedModel", "SpectrumResult", "OracleTrajectory",
           "build_and_diagonalize", "exact_dynamics"]
