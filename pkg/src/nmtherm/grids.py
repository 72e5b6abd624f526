"""Time and frequency grids shared by the solvers.

Frequency integrals are done with composite Gauss-Legendre panels. The
panel layout is logarithmic near zero (the infrared region where the
heat-exchange spectrum can become singular), uniform over the band where
the integrands oscillate, and coarse in the exponentially suppressed tail.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

GL_NODES = 16


def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def panel_nodes(edges: np.ndarray, n: int = GL_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on consecutive panels given by ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x, w = _gauss_legendre(n)
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * x[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_n = n * dt`` on ``[0, t_max]``, node 0 included."""

    t_max: float = 50.0
    n_steps: int = 5000

    def __post_init__(self):
        if not (self.t_max > 0):
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")

    @classmethod
    def from_dt(cls, t_max: float, dt: float) -> "TimeGrid":
        if not (dt > 0):
            raise ValueError(f"dt must be positive, got {dt}")
        return cls(t_max=float(t_max), n_steps=int(round(t_max / dt)))

    @property
    def dt(self) -> float:
        return self.t_max / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    def __len__(self) -> int:
        return self.n_steps + 1


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Quadrature nodes on ``[0, omega_max]``.

    ``weights`` integrate smooth functions over the whole interval, so
    ``weights.sum()`` equals ``omega_max`` to round-off.
    """

    nodes: np.ndarray
    weights: np.ndarray
    omega_max: float
    omega_lo: float = 1e-6
    edges: np.ndarray = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.nodes.size

    def integrate(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        return np.tensordot(values, self.weights, axes=([axis], [0]))

    @classmethod
    def from_edges(cls, edges: Sequence[float], omega_lo: float = 1e-6,
                   n: int = GL_NODES) -> "FrequencyGrid":
        edges = np.asarray(edges, dtype=float)
        if np.any(np.diff(edges) <= 0):
            raise ValueError("panel edges must be strictly increasing")
        nodes, weights = panel_nodes(edges, n)
        return cls(nodes=nodes, weights=weights, omega_max=float(edges[-1]),
                   omega_lo=omega_lo, edges=edges)

    @classmethod
    def build(cls, omega_c: float, t_max: float | None = 50.0, *,
              omega0: float = 1.0, omega_lo: float = 1e-6,
              n_log_panels: int = 25, max_width: float = 0.5,
              extra_edges: Sequence[float] = ()) -> "FrequencyGrid":
        """Panel grid for a reservoir with cutoff ``omega_c``.

        ``t_max`` bounds the time content of the integrands (oscillations
        like ``exp(i omega t)`` with ``t <= t_max``); panel widths are chosen
        so each panel spans at most four such periods.
        """
        omega_max = 40.0 * max(omega_c, 1.0)
        width = max_width if t_max is None else min(max_width, 8 * np.pi / t_max)
        split = min(omega0, width)
        fine_end = min(max(10.0 * omega_c, 10.0 * omega0), omega_max)

        log_edges = np.geomspace(omega_lo, split, n_log_panels + 1)
        n_lin = max(1, int(np.ceil((fine_end - split) / width)))
        lin_edges = np.linspace(split, fine_end, n_lin + 1)
        # tail: integrands carry exp(-omega/omega_c) beyond fine_end
        n_tail = max(1, int(np.ceil(np.log2(omega_max / fine_end) * 8)))
        tail_edges = np.geomspace(fine_end, omega_max, n_tail + 1)
        edges = np.concatenate([[0.0], log_edges, lin_edges[1:], tail_edges[1:]])
        if len(extra_edges):
            edges = np.unique(np.concatenate([edges, np.asarray(extra_edges, float)]))
            edges = edges[(edges >= 0) & (edges <= omega_max)]
        return cls.from_edges(edges, omega_lo=omega_lo)


def adaptive_edges(func: Callable[[np.ndarray], np.ndarray], edges: Sequence[float],
                   rtol: float = 1e-9, atol: float = 1e-13, max_levels: int = 40,
                   n: int = GL_NODES) -> np.ndarray:
    """Bisect panels until a Gauss-Legendre rule on each panel agrees with
    the rule applied to its two halves.

    ``func`` must be vectorised. Returns the refined panel edges.
    """
    edges = np.asarray(edges, dtype=float)
    done: list[np.ndarray] = []
    lo, hi = edges[:-1], edges[1:]
    total_scale = None
    for _ in range(max_levels):
        if lo.size == 0:
            break
        mid = 0.5 * (lo + hi)
        whole = _panel_sums(func, lo, hi, n)
        halves = _panel_sums(func, lo, mid, n) + _panel_sums(func, mid, hi, n)
        if total_scale is None:
            total_scale = float(np.sum(np.abs(halves)))
        err = np.abs(whole - halves)
        ok = err <= np.maximum(atol, rtol * total_scale) * (hi - lo) / (edges[-1] - edges[0]) \
            + rtol * np.abs(halves)
        done.append(np.stack([lo[ok], hi[ok]], axis=1))
        bad = ~ok
        lo, hi = np.concatenate([lo[bad], mid[bad]]), np.concatenate([mid[bad], hi[bad]])
    if lo.size:
        done.append(np.stack([lo, hi], axis=1))
    pairs = np.concatenate(done)
    return np.unique(pairs.ravel())


def _panel_sums(func, lo, hi, n):
    x, w = _gauss_legendre(n)
    half = 0.5 * (hi - lo)[:, None]
    pts = 0.5 * (hi + lo)[:, None] + half * x[None, :]
    vals = np.abs(func(pts.ravel())).reshape(pts.shape)
    return np.sum(vals * w[None, :] * half, axis=1)
