"""Ohmic-family spectral density, its kernels, and the bound-state solver.

Units throughout: ``hbar = k_B = 1`` and frequencies measured in units of
the thermometer frequency ``omega0`` (which is still passed explicitly so
that the formulas stay readable).
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, interpolate, special

__all__ = [
    "DomainError",
    "SolverError",
    "SpectralDensity",
    "BoundState",
    "Temperature",
    "evaluate_j",
    "memory_kernel",
    "thermal_occupation",
    "thermal_derivative",
    "lamb_shift",
    "lamb_shift_array",
    "lamb_shift_closed_form",
    "detuning",
    "bound_state_exists",
    "find_bound_state",
    "threshold_bound_state",
    "asymptotic_bound_state",
    "residue",
    "theta_spectrum",
    "theta_ir_integral",
]

BISECTION_TOL = 1e-12
BISECTION_MAXITER = 200


class DomainError(ValueError):
    """Argument outside the domain of a physical function."""


class SolverError(RuntimeError):
    """A numerical procedure failed to converge."""


def gamma_fn(s: float) -> float:
    # exact factorial for integer orders
    if float(s).is_integer() and 0 < s < 171:
        return float(math.factorial(int(s) - 1))
    return math.gamma(s)


@dataclass(frozen=True)
class SpectralDensity:
    """``J(omega) = eta * omega**s * omega_c**(1-s) * exp(-omega/omega_c)``."""

    eta: float
    s: float = 1.0
    omega_c: float = 10.0

    def __post_init__(self):
        if not (self.eta >= 0):
            raise DomainError(f"eta must be non-negative, got {self.eta}")
        if not (self.s > 0):
            raise DomainError(f"s must be positive, got {self.s}")
        if not (self.omega_c > 0):
            raise DomainError(f"omega_c must be positive, got {self.omega_c}")

    @property
    def integer_order(self) -> Optional[int]:
        """``s`` as an int when the closed-form Lamb shift applies."""
        if float(self.s).is_integer() and self.s <= 12:
            return int(self.s)
        return None

    @property
    def omega_max(self) -> float:
        return 40.0 * max(self.omega_c, 1.0)

    @property
    def reorganization(self) -> float:
        """``int_0^inf J(w)/w dw = eta * omega_c * Gamma(s)``."""
        return self.eta * self.omega_c * gamma_fn(self.s)

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.eta * self.omega_c ** (1.0 - self.s)
                   * np.power(omega, self.s) * np.exp(-omega / self.omega_c))
        return np.where(omega > 0, out, 0.0)

    def scalar(self, w: float) -> float:
        """Fast scalar ``J(w)`` for use inside adaptive quadrature."""
        if w <= 0:
            return 0.0
        return self.eta * self.omega_c ** (1.0 - self.s) * w ** self.s * math.exp(-w / self.omega_c)


@dataclass(frozen=True)
class Temperature:
    t: float

    def __post_init__(self):
        if not (self.t > 0):
            raise DomainError(f"temperature must be positive, got {self.t}")

    @property
    def beta(self) -> float:
        return 1.0 / self.t


@dataclass(frozen=True)
class BoundState:
    """Isolated eigenvalue ``e_b < 0`` below the band and its residue ``z``."""

    e_b: float
    z: float


def _temperature(temp) -> float:
    t = temp.t if isinstance(temp, Temperature) else float(temp)
    if not (t > 0):
        raise DomainError(f"temperature must be positive, got {t}")
    return t


def evaluate_j(sd: SpectralDensity, omega):
    omega_arr = np.asarray(omega, dtype=float)
    if np.any(omega_arr < 0):
        raise DomainError("spectral density is defined for omega >= 0")
    out = sd(omega_arr)
    return float(out) if out.ndim == 0 else out


def memory_kernel(sd: SpectralDensity, x):
    """Closed form of ``mu(x) = int_0^inf J(w) exp(-i w x) dw``."""
    x = np.asarray(x, dtype=float)
    pref = sd.eta * sd.omega_c ** (1.0 - sd.s) * math.gamma(sd.s + 1.0)
    out = pref * np.power(1.0 / sd.omega_c + 1j * x, -(sd.s + 1.0))
    return complex(out) if out.ndim == 0 else out


def thermal_occupation(omega, temp):
    """Bose-Einstein occupation ``1/(exp(omega/T) - 1)``."""
    t = _temperature(temp)
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise DomainError("thermal occupation needs omega > 0")
    with np.errstate(over="ignore"):
        out = 1.0 / np.expm1(omega / t)
    return float(out) if out.ndim == 0 else out


def thermal_derivative(omega, temp):
    """``d nbar / dT = (omega/T**2) * nbar * (1 + nbar)``."""
    t = _temperature(temp)
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise DomainError("thermal occupation needs omega > 0")
    x = omega / t
    # x nbar (1 + nbar) = [x/(e^x - 1)] / (1 - e^-x): no overflow or underflow
    with np.errstate(over="ignore"):
        out = (x / np.expm1(x)) / (-np.expm1(-x)) / t
    return float(out) if out.ndim == 0 else out


# ----------------------------------------------------------------------------
# Lamb shift  Delta(E) = P int_0^inf J(w)/(E - w) dw
# ----------------------------------------------------------------------------

def _tail_over_omega(sd: SpectralDensity, upper: float) -> float:
    """``int_upper^inf J(w)/w dw`` (upper incomplete gamma)."""
    return sd.reorganization * special.gammaincc(sd.s, upper / sd.omega_c)


def _quad(f, a, b, **kw) -> float:
    if b <= a:
        return 0.0
    kw.setdefault("limit", 400)
    kw.setdefault("epsabs", 1e-14)
    kw.setdefault("epsrel", 1e-12)
    val, _ = integrate.quad(f, a, b, **kw)
    return val


def _quad_wide(f, a, b, scale: float) -> float:
    """Integral over ``[a, b]`` where ``a`` may be many decades below ``scale``.

    Below ``scale`` the integral is done in ``log w``.
    """
    if b <= a:
        return 0.0
    total = 0.0
    if a < scale:
        cut = min(b, scale)
        lo, hi = math.log(a), math.log(cut)
        pts = list(np.arange(math.ceil(lo / 4) * 4, hi, 4.0)[1:])
        total += _quad(lambda x: f(math.exp(x)) * math.exp(x), lo, hi, points=pts or None)
        a = cut
    if b > a:
        pts = [p for p in (2 * scale, 5 * scale, 15 * scale) if a < p < b]
        total += _quad(f, a, b, points=pts or None)
    return total


def lamb_shift(sd: SpectralDensity, e: float) -> float:
    """Reservoir-induced shift ``P int_0^inf J(w)/(e - w) dw`` by quadrature.

    For ``e > 0`` the principal value is taken by symmetric singularity
    subtraction around ``e``; the part of the integral beyond
    ``sd.omega_max`` is added from the incomplete-gamma tail estimate.
    """
    e = float(e)
    if sd.eta == 0:
        return 0.0
    if e == 0.0:
        return -sd.reorganization
    upper = sd.omega_max
    jf = sd.scalar
    if e < 0:
        body = _quad_wide(lambda w: jf(w) / (w - e), 1e-300, upper, sd.omega_c)
        return -(body + _tail_over_omega(sd, upper))
    if e >= upper:
        raise DomainError(f"lamb_shift evaluated beyond the quadrature window: {e}")
    h = min(e, upper - e)
    je = jf(e)

    def subtracted(w):
        d = w - e
        return (jf(w) - je) / d if d != 0.0 else 0.0

    core = _quad(subtracted, e - h, e + h, points=[e])
    left = _quad_wide(lambda w: jf(w) / (w - e), 1e-300, e - h, sd.omega_c) if e - h > 0 else 0.0
    right = _quad_wide(lambda w: jf(w) / (w - e), e + h, upper, sd.omega_c)
    return -(core + left + right + _tail_over_omega(sd, upper))


def _scaled_expi(x: np.ndarray) -> np.ndarray:
    """``exp(-x) * Ei(x)`` without overflow."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    big = np.abs(x) > 600
    xs = x[~big]
    out[~big] = np.exp(-xs) * special.expi(xs)
    xb = x[big]
    # asymptotic series of exp(-x) Ei(x) ~ sum k!/x^(k+1)
    acc = np.zeros_like(xb)
    term = 1.0 / xb
    for k in range(12):
        acc += term
        term = term * (k + 1) / xb
    out[big] = acc
    return out


def lamb_shift_delta(sd: SpectralDensity, e) -> np.ndarray:
    """``Delta(e) - Delta(0)`` in closed form for integer ``s``.

    Splitting off ``Delta(0)`` keeps full relative precision at small ``e``,
    which the infrared analysis near the critical point relies on.
    """
    n = sd.integer_order
    if n is None:
        raise ValueError("closed form requires integer s")
    e = np.asarray(e, dtype=float)
    wc = sd.omega_c
    x = e / wc
    poly = np.zeros_like(e)
    for k in range(n - 1):
        poly += e ** (n - 1 - k) * math.factorial(k) * wc ** (k + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        log_part = np.where(e != 0, e ** n * _scaled_expi(np.where(e != 0, x, 1.0)), 0.0)
    return -sd.eta * wc ** (1 - n) * (poly - log_part)


def lamb_shift_closed_form(sd: SpectralDensity, e):
    e = np.asarray(e, dtype=float)
    out = -sd.reorganization + lamb_shift_delta(sd, e)
    return float(out) if out.ndim == 0 else out


@functools.lru_cache(maxsize=64)
def _delta_table(sd: SpectralDensity):
    """Spline of ``Delta(E) - Delta(0)`` over ``log E`` for non-integer ``s``."""
    lo, hi = 1e-9, 0.999 * sd.omega_max
    logs = np.linspace(np.log(lo), np.log(hi), 360)
    vals = np.array([lamb_shift(sd, math.exp(x)) + sd.reorganization for x in logs])
    return logs, interpolate.CubicSpline(logs, vals), vals[0]


def lamb_shift_array(sd: SpectralDensity, e) -> np.ndarray:
    """Vectorised ``Delta(e) - Delta(0)`` for ``e >= 0``.

    Integer ``s`` uses the exponential-integral closed form; otherwise a
    cubic spline of the quadrature result in ``log e`` (power-law
    extrapolation below its first node).
    """
    e = np.asarray(e, dtype=float)
    if sd.eta == 0:
        return np.zeros_like(e)
    if sd.integer_order is not None:
        return lamb_shift_delta(sd, e)
    logs, spline, d0 = _delta_table(sd)
    out = np.empty_like(e)
    le = np.log(np.maximum(e, 1e-300))
    inside = le >= logs[0]
    out[inside] = spline(le[inside])
    p = min(sd.s, 1.0)
    out[~inside] = d0 * np.exp(p * (le[~inside] - logs[0]))
    out[e == 0] = 0.0
    return out


def detuning(sd: SpectralDensity, omega0: float) -> float:
    """``y(0) = omega0 - eta*omega_c*Gamma(s)``; negative iff a bound state forms."""
    return omega0 - sd.reorganization


def _y_minus_e(sd: SpectralDensity, omega0: float, e: float) -> float:
    if sd.integer_order is not None:
        return detuning(sd, omega0) + float(lamb_shift_delta(sd, e)) - e
    return omega0 + lamb_shift(sd, e) - e


def bound_state_exists(sd: SpectralDensity, omega0: float) -> bool:
    if not (omega0 > 0):
        raise DomainError("omega0 must be positive")
    return sd.eta > 0 and detuning(sd, omega0) < 0


def residue(sd: SpectralDensity, e_b: float) -> float:
    """``Z = [1 + int J(w)/(e_b - w)**2 dw]**-1`` for ``e_b < 0``."""
    if e_b >= 0:
        raise DomainError("residue is defined below the band")
    f = lambda w: sd.scalar(w) / (w - e_b) ** 2
    integral = _quad_wide(f, 1e-300, sd.omega_max, sd.omega_c)
    integral += _quad_wide(f, sd.omega_max, 60 * sd.omega_max, sd.omega_c)
    return 1.0 / (1.0 + integral)


def find_bound_state(sd: SpectralDensity, omega0: float) -> Optional[BoundState]:
    """Isolated root of ``y(E) = E`` below zero, or ``None`` when absent.

    ``y(E) - E`` is strictly decreasing for ``E < 0``, so the root is bracketed
    by ``(E_lo, 0)`` once ``y(E_lo) > E_lo`` and found by bisection.
    """
    if not bound_state_exists(sd, omega0):
        return None
    hi = 0.0
    lo = -max(1.0, abs(detuning(sd, omega0)))
    for _ in range(200):
        if _y_minus_e(sd, omega0, lo) > 0:
            break
        hi = lo
        lo *= 2.0
    else:
        raise SolverError("could not bracket the bound-state energy")
    for _ in range(BISECTION_MAXITER):
        mid = 0.5 * (lo + hi)
        if _y_minus_e(sd, omega0, mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < BISECTION_TOL:
            break
    e_b = 0.5 * (lo + hi)
    if e_b >= 0:
        raise SolverError("bound-state root collapsed onto the band edge")
    return BoundState(e_b=e_b, z=residue(sd, e_b))


def threshold_bound_state(sd: SpectralDensity, omega0: float,
                          tol: float = 1e-9) -> Optional[BoundState]:
    """Zero-energy eigenstate at the critical point.

    When ``omega0 = eta omega_c Gamma(s)`` and ``s > 1`` the state at the band
    edge is normalisable, with ``Z = 1/(1 + eta Gamma(s - 1))``. For
    ``s <= 1`` the norm integral diverges and there is none.
    """
    if sd.eta == 0 or sd.s <= 1 or abs(detuning(sd, omega0)) >= tol * omega0:
        return None
    return BoundState(e_b=0.0, z=1.0 / (1.0 + sd.eta * gamma_fn(sd.s - 1.0)))


def asymptotic_bound_state(sd: SpectralDensity, omega0: float) -> Optional[BoundState]:
    """The isolated level that survives at long times, including the
    band-edge state at criticality for ``s > 1``."""
    return find_bound_state(sd, omega0) or threshold_bound_state(sd, omega0)


def theta_spectrum(sd: SpectralDensity, omega0: float, e) -> np.ndarray:
    """Continuum weight ``Theta(E) = J/[(E - omega0 - Delta)^2 + (pi J)^2]``."""
    e = np.asarray(e, dtype=float)
    j = sd(e)
    gap = e - detuning(sd, omega0) - lamb_shift_array(sd, e)
    # scaled so that tiny e does not underflow the squares
    c = np.maximum(np.abs(gap), np.pi * j)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (j / c) / (c * ((gap / c) ** 2 + (np.pi * j / c) ** 2))
    return np.where(j > 0, out, 0.0)


IR_FLOOR = 1e-300


def theta_ir_integral(sd: SpectralDensity, omega0: float, upper: float,
                      weight=None) -> float:
    """``int_0^upper Theta(w) * weight(w) dw`` for small ``upper``.

    Done in ``log w`` down to ``1e-300``. For ``s = 1`` exactly at the
    critical point ``Theta ~ 1/(w log(w)**2)`` and the remainder below the
    floor is added in closed form (unweighted case only).
    """
    if sd.eta == 0 or upper <= 0:
        return 0.0

    def f(x):
        w = math.exp(x)
        val = float(theta_spectrum(sd, omega0, np.array([w]))[0]) * w
        return val * weight(w) if weight is not None else val

    lo, hi = math.log(IR_FLOOR), math.log(upper)
    pts = list(np.arange(lo, hi, 20.0)[1:])
    total = _quad(f, lo, hi, points=pts, epsrel=1e-11, epsabs=1e-15)
    if weight is None and sd.integer_order == 1 and abs(detuning(sd, omega0)) < 1e-250:
        a = 1.0 - sd.eta * np.euler_gamma - sd.eta * math.log(IR_FLOOR / sd.omega_c)
        pe = math.pi * sd.eta
        total += (0.5 * math.pi - math.atan(a / pe)) / pe
    return total
