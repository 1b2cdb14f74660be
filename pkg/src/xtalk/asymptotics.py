"""Deterministic equivalents for the ZF and MMSE SNR-loss parameters.

Everything here is a function of two scalars: the total average FEXT power
per user ``sigma2`` and a regularizer ``xi`` (``xi = eta`` for MMSE,
``xi = inf`` for ZF). The central object is the unique positive root ``t`` of

    sigma2^2 t^3 + 2 sigma2 t^2 + (1 + xi - xi sigma2) t - xi = 0,

and, for MMSE, the output SNR ``rho = eta/t - 1``, the unique positive root of

    rho^3 - S rho^2 + Q rho - P = 0,
    S = eta - eta sigma2 - 2,  Q = 1 - 2 eta,  P = eta^2 sigma2^2 + eta sigma2 + eta.

Scalar inputs return Python floats; array inputs broadcast and return arrays.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .cancelers import Canceler
from .errors import DerivativeSingularError, InvalidDimensionError, NoConvergenceError, OutOfDomainError

INFINITE = math.inf

# regime thresholds for mmse_regime_approx
LOW_SNR_ETA = 0.01
HIGH_SNR_ETA = 100.0
CRITICAL_BAND = 0.05
SMALL_SIGMA2 = 0.01
LARGE_SIGMA2 = 100.0


def _out(x, scalar):
    return float(x.reshape(())) if scalar else x


def _is_scalar(*args):
    return all(np.ndim(a) == 0 for a in args)


# --------------------------------------------------------------------------
# the t-cubic
# --------------------------------------------------------------------------

def t_cubic_coefficients(sigma2, xi):
    s = np.asarray(sigma2, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return s * s, 2.0 * s, 1.0 + xi - xi * s, -xi


def _t_roots(sigma2, xi):
    c3, c2, c1, c0 = np.broadcast_arrays(*t_cubic_coefficients(sigma2, xi))
    xi_b = -c0
    # t < xi always; start from the smaller of xi and the ZF-regime value
    s = np.broadcast_to(np.asarray(sigma2, dtype=float), c3.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        guess = np.where(s < 1.0, 1.0 / (1.0 - s), np.sqrt(xi_b * np.maximum(s - 1.0, 1e-3)) / np.maximum(s, 1.0))
    guess = np.minimum(guess, 0.5 * xi_b)
    roots, _ = kernels.cubic_positive_root(c3, c2, c1, c0, xi_b, guess)
    resid = kernels.cubic_relative_residual(c3, c2, c1, c0, roots)
    return roots, resid


@dataclass(frozen=True)
class ZfAsymptotic:
    """ZF limit; ``gamma`` is ``inf`` and ``divergent`` is set when
    ``sigma2 >= 1``, with ``divergence_rate = lim t/sqrt(xi)``."""

    gamma: float
    divergent: bool
    divergence_rate: float | None = None


def zf_gamma_asymptotic(sigma2: float) -> ZfAsymptotic:
    if not sigma2 >= 0:
        raise OutOfDomainError("sigma2 must be >= 0")
    if sigma2 >= 1.0:
        return ZfAsymptotic(math.inf, True, math.sqrt(sigma2 - 1.0) / sigma2)
    return ZfAsymptotic(1.0 / (1.0 - sigma2), False, None)


@dataclass(frozen=True)
class AsymptoticResult:
    """``gamma_o`` is the deterministic SNR loss (``inf`` when divergent);
    ``rho_o = xi/gamma_o - 1`` is the matching MMSE SNR when ``xi = eta``."""

    gamma_o: float
    rho_o: float
    solver_residual: float
    divergent: bool = False


def gamma_deterministic(sigma2, xi):
    """Deterministic equivalent of the SNR-loss parameter.

    ``xi = INFINITE`` routes to the closed-form ZF limit. For arrays, returns
    ``(gamma, residual)`` arrays; for scalars an :class:`AsymptoticResult`.
    """
    if _is_scalar(sigma2, xi):
        sigma2 = float(sigma2)
        xi = float(xi)
        if not sigma2 >= 0:
            raise OutOfDomainError("sigma2 must be >= 0")
        if not xi > 0:
            raise OutOfDomainError("xi must be > 0")
        if math.isinf(xi):
            zf = zf_gamma_asymptotic(sigma2)
            return AsymptoticResult(zf.gamma, 0.0, 0.0, zf.divergent)
        t, resid = _t_roots(sigma2, xi)
        t = float(t.reshape(()))
        return AsymptoticResult(t, xi / t - 1.0, float(resid.reshape(())))
    sigma2 = np.asarray(sigma2, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if np.any(sigma2 < 0) or np.any(~(xi > 0)):
        raise OutOfDomainError("need sigma2 >= 0 and xi > 0")
    if np.any(np.isinf(xi)):
        raise OutOfDomainError("array path needs finite xi; use zf_gamma_asymptotic for xi = inf")
    return _t_roots(sigma2, xi)


# --------------------------------------------------------------------------
# MMSE SNR cubic
# --------------------------------------------------------------------------

def mmse_cubic_spq(eta, sigma2):
    eta = np.asarray(eta, dtype=float)
    s = np.asarray(sigma2, dtype=float)
    return eta - eta * s - 2.0, 1.0 - 2.0 * eta, eta * eta * s * s + eta * s + eta


def _rho_roots(eta, sigma2):
    S, Q, P = np.broadcast_arrays(*mmse_cubic_spq(eta, sigma2))
    eta_b, s_b = np.broadcast_arrays(np.asarray(eta, dtype=float), np.asarray(sigma2, dtype=float))
    hi = np.maximum(eta_b, eta_b * (1.0 + s_b) + 1.0)
    guess = np.minimum(np.maximum(eta_b * np.abs(1.0 - s_b), np.sqrt(eta_b * (s_b + 1.0))), 0.5 * hi)
    one = np.ones_like(S)
    roots, _ = kernels.cubic_positive_root(one, -S, Q, -P, hi, guess)
    resid = kernels.cubic_relative_residual(one, -S, Q, -P, roots)
    return roots, resid


def mmse_snr_asymptotic(eta, sigma2):
    """Asymptotic MMSE output SNR ``rho_o`` (bracketed Newton)."""
    scalar = _is_scalar(eta, sigma2)
    eta = np.asarray(eta, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(~(eta > 0)) or np.any(sigma2 < 0):
        raise OutOfDomainError("need eta > 0 and sigma2 >= 0")
    roots, _ = _rho_roots(eta, sigma2)
    return _out(roots, scalar)


def mmse_snr_residual(eta, sigma2, rho):
    """Relative residual of ``rho`` in the MMSE cubic."""
    S, Q, P = mmse_cubic_spq(eta, sigma2)
    return kernels.cubic_relative_residual(1.0, -S, Q, -P, rho)


class CardanoRoot(NamedTuple):
    rho: float
    branch: int
    imag: float


def mmse_snr_cardano(eta: float, sigma2: float) -> CardanoRoot:
    """Closed-form Cardano evaluation of the MMSE cubic.

    All three branches ``k = 0, 1, 2`` are evaluated and the one closest to
    the real axis with positive real part is returned. Cross-check only; the
    branch selection is ill-conditioned near ``sigma2 = 1``.
    """
    S, Q, P = (float(v) for v in mmse_cubic_spq(eta, sigma2))
    d0 = S * S - 3.0 * Q
    d1 = 9.0 * S * Q - 2.0 * S ** 3 - 27.0 * P
    disc = cmath.sqrt(d1 * d1 - 4.0 * d0 ** 3)
    c = (d1 - disc) / 2.0
    if abs(c) == 0.0:
        c = (d1 + disc) / 2.0
    delta = c ** (1.0 / 3.0)
    w = complex(-0.5, 0.5 * math.sqrt(3.0))
    best = None
    for k in range(3):
        wk = w ** k
        if abs(delta) == 0.0:
            root = complex(S / 3.0)
        else:
            root = -(1.0 / 3.0) * (-S + wk * delta + d0 / (wk * delta))
        if root.real > 0 and (best is None or abs(root.imag) < abs(best[1].imag)):
            best = (k, root)
    if best is None:
        return CardanoRoot(math.nan, -1, math.nan)
    return CardanoRoot(best[1].real, best[0], best[1].imag)


# --------------------------------------------------------------------------
# regimes, derivative, extremal points
# --------------------------------------------------------------------------

class Regime(str, enum.Enum):
    LOW_SNR = "LOW_SNR"
    HIGH_SNR_SUB = "HIGH_SNR_SUB"
    HIGH_SNR_CRIT = "HIGH_SNR_CRIT"
    HIGH_SNR_SUPER = "HIGH_SNR_SUPER"
    LARGE_SIGMA = "LARGE_SIGMA"
    SMALL_SIGMA = "SMALL_SIGMA"
    EXACT = "EXACT"


class RegimeApprox(NamedTuple):
    value: float
    regime: Regime


def mmse_regime_approx(eta: float, sigma2: float) -> RegimeApprox:
    """Closed-form approximation of ``rho_o`` for the applicable regime.

    Checked in order: small ``sigma2``, low ``eta``, large ``sigma2``, high
    ``eta`` (split at ``|sigma2 - 1| < 0.05``). Outside all of them the exact
    root is returned under ``Regime.EXACT``.
    """
    if not eta > 0 or not sigma2 >= 0:
        raise OutOfDomainError("need eta > 0 and sigma2 >= 0")
    if sigma2 < SMALL_SIGMA2:
        return RegimeApprox(eta + eta * (1.0 - eta) / (eta + 1.0) * sigma2, Regime.SMALL_SIGMA)
    if eta < LOW_SNR_ETA:
        return RegimeApprox((1.0 + sigma2) * eta, Regime.LOW_SNR)
    if sigma2 >= LARGE_SIGMA2:
        return RegimeApprox(math.sqrt(eta * sigma2), Regime.LARGE_SIGMA)
    if eta > HIGH_SNR_ETA:
        if abs(sigma2 - 1.0) < CRITICAL_BAND:
            return RegimeApprox(sigma2 * sigma2 * eta ** (2.0 / 3.0), Regime.HIGH_SNR_CRIT)
        if sigma2 < 1.0:
            return RegimeApprox((1.0 - sigma2) * eta, Regime.HIGH_SNR_SUB)
        return RegimeApprox(sigma2 / math.sqrt(sigma2 - 1.0) * math.sqrt(eta), Regime.HIGH_SNR_SUPER)
    return RegimeApprox(mmse_snr_asymptotic(eta, sigma2), Regime.EXACT)


def mmse_snr_derivative(eta, sigma2, rho):
    """``d rho_o / d sigma2`` by implicit differentiation of the MMSE cubic."""
    scalar = _is_scalar(eta, sigma2, rho)
    eta, sigma2, rho = (np.asarray(v, dtype=float) for v in (eta, sigma2, rho))
    S = eta - eta * sigma2 - 2.0
    num = -eta * rho * rho + 2.0 * eta * eta * sigma2 + eta
    den = 3.0 * rho * rho - 2.0 * S * rho + 1.0 - 2.0 * eta
    scale = np.maximum.reduce([np.abs(3.0 * rho * rho), np.abs(2.0 * S * rho), np.abs(1.0 - 2.0 * eta),
                               np.ones_like(den)])
    if np.any(np.abs(den) <= 1e-12 * scale):
        raise DerivativeSingularError("implicit derivative denominator vanishes")
    return _out(num / den, scalar)


def extremal_interval(eta: float) -> tuple[float, float]:
    """Interval of ``sigma2`` on which an extremum with ``rho_* > 0`` can lie."""
    lo = 1.0 - 1.0 / eta
    hi = 1.0 - 2.0 / eta + math.sqrt(1.0 - 2.0 / eta + 2.0 / eta ** 2)
    return lo, hi


class Extremum(NamedTuple):
    sigma_star2: float
    rho_star: float


def _derivative_sign_fn(eta):
    # sign of d rho/d sigma2 equals the sign of -rho^2 + 2 eta sigma2 + 1
    def h(s):
        rho = mmse_snr_asymptotic(eta, s)
        return -rho * rho + 2.0 * eta * s + 1.0
    return h


def mmse_extremal_sigma(eta: float) -> Extremum | None:
    """Location of the local minimum of ``rho_o`` over ``sigma2``.

    ``None`` when ``eta <= 1`` (``rho_o`` is monotone). Otherwise bisects the
    derivative sign inside :func:`extremal_interval`.
    """
    if not eta > 0:
        raise OutOfDomainError("eta must be > 0")
    if eta <= 1.0:
        return None
    lo, hi = extremal_interval(eta)
    lo = max(lo, 0.0)
    h = _derivative_sign_fn(eta)
    hlo, hhi = h(lo), h(hi)
    if hlo > 0 or hhi < 0:
        # no sign change at the ends; scan the interval for one
        grid = np.linspace(lo, hi, 257)
        rho = mmse_snr_asymptotic(eta, grid)
        vals = -rho * rho + 2.0 * eta * grid + 1.0
        idx = np.nonzero((vals[:-1] <= 0) & (vals[1:] >= 0))[0]
        if idx.size == 0:
            return None
        lo, hi = float(grid[idx[0]]), float(grid[idx[0] + 1])
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if h(mid) < 0:
            lo = mid
        else:
            hi = mid
    s_star = 0.5 * (lo + hi)
    return Extremum(s_star, mmse_snr_asymptotic(eta, s_star))


def wireless_mmse_snr(eta_sigma2_product):
    """Output SNR of the i.i.d. (wireless) MMSE limit."""
    c = np.asarray(eta_sigma2_product, dtype=float)
    if np.any(c < 0):
        raise OutOfDomainError("product must be >= 0")
    # -0.5 + 0.5 sqrt(1 + 4c), written without cancellation
    out = 2.0 * c / (1.0 + np.sqrt(1.0 + 4.0 * c))
    return _out(out, np.ndim(eta_sigma2_product) == 0)


# --------------------------------------------------------------------------
# general variance profile
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class VarianceProfile:
    """Per-entry variances ``sigma_ij^2(n)`` of the scaled off-diagonal part."""

    var: np.ndarray

    def __post_init__(self):
        v = np.array(self.var, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 2:
            raise InvalidDimensionError(f"variance profile must be n x n with n >= 2, got {v.shape}")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise OutOfDomainError("variances must be finite and >= 0")
        if np.any(np.diag(v) != 0):
            raise OutOfDomainError("variance profile diagonal must be zero")
        v.setflags(write=False)
        object.__setattr__(self, "var", v)

    @property
    def n(self) -> int:
        return self.var.shape[0]

    @classmethod
    def homogeneous(cls, n: int, sigma2: float) -> "VarianceProfile":
        """``n/(n-1) sigma2`` off the diagonal."""
        v = np.full((n, n), n / (n - 1) * sigma2)
        np.fill_diagonal(v, 0.0)
        return cls(v)

    @classmethod
    def from_total_powers(cls, powers) -> "VarianceProfile":
        """Profile from per-entry total powers ``(M-1) E|q_ij|^2``."""
        p = np.array(powers, dtype=float)
        n = p.shape[0]
        p = p * (n / (n - 1))
        np.fill_diagonal(p, 0.0)
        return cls(p)


@dataclass(frozen=True, eq=False)
class FixedPointResult:
    t: np.ndarray
    t_tilde: np.ndarray
    iterations: int
    residual: float

    @property
    def mean_t(self) -> float:
        return float(np.mean(self.t))


def hachem_fixed_point(profile: VarianceProfile, xi: float, *, damping: float = 0.5,
                       tol: float = 1e-12, max_iter: int = 100_000) -> FixedPointResult:
    """Solve the coupled diagonal system for ``T(-1/xi)``, ``T~(-1/xi)``.

    With ``a_i = (1/n) sum_j var_ij t~_j`` and ``b_i = (1/n) sum_k var_ki t_k``::

        t_i  = 1 / ((1 + a_i)/xi + 1/(1 + b_i))
        t~_i = 1 / ((1 + b_i)/xi + 1/(1 + a_i))

    iterated with damping from ``min(xi, 1)``. ``mean_t`` is the deterministic
    equivalent of the normalized resolvent trace.
    """
    if not xi > 0 or math.isinf(xi):
        raise OutOfDomainError("xi must be finite and > 0")
    t, tt, iters, resid = kernels.fixed_point(profile.var, xi, damping, tol, max_iter, min(xi, 1.0))
    if not resid < tol:
        raise NoConvergenceError(float(resid), int(iters))
    return FixedPointResult(np.asarray(t), np.asarray(tt), int(iters), float(resid))


class Bounds(NamedTuple):
    upper: float
    lower: float


def theorem2_bounds(sigma_u2: float, sigma_l2: float) -> Bounds:
    """ZF SNR-loss bounds from the largest and smallest per-entry FEXT powers."""
    if not sigma_u2 < 1.0:
        raise OutOfDomainError("sigma_u2 must be < 1")
    if not 0.0 <= sigma_l2 <= sigma_u2:
        raise OutOfDomainError("need 0 <= sigma_l2 <= sigma_u2")
    return Bounds(1.0 / (1.0 - sigma_u2), 1.0 / (1.0 - sigma_l2))


# --------------------------------------------------------------------------
# rates
# --------------------------------------------------------------------------

def asymptotic_sinr(eta, sigma2, kind: Canceler | str):
    """Deterministic-equivalent output SINR; ZF is 0 where ``sigma2 >= 1``."""
    kind = Canceler(kind)
    scalar = _is_scalar(eta, sigma2)
    eta = np.asarray(eta, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(~(eta > 0)) or np.any(sigma2 < 0):
        raise OutOfDomainError("need eta > 0 and sigma2 >= 0")
    if kind is Canceler.ZF:
        with np.errstate(divide="ignore"):
            out = np.where(sigma2 < 1.0, eta * (1.0 - np.minimum(sigma2, 1.0)), 0.0)
        out = np.broadcast_to(out, np.broadcast(eta, sigma2).shape).copy()
    else:
        out, _ = _rho_roots(eta, sigma2)
    return _out(out, scalar)


def asymptotic_rate(eta, sigma2, kind: Canceler | str):
    """``log2(1 + eta/gamma_o)`` for ZF (0 when divergent), ``log2(1 + rho_o)`` for MMSE."""
    return np.log2(1.0 + asymptotic_sinr(eta, sigma2, kind))
