"""Exact per-realization performance of linear ZF and MMSE cancelers."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import IO, NamedTuple

import numpy as np

from .channel import ChannelRealization
from .errors import InvalidDimensionError, InvalidGainError, SingularChannelError

COND_LIMIT = 1e12


class Canceler(str, enum.Enum):
    ZF = "ZF"
    MMSE = "MMSE"


def _eye_like(h):
    return np.broadcast_to(np.eye(h.shape[-1], dtype=h.dtype), h.shape)


def _norm1(a):
    return np.max(np.sum(np.abs(a), axis=-2), axis=-1)


def inverse_gram_diagonal(h, reg=None, cond_limit: float = COND_LIMIT):
    """Diagonal of ``(H^H H + diag(reg))^{-1}`` for a matrix or a stack.

    Without ``reg`` the diagonal is the squared row norms of ``H^{-1}``
    (LU solves against the identity) and the 1-norm condition number is
    checked against ``cond_limit``. With ``reg > 0`` the regularized Gram
    matrix is Cholesky-factored and the diagonal is the squared column norms
    of ``L^{-1}``. Returns ``(diag, cond)``; ``cond`` is NaN when regularized.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim < 2 or h.shape[-1] != h.shape[-2]:
        raise InvalidDimensionError(f"square matrix expected, got shape {h.shape}")
    if reg is None:
        try:
            hinv = np.linalg.solve(h, _eye_like(h))
        except np.linalg.LinAlgError:
            raise SingularChannelError(np.inf) from None
        cond = _norm1(h) * _norm1(hinv)
        worst = np.max(cond) if np.ndim(cond) else cond
        if not np.isfinite(worst) or worst > cond_limit:
            raise SingularChannelError(float(worst))
        return np.sum(np.abs(hinv) ** 2, axis=-1), cond
    gram = np.conj(np.swapaxes(h, -1, -2)) @ h
    idx = np.arange(h.shape[-1])
    gram[..., idx, idx] += np.asarray(reg, dtype=float)
    try:
        chol = np.linalg.cholesky(gram)
        linv = np.linalg.solve(chol, _eye_like(chol))
    except np.linalg.LinAlgError:
        raise SingularChannelError(np.inf, "regularized Gram matrix is not positive definite") from None
    return np.sum(np.abs(linv) ** 2, axis=-2), np.nan


def zf_sinr(h, eta):
    """ZF SINR ``eta_i / [(H^H H)^{-1}]_ii``; returns ``(sinr, gamma)``."""
    gamma, _ = inverse_gram_diagonal(h)
    return np.asarray(eta) / gamma, gamma


def mmse_sinr(h, eta):
    """MMSE SINR ``eta_i / gamma_i - 1`` with ``gamma`` from the
    ``1/eta``-regularized Gram matrix; returns ``(sinr, gamma)``."""
    eta = np.asarray(eta, dtype=float)
    gamma, _ = inverse_gram_diagonal(h, 1.0 / eta)
    return np.maximum(eta / gamma - 1.0, 0.0), gamma


@dataclass(frozen=True, eq=False)
class CancelerReport:
    per_user_sinr: np.ndarray
    per_user_rate: np.ndarray
    per_user_gamma: np.ndarray
    gamma_bar: float
    canceler_kind: Canceler
    condition: float = float("nan")

    @property
    def sinr_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.per_user_sinr)

    def write_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "sinr_linear", "sinr_db", "rate_bps_hz"])
        for i, (s, sdb, r) in enumerate(zip(self.per_user_sinr, self.sinr_db, self.per_user_rate)):
            w.writerow([i, repr(float(s)), repr(float(sdb)), repr(float(r))])
        w.writerow(["gamma_bar", repr(float(self.gamma_bar))])


def single_wire_snr(realization: ChannelRealization, p: float, noise_var: float) -> np.ndarray:
    """``eta_i = p |d_ii|^2 / sigma_v^2``."""
    if p <= 0 or noise_var <= 0:
        raise ValueError("p and noise_var must be positive")
    return p * np.abs(realization.d) ** 2 / noise_var


def sinr_linear(realization: ChannelRealization, equalizer, p: float, noise_var: float) -> np.ndarray:
    """Per-user SINR of an arbitrary linear equalizer ``F`` applied to ``y``."""
    f = np.asarray(equalizer, dtype=complex)
    m = realization.m
    if f.shape != (m, m):
        raise InvalidDimensionError(f"equalizer must be {m}x{m}, got {f.shape}")
    if p <= 0 or noise_var <= 0:
        raise ValueError("p and noise_var must be positive")
    fh = f @ realization.hc
    power = np.abs(fh) ** 2
    signal = p * np.diag(power)
    interference = p * (power.sum(axis=1) - np.diag(power))
    noise = noise_var * np.sum(np.abs(f) ** 2, axis=1)
    denom = interference + noise
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(signal > 0, signal / denom, 0.0)
    return out


def zf_report(realization: ChannelRealization, p: float, noise_var: float) -> CancelerReport:
    eta = single_wire_snr(realization, p, noise_var)
    gamma, cond = inverse_gram_diagonal(realization.h)
    sinr = eta / gamma
    return CancelerReport(sinr, np.log2(1.0 + sinr), gamma, float(np.mean(gamma)), Canceler.ZF, float(cond))


def mmse_report(realization: ChannelRealization, p: float, noise_var: float) -> CancelerReport:
    if np.any(realization.d == 0):
        raise InvalidGainError("MMSE requires all direct gains to be nonzero")
    eta = single_wire_snr(realization, p, noise_var)
    gamma, _ = inverse_gram_diagonal(realization.h, 1.0 / eta)
    sinr = np.maximum(eta / gamma - 1.0, 0.0)
    return CancelerReport(sinr, np.log2(1.0 + sinr), gamma, float(np.mean(gamma)), Canceler.MMSE)


def zf_equalizer(realization: ChannelRealization) -> np.ndarray:
    """``F = H^{-1}`` (equivalently ``D H_c^{-1}``)."""
    return np.linalg.solve(realization.h, np.eye(realization.m))


def mmse_equalizer(realization: ChannelRealization, p: float, noise_var: float) -> np.ndarray:
    """``F = p|D|^2 H^H (p H |D|^2 H^H + sigma_v^2 I)^{-1}``."""
    h = realization.h
    d2 = np.abs(realization.d) ** 2
    cov = p * (h * d2) @ h.conj().T + noise_var * np.eye(realization.m)
    # F = A C^{-1}  <=>  C^H F^H = A^H, with C Hermitian
    a = p * d2[:, None] * h.conj().T
    return np.linalg.solve(cov, a.conj().T).conj().T


def single_wire_rate(eta) -> np.ndarray:
    return np.log2(1.0 + np.asarray(eta, dtype=float))


class JensenBound(NamedTuple):
    rate: np.ndarray
    degenerate: np.ndarray


def jensen_rate_bound(eta, mean_gamma_bar: float, kind: Canceler | str) -> JensenBound:
    """Jensen lower bound on the average per-user rate (bits/s/Hz).

    ZF: ``log2(1 + eta/gamma_bar)``. MMSE: ``log2(eta/gamma_bar)``, clamped to
    0 with ``degenerate`` set where ``gamma_bar >= eta``.
    """
    if not mean_gamma_bar > 0:
        raise ValueError("mean_gamma_bar must be positive")
    eta = np.asarray(eta, dtype=float)
    kind = Canceler(kind)
    if kind is Canceler.ZF:
        return JensenBound(np.log2(1.0 + eta / mean_gamma_bar), np.zeros(eta.shape, dtype=bool))
    degenerate = mean_gamma_bar >= eta
    with np.errstate(divide="ignore"):
        rate = np.where(degenerate, 0.0, np.log2(np.maximum(eta, mean_gamma_bar) / mean_gamma_bar))
    return JensenBound(rate, degenerate)
