"""Monte Carlo experiments on the alternative matrix sequence.

``Sigma_n = I_n + sqrt((M-1)/(n-1)) Q_n`` keeps the total FEXT power per user
fixed while the dimension grows, so its normalized resolvent trace converges
to the deterministic equivalent of the size-``M`` system.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .asymptotics import gamma_deterministic
from .cancelers import Canceler, inverse_gram_diagonal
from .channel import ChannelRealization, DirectModelParams, FextModelParams, RngSpec, generate_realization, sigma_total
from .errors import InvalidDimensionError

DEFAULT_TRIALS = 200

# stream tags keep experiments on disjoint random streams for the same seed
STREAM_CONVERGENCE = 1
STREAM_SCATTER = 2


def thread_count(threads: int | None = None) -> int:
    """Worker count: explicit value, else ``XTALK_THREADS``, else the CPU count."""
    if threads is None:
        env = os.environ.get("XTALK_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def ordered_map(fn: Callable, items: Iterable, threads: int | None = None) -> list:
    """``map`` with optional threads; results are returned in input order."""
    items = list(items)
    n = min(thread_count(threads), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass
class RunningStats:
    """Welford accumulator with pairwise merge."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def push(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def extend(self, xs: Iterable[float]) -> "RunningStats":
        for x in xs:
            self.push(float(x))
        return self

    def merge(self, other: "RunningStats") -> "RunningStats":
        if other.count == 0:
            return RunningStats(self.count, self.mean, self.m2)
        if self.count == 0:
            return RunningStats(other.count, other.mean, other.m2)
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return RunningStats(n, mean, m2)

    @property
    def variance(self) -> float:
        return self.m2 / self.count if self.count else math.nan

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def rms_about(self, ref: float) -> float:
        """``sqrt(E|x - ref|^2)`` over the pushed samples."""
        return math.sqrt(self.variance + (self.mean - ref) ** 2)


@dataclass(frozen=True)
class EnsembleStats:
    mean_gamma_bar: float
    std_gamma_bar: float
    coeff_variation: float
    trials: int
    gamma_det: float

    @classmethod
    def from_samples(cls, samples: Sequence[float], gamma_det: float) -> "EnsembleStats":
        acc = RunningStats().extend(samples)
        if math.isinf(gamma_det):
            cov = math.inf
        else:
            cov = acc.rms_about(gamma_det) / acc.mean
        return cls(acc.mean, acc.std, cov, acc.count, gamma_det)


@dataclass(frozen=True)
class SequenceSpec:
    m_target: int
    n_values: tuple
    base_fext: FextModelParams

    def __post_init__(self):
        if self.m_target < 2 or any(n < 2 for n in self.n_values):
            raise InvalidDimensionError("all sizes must be >= 2")
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))

    @property
    def sigma2(self) -> float:
        return sigma_total(self.base_fext, self.m_target)


_UNIT_DIRECT = DirectModelParams(0.0, 0.0)


def build_sigma_n(n: int, m_target: int, fext: FextModelParams, rng) -> ChannelRealization:
    """Draw ``Sigma_n``: base couplings scaled by ``sqrt((M-1)/(n-1))``, unit direct gains."""
    if n < 2 or m_target < 2:
        raise InvalidDimensionError("n and m_target must be >= 2")
    base = generate_realization(_UNIT_DIRECT, fext, n, rng)
    scale = math.sqrt((m_target - 1) / (n - 1))
    return ChannelRealization(base.d, base.q * scale)


def gamma_tilde(realization: ChannelRealization, xi: float) -> float:
    """``(1/n) tr[(Sigma^H Sigma + I/xi)^{-1}]``; ``xi = inf`` drops the regularizer."""
    if not xi > 0:
        raise ValueError("xi must be > 0")
    reg = None if math.isinf(xi) else 1.0 / xi
    diag, _ = inverse_gram_diagonal(realization.h, reg)
    return float(np.mean(diag))


def _gamma_det(sigma2: float, xi: float) -> float:
    return gamma_deterministic(sigma2, xi).gamma_o


def convergence_experiment(spec: SequenceSpec, xi: float, trials: int = DEFAULT_TRIALS,
                           seed: int = 0, threads: int | None = None) -> list[tuple[int, EnsembleStats]]:
    """Ensemble of ``gamma_tilde`` at each sequence size ``n``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    gdet = _gamma_det(spec.sigma2, xi)

    def task(key):
        n, trial = key
        rng = RngSpec(seed, trial, (STREAM_CONVERGENCE, n))
        return gamma_tilde(build_sigma_n(n, spec.m_target, spec.base_fext, rng), xi)

    keys = [(n, k) for n in spec.n_values for k in range(trials)]
    values = ordered_map(task, keys, threads)
    out = []
    for i, n in enumerate(spec.n_values):
        out.append((n, EnsembleStats.from_samples(values[i * trials:(i + 1) * trials], gdet)))
    return out


@dataclass(frozen=True)
class ScatterRow:
    canceler: Canceler
    m: int
    sigma2: float
    gamma_det: float
    gamma_emp: float


def scatter_experiment(m_values: Sequence[int], sigma2_grid: Sequence[float], eta_db: float,
                       trials: int = DEFAULT_TRIALS, seed: int = 0, sigma_db: float = 2.0,
                       threads: int | None = None) -> list[ScatterRow]:
    """Deterministic vs. averaged SNR loss, paired ZF/MMSE on the same draws."""
    if not m_values or not sigma2_grid:
        raise ValueError("grids must be nonempty")
    eta = 10.0 ** (eta_db / 10.0)
    rows = []
    for m in m_values:
        for k, s2 in enumerate(sigma2_grid):
            fext = FextModelParams.calibrated(s2, m, sigma_db)

            def task(trial, m=m, k=k, fext=fext):
                real = build_sigma_n(m, m, fext, RngSpec(seed, trial, (STREAM_SCATTER, m, k)))
                return gamma_tilde(real, math.inf), gamma_tilde(real, eta)

            pairs = ordered_map(task, range(trials), threads)
            zf = RunningStats().extend(p[0] for p in pairs)
            mm = RunningStats().extend(p[1] for p in pairs)
            rows.append(ScatterRow(Canceler.ZF, m, float(s2), _gamma_det(s2, math.inf), zf.mean))
            rows.append(ScatterRow(Canceler.MMSE, m, float(s2), _gamma_det(s2, eta), mm.mean))
    return rows
