"""Stochastic wireline channel model.

The channel matrix is factored as ``H_c = (I + Q) D``: ``D`` holds the
deterministic direct gains ``exp(-l r)`` and ``Q`` the normalized FEXT
couplings ``q_ij = K f sqrt(l_ij) 10^(-chi/20) exp(j phi)`` with
``chi ~ N(2.33 sigma_dB, sigma_dB^2)`` in dB and uniform phase.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Any, Mapping, Sequence

import numpy as np

from .errors import ConfigError, InvalidDimensionError

# chi(f) mean as a multiple of its dB standard deviation
MEAN_DB_PER_SIGMA_DB = 2.33
# 24 AWG FEXT constant, SI units (f in Hz, l in m)
K_FEXT_24AWG = 1.59e-10

_LN10_OVER_10 = math.log(10.0) / 10.0

# Synthetic 0.5 mm (CAD55-like) attenuation: 2 sqrt(f_MHz) + 0.02 f_MHz dB per
# 100 m, tabulated in Np/m. Not a measured cable table.
_CAD55_F_MHZ = np.array([0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 50.0, 70.0,
                         106.0, 150.0, 212.0, 300.0])
CAD55_LIKE_ATTENUATION = tuple(
    (float(f * 1e6), float((2.0 * math.sqrt(f) + 0.02 * f) / (20.0 * math.log10(math.e)) / 100.0))
    for f in _CAD55_F_MHZ
)


def _as_table(att) -> tuple[tuple[float, float], ...] | float:
    if np.ndim(att) == 0:
        r = float(att)
        if not r >= 0.0:
            raise ValueError(f"attenuation must be >= 0, got {r}")
        return r
    table = np.asarray(att, dtype=float)
    if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 1:
        raise ValueError("attenuation table must be a list of [f_hz, r_per_m] pairs")
    if np.any(np.diff(table[:, 0]) <= 0):
        raise ValueError("attenuation table frequencies must be strictly increasing")
    if np.any(table[:, 1] < 0):
        raise ValueError("attenuation table values must be >= 0")
    return tuple((float(f), float(r)) for f, r in table)


@dataclass(frozen=True)
class DirectModelParams:
    """Direct-path model ``exp(-l r(f))``.

    ``attenuation_per_m`` is either a scalar ``r`` (Np/m) or a table of
    ``(f_hz, r_per_m)`` pairs interpolated linearly in frequency (clamped at
    the ends).
    """

    loop_length_m: float
    attenuation_per_m: Any = 0.0

    def __post_init__(self):
        if not self.loop_length_m >= 0.0:
            raise ValueError(f"loop_length_m must be >= 0, got {self.loop_length_m}")
        object.__setattr__(self, "attenuation_per_m", _as_table(self.attenuation_per_m))

    def attenuation_at(self, frequency_hz=None):
        att = self.attenuation_per_m
        if isinstance(att, float):
            if frequency_hz is None or np.ndim(frequency_hz) == 0:
                return att
            return np.full(np.shape(frequency_hz), att)
        if frequency_hz is None:
            raise ValueError("a frequency is required with a tabulated attenuation")
        f, r = np.array(att).T
        out = np.interp(frequency_hz, f, r)
        return float(out) if np.ndim(out) == 0 else out


def direct_gain(params: DirectModelParams, frequency_hz=None):
    """Direct gain ``exp(-l r(f))`` with zero phase (complex)."""
    r = params.attenuation_at(frequency_hz)
    g = np.exp(-params.loop_length_m * np.asarray(r, dtype=float)).astype(complex)
    return complex(g) if g.ndim == 0 else g


@dataclass(frozen=True)
class FextModelParams:
    """Log-normal FEXT model parameters.

    ``coupling_length_m`` may be a scalar (equal-length binder), an ``m x m``
    matrix of pairwise lengths, or ``None`` to derive ``min(l_i, l_j)`` from
    the direct-path loop lengths at generation time. ``k_fext`` absorbs all
    unit conversion for SI inputs (Hz, m).
    """

    k_fext: float
    sigma_db: float
    coupling_length_m: Any = 1.0
    frequency_hz: float = 1.0

    def __post_init__(self):
        if not self.k_fext >= 0.0:
            raise ValueError("k_fext must be >= 0")
        if not self.sigma_db >= 0.0:
            raise ValueError("sigma_db must be >= 0")
        if not self.frequency_hz >= 0.0:
            raise ValueError("frequency_hz must be >= 0")
        lengths = self.coupling_length_m
        if lengths is not None:
            arr = np.asarray(lengths, dtype=float)
            if np.any(arr < 0):
                raise ValueError("coupling lengths must be >= 0")
            if arr.ndim not in (0, 2):
                raise ValueError("coupling_length_m must be a scalar or a square matrix")
            if arr.ndim == 2:
                arr = arr.copy()
                arr.setflags(write=False)
                object.__setattr__(self, "coupling_length_m", arr)

    @property
    def mean_db(self) -> float:
        return MEAN_DB_PER_SIGMA_DB * self.sigma_db

    def lognormal_power_factor(self) -> float:
        """``E[10^(-chi/10)]`` for ``chi ~ N(mean_db, sigma_db^2)``."""
        a = _LN10_OVER_10
        return math.exp(-a * self.mean_db + 0.5 * (a * self.sigma_db) ** 2)

    def mean_power(self, coupling_length_m=None):
        """``E|q_ij|^2`` for the given pairwise length(s)."""
        if coupling_length_m is None:
            coupling_length_m = self.coupling_length_m
        l = np.asarray(coupling_length_m, dtype=float)
        out = (self.k_fext * self.frequency_hz) ** 2 * l * self.lognormal_power_factor()
        return float(out) if out.ndim == 0 else out

    def at_frequency(self, frequency_hz: float) -> "FextModelParams":
        return FextModelParams(self.k_fext, self.sigma_db, self.coupling_length_m, frequency_hz)

    @classmethod
    def calibrated(cls, sigma2: float, m: int, sigma_db: float = 2.0,
                   coupling_length_m: float = 1.0, frequency_hz: float = 1.0) -> "FextModelParams":
        """Parameters whose total FEXT power ``(m-1) E|q|^2`` equals ``sigma2``."""
        if m < 2:
            raise InvalidDimensionError("m must be >= 2")
        probe = cls(1.0, sigma_db, coupling_length_m, frequency_hz)
        k = math.sqrt(sigma2 / ((m - 1) * probe.mean_power()))
        return cls(k, sigma_db, coupling_length_m, frequency_hz)


@dataclass(frozen=True)
class RngSpec:
    """Seed plus trial index; ``stream`` tags independent experiment streams."""

    seed: int
    trial_index: int = 0
    stream: tuple = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.trial_index), *map(int, self.stream)))
        return np.random.Generator(np.random.Philox(ss))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngSpec):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be an RngSpec or numpy Generator")


def normalized_coupling(z, u, sigma_db: float):
    """Unit-scale coupling ``10^(-chi/20) exp(j 2 pi u)`` from standard variates."""
    chi = MEAN_DB_PER_SIGMA_DB * sigma_db + sigma_db * np.asarray(z)
    return 10.0 ** (-0.05 * chi) * np.exp(2j * np.pi * np.asarray(u))


def draw_fext_coupling(params: FextModelParams, rng) -> complex:
    """One normalized coupling ``q_ij`` (already divided by the disturber's direct gain)."""
    if np.ndim(params.coupling_length_m) != 0:
        raise ValueError("draw_fext_coupling needs a scalar coupling length")
    gen = _as_generator(rng)
    z = gen.standard_normal()
    u = gen.random()
    scale = params.k_fext * params.frequency_hz * math.sqrt(float(params.coupling_length_m))
    return complex(scale * normalized_coupling(z, u, params.sigma_db))


def draw_fext_couplings(params: FextModelParams, size, rng) -> np.ndarray:
    """Vector of i.i.d. couplings with a scalar coupling length."""
    gen = _as_generator(rng)
    z = gen.standard_normal(size)
    u = gen.random(size)
    scale = params.k_fext * params.frequency_hz * math.sqrt(float(params.coupling_length_m))
    return scale * normalized_coupling(z, u, params.sigma_db)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Immutable ``(d, Q)`` pair; ``H = I + Q`` and ``H_c = H D``."""

    d: np.ndarray
    q: np.ndarray
    m: int = field(init=False)

    def __post_init__(self):
        d = np.array(self.d, dtype=complex).ravel()
        q = np.array(self.q, dtype=complex)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] != d.size:
            raise InvalidDimensionError(f"q must be {d.size}x{d.size}, got {q.shape}")
        if d.size < 1:
            raise InvalidDimensionError("empty channel")
        np.fill_diagonal(q, 0.0)
        d.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "m", d.size)

    @property
    def h(self) -> np.ndarray:
        return np.eye(self.m) + self.q

    @property
    def hc(self) -> np.ndarray:
        return self.h * self.d[np.newaxis, :]

    def fext_power_per_user(self) -> np.ndarray:
        """Realized ``sum_j |q_ij|^2`` for each receiver row."""
        return np.sum(np.abs(self.q) ** 2, axis=1)


def _loop_lengths(direct, m):
    if isinstance(direct, DirectModelParams):
        return [direct] * m
    direct = list(direct)
    if len(direct) != m:
        raise InvalidDimensionError(f"need {m} direct-path models, got {len(direct)}")
    return direct


def coupling_lengths(loop_lengths_m: Sequence[float]) -> np.ndarray:
    """Pairwise coupling lengths ``min(l_i, l_j)``."""
    l = np.asarray(loop_lengths_m, dtype=float)
    return np.minimum.outer(l, l)


def _pair_lengths(fext: FextModelParams, directs, m):
    lengths = fext.coupling_length_m
    if lengths is None:
        return coupling_lengths([p.loop_length_m for p in directs])
    lengths = np.asarray(lengths, dtype=float)
    if lengths.ndim == 0:
        return np.full((m, m), float(lengths))
    if lengths.shape != (m, m):
        raise InvalidDimensionError(f"coupling length matrix must be {m}x{m}")
    return lengths


def generate_realization(direct, fext: FextModelParams, m: int, rng) -> ChannelRealization:
    """Draw one ``m``-user channel at ``fext.frequency_hz``.

    ``direct`` is one :class:`DirectModelParams` shared by all users or a
    sequence of ``m`` of them. Off-diagonal ``q_ij`` are independent draws;
    entries are consumed row-major from a single stream per ``rng``.
    """
    if m < 2:
        raise InvalidDimensionError(f"m must be >= 2, got {m}")
    directs = _loop_lengths(direct, m)
    gen = _as_generator(rng)
    z = gen.standard_normal((m, m))
    u = gen.random((m, m))
    lengths = _pair_lengths(fext, directs, m)
    q = fext.k_fext * fext.frequency_hz * np.sqrt(lengths) * normalized_coupling(z, u, fext.sigma_db)
    d = np.array([direct_gain(p, fext.frequency_hz) for p in directs])
    return ChannelRealization(d, q)


def sigma_total(fext: FextModelParams, m: int, loop_lengths_m: Sequence[float] | None = None) -> float:
    """Total average FEXT power per user ``(m-1) E|q_ij|^2`` in closed form.

    With heterogeneous coupling lengths this is the user-averaged row sum of
    ``E|q_ij|^2``.
    """
    if m < 2:
        raise InvalidDimensionError(f"m must be >= 2, got {m}")
    lengths = fext.coupling_length_m
    if lengths is None:
        if loop_lengths_m is None:
            raise ValueError("loop lengths are needed when coupling_length_m is None")
        lengths = coupling_lengths(loop_lengths_m)
    lengths = np.asarray(lengths, dtype=float)
    if lengths.ndim == 0:
        return (m - 1) * fext.mean_power(float(lengths))
    off = ~np.eye(m, dtype=bool)
    return float(np.sum(fext.mean_power(lengths)[off]) / m)


def write_realization_csv(realization: ChannelRealization, fh: IO[str]) -> None:
    """Dump ``H_c`` entries as ``i,j,re,im`` rows."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["i", "j", "re", "im"])
    hc = realization.hc
    for i in range(realization.m):
        for j in range(realization.m):
            w.writerow([i, j, repr(float(hc[i, j].real)), repr(float(hc[i, j].imag))])


# --------------------------------------------------------------------------
# scenario config
# --------------------------------------------------------------------------

SCENARIO_KEYS = ("users", "loop_length_m", "attenuation", "k_fext", "sigma_db", "seed")


@dataclass(frozen=True)
class ChannelScenario:
    """A binder description as read from a scenario config."""

    users: int
    loop_length_m: tuple
    attenuation: Any = CAD55_LIKE_ATTENUATION
    k_fext: float = K_FEXT_24AWG
    sigma_db: float = 2.0
    seed: int = 0

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], prefix: str = "channel") -> "ChannelScenario":
        for key in data:
            if key not in SCENARIO_KEYS:
                raise ConfigError(f"{prefix}.{key}", "unknown key")
        if "users" not in data:
            raise ConfigError(f"{prefix}.users", "required")
        users = _typed(data["users"], int, f"{prefix}.users")
        if users < 2:
            raise ConfigError(f"{prefix}.users", "must be >= 2")
        raw_len = data.get("loop_length_m", 100.0)
        if isinstance(raw_len, (list, tuple)):
            lengths = tuple(_typed(v, float, f"{prefix}.loop_length_m") for v in raw_len)
            if len(lengths) != users:
                raise ConfigError(f"{prefix}.loop_length_m", f"list must have {users} entries")
        else:
            lengths = (_typed(raw_len, float, f"{prefix}.loop_length_m"),) * users
        if any(v < 0 for v in lengths):
            raise ConfigError(f"{prefix}.loop_length_m", "must be >= 0")
        att = data.get("attenuation", CAD55_LIKE_ATTENUATION)
        if isinstance(att, Mapping):
            unknown = set(att) - {"r_per_m", "table"}
            if unknown:
                raise ConfigError(f"{prefix}.attenuation.{sorted(unknown)[0]}", "unknown key")
            att = att.get("r_per_m", att.get("table"))
        if isinstance(att, str):
            if att.lower() not in ("cad55", "cad55_like"):
                raise ConfigError(f"{prefix}.attenuation", f"unknown preset {att!r}")
            att = CAD55_LIKE_ATTENUATION
        try:
            att = _as_table(att)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{prefix}.attenuation", str(exc)) from None
        k = _typed(data.get("k_fext", K_FEXT_24AWG), float, f"{prefix}.k_fext")
        s = _typed(data.get("sigma_db", 2.0), float, f"{prefix}.sigma_db")
        if k < 0:
            raise ConfigError(f"{prefix}.k_fext", "must be >= 0")
        if s < 0:
            raise ConfigError(f"{prefix}.sigma_db", "must be >= 0")
        seed = _typed(data.get("seed", 0), int, f"{prefix}.seed")
        return cls(users, lengths, att, k, s, seed)

    def with_length(self, length_m: float) -> "ChannelScenario":
        return ChannelScenario(self.users, (float(length_m),) * self.users, self.attenuation,
                               self.k_fext, self.sigma_db, self.seed)

    def direct_params(self) -> list[DirectModelParams]:
        return [DirectModelParams(l, self.attenuation) for l in self.loop_length_m]

    def fext_params(self, frequency_hz: float = 1.0) -> FextModelParams:
        lengths = self.loop_length_m
        coupling = lengths[0] if len(set(lengths)) == 1 else None
        return FextModelParams(self.k_fext, self.sigma_db, coupling, frequency_hz)

    def sigma2(self, frequency_hz: float) -> float:
        return sigma_total(self.fext_params(frequency_hz), self.users, self.loop_length_m)


def _typed(value, kind, key):
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(key, f"expected integer, got {value!r}")
        return int(value)
    if isinstance(value, bool) or not isinstance(value, (int, float, np.number)):
        raise ConfigError(key, f"expected number, got {value!r}")
    return float(value)
