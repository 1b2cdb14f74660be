"""DMT link budget: per-tone SINR to bits, aggregate rate, rate-reach sweeps."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .asymptotics import asymptotic_sinr
from .cancelers import COND_LIMIT, Canceler, inverse_gram_diagonal
from .channel import ChannelScenario, DirectModelParams, RngSpec, coupling_lengths, direct_gain, normalized_coupling
from .errors import ConfigError, InvalidDimensionError, OutOfBandError
from .montecarlo import ordered_map

log = logging.getLogger(__name__)

STREAM_LINK = 3
# SW-SNR below this is treated as a dead tone (avoids 1/eta overflow)
_ETA_FLOOR = 1e-30

STANDARD_PSD_MASK = ((30e6, -65.0), (106e6, -76.0), (math.inf, -79.0))


class Source(str, enum.Enum):
    EXACT_MC = "EXACT_MC"
    ASYMPTOTIC = "ASYMPTOTIC"
    SINGLE_WIRE = "SINGLE_WIRE"


class SweepMode(str, enum.Enum):
    EXACT_MC = "EXACT_MC"
    ASYMPTOTIC = "ASYMPTOTIC"
    BOTH = "BOTH"


@dataclass(frozen=True)
class BandPlan:
    tone_spacing_hz: float
    f_start_hz: float
    f_stop_hz: float
    psd_mask: tuple = STANDARD_PSD_MASK
    noise_psd_dbm_hz: float = -140.0
    margin_db: float = 6.0
    coding_gain_db: float = 5.0
    shannon_gap_db: float = 9.75
    bit_cap: int = 12

    def __post_init__(self):
        if not self.tone_spacing_hz > 0:
            raise ValueError("tone_spacing_hz must be > 0")
        if not self.f_stop_hz > self.f_start_hz >= 0:
            raise ValueError("need 0 <= f_start_hz < f_stop_hz")
        mask = tuple((float(f), float(p)) for f, p in self.psd_mask)
        if not mask or any(b[0] <= a[0] for a, b in zip(mask, mask[1:])):
            raise ValueError("psd_mask breakpoints must be strictly increasing")
        if not int(self.bit_cap) > 0:
            raise ValueError("bit_cap must be > 0")
        object.__setattr__(self, "psd_mask", mask)

    @property
    def n_tones(self) -> int:
        return int(math.floor((self.f_stop_hz - self.f_start_hz) / self.tone_spacing_hz + 1e-9))

    def tone_frequencies(self) -> np.ndarray:
        return self.f_start_hz + (np.arange(self.n_tones) + 0.5) * self.tone_spacing_hz

    def psd_dbm_hz(self, frequency_hz):
        """Mask level; a breakpoint frequency belongs to the segment it closes."""
        f = np.asarray(frequency_hz, dtype=float)
        uppers = np.array([u for u, _ in self.psd_mask])
        levels = np.array([p for _, p in self.psd_mask])
        idx = np.searchsorted(uppers, f, side="left")
        if np.any(idx >= len(uppers)):
            raise OutOfBandError("frequency above the last PSD mask breakpoint")
        out = levels[idx]
        return float(out) if out.ndim == 0 else out

    @classmethod
    def preset(cls, name: str) -> "BandPlan":
        try:
            return PRESETS[name.lower()]
        except KeyError:
            raise ConfigError("plan", f"unknown preset {name!r}") from None

    @classmethod
    def from_mapping(cls, data, prefix: str = "plan") -> "BandPlan":
        if isinstance(data, str):
            return cls.preset(data)
        data = dict(data)
        base = cls.preset(data.pop("preset", "gfast212"))
        fields = {f: getattr(base, f) for f in base.__dataclass_fields__}
        for key, value in data.items():
            if key not in fields:
                raise ConfigError(f"{prefix}.{key}", "unknown key")
            if key == "psd_mask":
                try:
                    value = tuple((float(f), float(p)) for f, p in value)
                except (TypeError, ValueError):
                    raise ConfigError(f"{prefix}.psd_mask", "expected [[f_upper_hz, psd_dbm_hz], ...]") from None
            elif key == "bit_cap":
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"{prefix}.bit_cap", f"expected integer, got {value!r}")
            elif isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{prefix}.{key}", f"expected number, got {value!r}")
            fields[key] = value
        try:
            return cls(**fields)
        except ValueError as exc:
            raise ConfigError(prefix, str(exc)) from None


PRESETS = {
    "vdsl30": BandPlan(4312.5, 138e3, 30e6, bit_cap=15),
    "gfast106": BandPlan(51.75e3, 2e6, 106e6, bit_cap=12),
    "gfast212": BandPlan(51.75e3, 2e6, 212e6, bit_cap=12),
}


class EffectiveGap(NamedTuple):
    linear: float
    clamped: bool


def effective_gap(plan: BandPlan) -> EffectiveGap:
    """``Gamma_eff[dB] = gap + margin - coding gain``, floored at 0 dB."""
    db = plan.shannon_gap_db + plan.margin_db - plan.coding_gain_db
    if db < 0:
        return EffectiveGap(1.0, True)
    return EffectiveGap(10.0 ** (db / 10.0), False)


def bits_per_tone(sinr_linear, plan: BandPlan):
    """``min(bit_cap, log2(1 + sinr/Gamma_eff))``, never negative."""
    gap = effective_gap(plan).linear
    s = np.maximum(np.asarray(sinr_linear, dtype=float), 0.0)
    out = np.minimum(float(plan.bit_cap), np.log2(1.0 + s / gap))
    return float(out) if out.ndim == 0 else out


def tone_sw_snr(plan: BandPlan, direct: DirectModelParams, frequency_hz):
    """Single-wire SNR ``10^((PSD - noise)/10) |d(f)|^2`` at in-band frequencies."""
    f = np.asarray(frequency_hz, dtype=float)
    if np.any(f < plan.f_start_hz) or np.any(f > plan.f_stop_hz):
        raise OutOfBandError(f"frequency outside [{plan.f_start_hz}, {plan.f_stop_hz}] Hz")
    snr_db = np.asarray(plan.psd_dbm_hz(f)) - plan.noise_psd_dbm_hz
    g = np.abs(np.asarray(direct_gain(direct, f if f.ndim else float(f)))) ** 2
    out = 10.0 ** (snr_db / 10.0) * g
    return float(out) if out.ndim == 0 else out


def aggregate_rate(per_tone_bits: Sequence[float], plan: BandPlan) -> float:
    """Bits/second: tone spacing times the (exactly rounded) sum of bits."""
    bits = np.asarray(per_tone_bits, dtype=float).ravel()
    if bits.size != plan.n_tones:
        raise InvalidDimensionError(f"expected {plan.n_tones} tones, got {bits.size}")
    return plan.tone_spacing_hz * math.fsum(bits)


@dataclass(frozen=True)
class RateReachPoint:
    loop_length_m: float
    rate_bps: float
    canceler_kind: Canceler | None
    source: Source


def _per_user_eta(scenario: ChannelScenario, plan: BandPlan, freqs) -> np.ndarray:
    """``(tones, users)`` single-wire SNR."""
    return np.stack([tone_sw_snr(plan, p, freqs) for p in scenario.direct_params()], axis=1)


def _sigma2_per_tone(scenario: ChannelScenario, freqs) -> np.ndarray:
    # E|q|^2 scales with f^2, so evaluate once at 1 Hz
    return scenario.sigma2(1.0) * freqs ** 2


def _asymptotic_bits(eta, sigma2, plan):
    out = {}
    for kind in Canceler:
        sinr = asymptotic_sinr(np.maximum(eta, _ETA_FLOOR), sigma2[:, None], kind)
        sinr = np.where(eta > _ETA_FLOOR, sinr, 0.0)
        out[kind] = bits_per_tone(sinr, plan).mean(axis=1)
    return out


def _trial_variates(seed: int, trial: int, n_tones: int, m: int, sigma_db: float):
    gen = RngSpec(seed, trial, (STREAM_LINK,)).generator()
    z = gen.standard_normal((n_tones, m, m))
    u = gen.random((n_tones, m, m))
    return normalized_coupling(z, u, sigma_db)


def _exact_bits(scenario, plan, freqs, eta, base):
    """Per-tone user-mean bits for one trial's couplings ``base``."""
    m = scenario.users
    lengths = coupling_lengths(scenario.loop_length_m)
    scale = scenario.k_fext * freqs[:, None, None] * np.sqrt(lengths)[None, :, :]
    h = base * scale
    idx = np.arange(m)
    h[:, idx, idx] = 1.0
    alive = eta > _ETA_FLOOR
    eta_c = np.maximum(eta, _ETA_FLOOR)

    gamma_zf, cond = inverse_gram_diagonal(h, cond_limit=math.inf)
    ok = np.isfinite(cond) & (cond <= COND_LIMIT)
    if not ok.all():
        log.warning("ZF: %d tone(s) numerically singular, counted as zero rate", int((~ok).sum()))
    sinr_zf = np.where(ok[:, None] & alive, eta_c / gamma_zf, 0.0)

    gamma_mm, _ = inverse_gram_diagonal(h, 1.0 / eta_c)
    sinr_mm = np.where(alive, np.maximum(eta_c / gamma_mm - 1.0, 0.0), 0.0)
    return {Canceler.ZF: bits_per_tone(sinr_zf, plan).mean(axis=1),
            Canceler.MMSE: bits_per_tone(sinr_mm, plan).mean(axis=1)}


def tone_bits(scenario: ChannelScenario, plan: BandPlan, trials: int, mode: SweepMode | str = SweepMode.BOTH,
              seed: int | None = None, threads: int | None = None) -> dict:
    """Per-tone bits averaged over users (and trials for the exact path).

    Returns ``{(canceler, source): array}`` with ``canceler=None`` for the
    single-wire reference. Exact trials reuse the same standard variates for
    every scenario with the same seed (common random numbers across lengths).
    """
    mode = SweepMode(mode)
    seed = scenario.seed if seed is None else seed
    freqs = plan.tone_frequencies()
    eta = _per_user_eta(scenario, plan, freqs)
    sigma2 = _sigma2_per_tone(scenario, freqs)
    out = {(None, Source.SINGLE_WIRE): bits_per_tone(eta, plan).mean(axis=1)}
    if mode in (SweepMode.ASYMPTOTIC, SweepMode.BOTH):
        for kind, bits in _asymptotic_bits(eta, sigma2, plan).items():
            out[(kind, Source.ASYMPTOTIC)] = bits
    if mode in (SweepMode.EXACT_MC, SweepMode.BOTH):
        if trials < 1:
            raise ValueError("trials must be >= 1")

        def task(trial):
            base = _trial_variates(seed, trial, len(freqs), scenario.users, scenario.sigma_db)
            return _exact_bits(scenario, plan, freqs, eta, base)

        per_trial = ordered_map(task, range(trials), threads)
        for kind in Canceler:
            out[(kind, Source.EXACT_MC)] = np.mean([r[kind] for r in per_trial], axis=0)
    return out


def rate_reach_sweep(lengths_m: Sequence[float], scenario: ChannelScenario, plan: BandPlan, trials: int,
                     mode: SweepMode | str = SweepMode.BOTH, seed: int | None = None,
                     threads: int | None = None, include_single_wire: bool = False) -> list[RateReachPoint]:
    """Mean per-user rate at each equal loop length."""
    if not len(lengths_m):
        raise ValueError("lengths_m must be nonempty")
    points = []
    for length in lengths_m:
        bits = tone_bits(scenario.with_length(length), plan, trials, mode, seed, threads)
        for (kind, source), b in bits.items():
            if source is Source.SINGLE_WIRE and not include_single_wire:
                continue
            points.append(RateReachPoint(float(length), aggregate_rate(b, plan), kind, source))
    return points
