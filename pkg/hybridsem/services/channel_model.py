import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from hybridsem.errors import ConfigError, DomainError
from hybridsem.schemas import (
    GAIN_FLOOR,
    NOISE_PSD_DBM_HZ,
    SPEED_OF_LIGHT,
    TOTAL_BANDWIDTH_HZ,
    ChannelRealization,
)

SeedLike = int | np.random.SeedSequence | None


def db_to_linear(x_db):
    out = np.power(10.0, np.asarray(x_db, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


def linear_to_db(x):
    out = 10.0 * np.log10(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def dbm_to_watt(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def noise_power(noise_psd: float, bandwidth: float) -> float:
    """N0*W [W]"""
    return noise_psd * bandwidth


def path_loss(f_c: float, R: float, nu: float) -> float:
    """l_p = (λ_c / 4πR)^ν with λ_c = c/f_c."""
    if not (f_c > 0 and R > 0):
        raise DomainError(f"path_loss needs f_c > 0 and R > 0 (f_c={f_c}, R={R})")
    if not nu >= 1:
        raise DomainError(f"path-loss exponent must be >= 1: {nu}")
    ratio = SPEED_OF_LIGHT / f_c / (4.0 * math.pi * R)
    return ratio ** nu


def sample_gains(L: int, l_p: float, rng: np.random.Generator) -> np.ndarray:
    # |h|^2 for h ~ CN(0, l_p): exponential with mean l_p
    re_im = rng.standard_normal((L, 2))
    gains = 0.5 * l_p * (re_im ** 2).sum(axis=1)
    return np.maximum(gains, GAIN_FLOOR)


def sample_channels(L: int,
                    l_p: float,
                    rng_seed: SeedLike = 0,
                    bandwidth: float | None = None,
                    noise_psd: float | None = None) -> ChannelRealization:
    """One Rayleigh realization; W defaults to W_tot/L, N0 to -174 dBm/Hz."""
    if L < 1:
        raise DomainError(f"L must be >= 1: {L}")
    if not l_p > 0:
        raise DomainError(f"mean gain must be positive: {l_p}")
    rng = np.random.default_rng(rng_seed)
    gains = sample_gains(L, l_p, rng)
    return ChannelRealization(
        gains=tuple(float(g) for g in gains),
        bandwidth=bandwidth if bandwidth is not None else TOTAL_BANDWIDTH_HZ / L,
        noise_psd=noise_psd if noise_psd is not None else dbm_to_watt(NOISE_PSD_DBM_HZ),
        mean_gain=l_p,
    )


def average_received_snr(p_tot: float, mean_gain: float, noise_psd: float, bandwidth: float) -> float:
    """P_tot E[|h|^2] / (N0 W), linear."""
    for name, v in (("P_tot", p_tot), ("mean_gain", mean_gain), ("N0", noise_psd), ("W", bandwidth)):
        if not v > 0:
            raise DomainError(f"{name} must be positive: {v}")
    return p_tot * mean_gain / (noise_psd * bandwidth)


def power_for_snr(snr_db: float, mean_gain: float, noise_psd: float, bandwidth: float) -> float:
    """Inverse of average_received_snr for a target in dB."""
    if not (mean_gain > 0 and noise_psd > 0 and bandwidth > 0):
        raise DomainError("mean_gain, N0 and W must be positive")
    return db_to_linear(snr_db) * noise_psd * bandwidth / mean_gain


def export_channels(realizations: Iterable[ChannelRealization], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for t, ch in enumerate(realizations):
            rec = {"type": "channel", "trial": t, "W": ch.bandwidth, "N0": ch.noise_psd,
                   "l_p": ch.mean_gain, "gains": list(ch.gains)}
            f.write(json.dumps(rec) + "\n")


def import_channels(path: str | Path) -> list[ChannelRealization]:
    out: list[ChannelRealization] = []
    with Path(path).open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(ChannelRealization(gains=tuple(rec["gains"]), bandwidth=rec["W"],
                                              noise_psd=rec["N0"], mean_gain=rec["l_p"]))
            except (json.JSONDecodeError, KeyError, ValueError) as e:
                raise ConfigError(f"{path}:{lineno}: bad channel record ({e})") from e
    return out
