"""類似度モデル

DeepSC の similarity-vs-SNR 特性を k ごとの単調なノット表で近似する。
同梱のデフォルト曲線は合成データ (M_sat·(1 - exp(-(γ_dB - γ0)/τ))) であり、
学習済みネットワークの値ではない。
"""
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml
from pydantic import ValidationError

from hybridsem.errors import ConfigError, DomainError
from hybridsem.schemas import M_SAT, SYMBOLS_PER_WORD, SimilarityCurve

# 二分探索の許容幅 [dB]
SNR_TOL_DB = 1e-6

# 合成曲線の形状: k が大きいほど低 SNR で飽和する
CURVE_TAU_DB = 10.0
CURVE_GAMMA0_K16_DB = -12.0
CURVE_GAMMA0_SLOPE_DB = 0.5
CURVE_STEP_DB = 0.5
CURVE_SPAN_DB = 30.0


def curve_offset_db(k: int) -> float:
    return CURVE_GAMMA0_K16_DB - CURVE_GAMMA0_SLOPE_DB * (k - SYMBOLS_PER_WORD)


def default_curve(k: int = SYMBOLS_PER_WORD, m_sat: float = M_SAT) -> SimilarityCurve:
    """Synthetic knot table for k; the last knot is pinned to m_sat."""
    if k < 1:
        raise DomainError(f"k must be a positive integer: {k}")
    gamma0 = curve_offset_db(k)
    snr = gamma0 + np.arange(1, int(CURVE_SPAN_DB / CURVE_STEP_DB) + 1) * CURVE_STEP_DB
    sim = m_sat * (1.0 - np.exp(-(snr - gamma0) / CURVE_TAU_DB))
    sim[-1] = m_sat
    points = tuple((round(float(x), 6), float(y)) for x, y in zip(snr, sim))
    return SimilarityCurve(k=k, points=points, m_sat=m_sat)


def similarity_at(curve: SimilarityCurve, snr_db):
    """Piecewise-linear interpolation, clamped outside the table."""
    out = np.interp(snr_db, curve.snr_knots(), curve.similarity_knots())
    return float(out) if np.ndim(out) == 0 else out


def required_snr_many(curve: SimilarityCurve, thresholds) -> np.ndarray:
    """Vectorised inverse: smallest SNR[dB] reaching each threshold, NaN if above M_sat."""
    m = np.atleast_1d(np.asarray(thresholds, dtype=float))
    if np.any(~(m > 0.0)):
        raise DomainError(f"similarity thresholds must be > 0: min={m.min()}")
    if np.any(m > 1.0):
        raise DomainError(f"similarity thresholds must be <= 1: max={m.max()}")
    xs, ys = curve.snr_knots(), curve.similarity_knots()
    out = np.full(m.shape, np.nan)
    feasible = m <= curve.m_sat
    clamp = feasible & (m <= ys[0])
    out[clamp] = xs[0]
    todo = feasible & ~clamp
    if np.any(todo):
        target = m[todo]
        lo = np.full(target.shape, xs[0])
        hi = np.full(target.shape, xs[-1])
        # 不変条件: sim(lo) < target <= sim(hi)
        while np.any(hi - lo > SNR_TOL_DB):
            mid = 0.5 * (lo + hi)
            ok = np.interp(mid, xs, ys) >= target
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
        out[todo] = hi
    return out


def required_snr(curve: SimilarityCurve, m_th: float) -> float | None:
    """None means Infeasible (m_th > M_sat)."""
    v = required_snr_many(curve, [m_th])[0]
    return None if math.isnan(v) else float(v)


def sentence_snr_thresholds(curve: SimilarityCurve, thresholds) -> np.ndarray:
    """γ_th per sentence [dB]; padding (threshold 0) maps to the lowest knot."""
    m = np.asarray(thresholds, dtype=float)
    out = np.full(m.shape, curve.snr_knots()[0])
    real = m > 0
    if np.any(real):
        out[real] = required_snr_many(curve, m[real])
    return out


def subcarrier_gamma_many(curve: SimilarityCurve, m_max) -> np.ndarray:
    """Linear γ_l^max per subcarrier, +inf where semantic mode is infeasible."""
    db = sentence_snr_thresholds(curve, m_max)
    return np.where(np.isnan(db), np.inf, np.power(10.0, db / 10.0))


def subcarrier_threshold(thresholds: Sequence[float], curve: SimilarityCurve) -> tuple[float, float | None]:
    """(M_l^max, γ_l^max linear or None) for one subcarrier's sentences."""
    values = np.asarray(thresholds, dtype=float)
    if values.size == 0:
        raise DomainError("subcarrier slice is empty")
    m_max = float(values.max())
    gamma = float(subcarrier_gamma_many(curve, [m_max])[0])
    return m_max, (None if math.isinf(gamma) else gamma)


def load_curves(path: str | Path) -> dict[int, SimilarityCurve]:
    """YAML: `curves: [{k, m_sat, points: [[snr_dB, sim], ...]}, ...]`"""
    try:
        with Path(path).open("r", encoding="utf-8") as f:
            doc = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read curve file {path}: {e}") from e
    entries = doc.get("curves") if isinstance(doc, dict) else None
    if not isinstance(entries, list) or not entries:
        raise ConfigError(f"{path}: expected a non-empty 'curves' list")
    curves: dict[int, SimilarityCurve] = {}
    for i, entry in enumerate(entries):
        try:
            curve = SimilarityCurve(
                k=entry["k"],
                m_sat=entry.get("m_sat", max(p[1] for p in entry["points"])),
                points=tuple(tuple(p) for p in entry["points"]),
            )
        except (KeyError, TypeError, ValidationError) as e:
            raise ConfigError(f"{path}: curve entry #{i}: {e}") from e
        if curve.k in curves:
            raise ConfigError(f"{path}: duplicate curve for k={curve.k}")
        curves[curve.k] = curve
    return curves


def save_curves(curves: Iterable[SimilarityCurve], path: str | Path) -> None:
    doc = {"curves": [{"k": c.k, "m_sat": c.m_sat, "points": [list(p) for p in c.points]}
                      for c in curves]}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        yaml.safe_dump(doc, f, sort_keys=False, default_flow_style=None)


def curve_for(k: int, path: str | Path | None = None, m_sat: float = M_SAT) -> SimilarityCurve:
    """Curve from file when given, else the synthetic default."""
    if path is None:
        return default_curve(k, m_sat)
    curves = load_curves(path)
    if k not in curves:
        raise ConfigError(f"{path}: no curve for k={k} (available: {sorted(curves)})")
    return curves[k]
