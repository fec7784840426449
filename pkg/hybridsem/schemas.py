import math
from typing import List, Optional, Literal, Tuple

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr, field_validator, model_validator

# 飽和した「無限遅延」。特別値ではなく大きな有限値にして min/argmin を total に保つ
DELAY_INF: float = 1e30
# |h|^2 の下限(アンダーフロー対策)
GAIN_FLOOR: float = 1e-30

SPEED_OF_LIGHT = 3e8
BITS_PER_CHAR = 8

# reference simulation parameters
NOISE_PSD_DBM_HZ = -174.0
TOTAL_BANDWIDTH_HZ = 20e6
CARRIER_FREQ_HZ = 2.4e9
CELL_RADIUS_M = 100.0
PATH_LOSS_EXP = 2.0
SYMBOLS_PER_WORD = 16
M_SAT = 0.98
QOS_RANGE: Tuple[float, float] = (0.6, 1.0)
WORD_RANGE: Tuple[int, int] = (4, 32)
NUM_SUBCARRIERS = 64
NUM_SENTENCES = 7296
CHARS_PER_WORD = 5

Mode = Literal["shannon", "semantic"]
Policy = Literal["sst", "ost"]
ProblemKind = Literal["sum", "minmax"]
Scheme = Literal["hybrid", "shannon"]
Granularity = Literal["sentence", "stream"]
CandidateOrder = Literal["ascending", "descending"]


class Sentence(BaseModel, frozen=True):
    """One sentence S_j of the text task.

    word_count=0 / char_count=0 is the padding sentinel used when P is not
    a multiple of L. threshold=0 means "not sampled yet".
    """

    serial_index: int = Field(ge=1)
    word_count: int = Field(ge=0)
    char_count: int = Field(ge=0)
    threshold: float = Field(default=0.0, ge=0.0, le=1.0)

    @property
    def bits(self) -> int:
        return BITS_PER_CHAR * self.char_count

    def symbols(self, k: int) -> int:
        if k < 1:
            raise ValueError(f"k must be a positive integer: {k}")
        return k * self.word_count

    def is_padding(self) -> bool:
        return self.word_count == 0


class TextPartition(BaseModel):
    """Ordered sentences split over L subcarriers (P = N*L)."""

    sentences: List[Sentence]
    L: int = Field(default=1, ge=1)

    _arrays: Optional[dict] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def _check_division(self):
        if len(self.sentences) % self.L != 0:
            raise ValueError(
                f"P={len(self.sentences)} is not divisible by L={self.L}; use with_subcarriers() to pad")
        for pos, s in enumerate(self.sentences, start=1):
            if s.serial_index != pos:
                raise ValueError(f"sentence at position {pos} has serial index {s.serial_index}")
        return self

    @property
    def P(self) -> int:
        return len(self.sentences)

    @property
    def N(self) -> int:
        return self.P // self.L

    @property
    def real_count(self) -> int:
        return sum(1 for s in self.sentences if not s.is_padding())

    def _cache(self) -> dict:
        if self._arrays is None:
            self._arrays = {
                "words": np.array([s.word_count for s in self.sentences], dtype=np.int64),
                "chars": np.array([s.char_count for s in self.sentences], dtype=np.int64),
                "thresholds": np.array([s.threshold for s in self.sentences], dtype=float),
            }
        return self._arrays

    def word_counts(self) -> np.ndarray:
        return self._cache()["words"].copy()

    def char_counts(self) -> np.ndarray:
        return self._cache()["chars"].copy()

    def thresholds(self) -> np.ndarray:
        return self._cache()["thresholds"].copy()

    def total_bits(self) -> int:
        return int(BITS_PER_CHAR * self._cache()["chars"].sum())

    def with_subcarriers(self, L: int) -> "TextPartition":
        """Re-partition for L subcarriers, padding with zero-length sentinels."""
        if L < 1:
            raise ValueError(f"L must be >= 1: {L}")
        real = [s for s in self.sentences if not s.is_padding()]
        pad = (-len(real)) % L
        pads = [Sentence(serial_index=len(real) + i + 1, word_count=0, char_count=0) for i in range(pad)]
        return TextPartition(sentences=real + pads, L=L)

    def with_thresholds(self, thresholds) -> "TextPartition":
        values = np.asarray(thresholds, dtype=float)
        if values.shape != (self.P,):
            raise ValueError(f"expected {self.P} thresholds, got shape {values.shape}")
        out = [s.model_copy(update={"threshold": 0.0 if s.is_padding() else float(v)})
               for s, v in zip(self.sentences, values)]
        return TextPartition(sentences=out, L=self.L)


class ChannelRealization(BaseModel, frozen=True):
    """Per-subcarrier power gains |h_l|^2 (path loss included)."""

    gains: Tuple[float, ...]
    bandwidth: float = Field(gt=0)    # W [Hz] per subcarrier
    noise_psd: float = Field(gt=0)    # N0 [W/Hz]
    mean_gain: float = Field(gt=0)    # l_p = E[|h|^2]

    @field_validator("gains")
    @classmethod
    def _positive_gains(cls, v):
        if len(v) == 0:
            raise ValueError("at least one subcarrier gain is required")
        for i, g in enumerate(v):
            if not (g > 0 and math.isfinite(g)):
                raise ValueError(f"gain #{i} must be positive and finite: {g}")
        return v

    @property
    def L(self) -> int:
        return len(self.gains)

    def gain_array(self) -> np.ndarray:
        return np.asarray(self.gains, dtype=float)

    @property
    def c(self) -> np.ndarray:
        """c_l = N0 W / |h_l|^2."""
        return self.noise_psd * self.bandwidth / self.gain_array()


class SimilarityCurve(BaseModel, frozen=True):
    """Similarity vs SNR[dB] knot table for one k."""

    k: int = Field(ge=1)
    points: Tuple[Tuple[float, float], ...]
    m_sat: float = Field(gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_knots(self):
        if len(self.points) < 2:
            raise ValueError(f"curve k={self.k}: at least two knots are required")
        errors: list[str] = []
        for i, (snr, sim) in enumerate(self.points):
            if not math.isfinite(snr):
                errors.append(f"knot #{i} ({snr}, {sim}): SNR is not finite")
            if not (0.0 < sim <= 1.0):
                errors.append(f"knot #{i} ({snr}, {sim}): similarity outside (0, 1]")
            if i > 0:
                p_snr, p_sim = self.points[i - 1]
                if snr <= p_snr:
                    errors.append(f"knot #{i} ({snr}, {sim}): SNR not strictly above previous {p_snr}")
                if sim < p_sim:
                    errors.append(f"knot #{i} ({snr}, {sim}): similarity drops below previous {p_sim}")
        top = max(sim for _, sim in self.points)
        if abs(top - self.m_sat) > 1e-12:
            errors.append(f"max similarity {top} differs from m_sat {self.m_sat}")
        if errors:
            raise ValueError(f"curve k={self.k}: " + "; ".join(errors))
        return self

    def snr_knots(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=float)

    def similarity_knots(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=float)


class RateParams(BaseModel, frozen=True):
    bandwidth: float = Field(gt=0)
    gap: float = Field(default=1.0, ge=1.0)
    mode: Mode = "shannon"


class SubcarrierAllocation(BaseModel):
    index: int = Field(ge=1)       # l (1-based)
    power: float = Field(ge=0)
    mode: Mode
    delay: float = Field(ge=0)

    @property
    def a(self) -> int:
        return 1 if self.mode == "shannon" else 0

    @property
    def a_tilde(self) -> int:
        return 1 - self.a


class Assignment(BaseModel):
    """Subcarrier l -> ordered serial indices of its N sentences."""

    policy: Policy
    blocks: List[List[int]]

    @model_validator(mode="after")
    def _check_blocks(self):
        if not self.blocks:
            raise ValueError("assignment has no subcarriers")
        n = len(self.blocks[0])
        seen: set[int] = set()
        for l, block in enumerate(self.blocks, start=1):
            if len(block) != n:
                raise ValueError(f"subcarrier {l} holds {len(block)} sentences, expected {n}")
            for j in block:
                if j in seen:
                    raise ValueError(f"sentence {j} assigned twice")
                seen.add(j)
        if seen != set(range(1, len(seen) + 1)):
            raise ValueError("sentence indices must be exactly 1..P")
        return self

    @property
    def L(self) -> int:
        return len(self.blocks)

    @property
    def N(self) -> int:
        return len(self.blocks[0])

    def groups(self) -> np.ndarray:
        """(L, N) array of 0-based sentence positions."""
        return np.asarray(self.blocks, dtype=np.int64) - 1


class PhysicalParams(BaseModel):
    noise_psd_dbm_hz: float = NOISE_PSD_DBM_HZ
    total_bandwidth_hz: float = Field(default=TOTAL_BANDWIDTH_HZ, gt=0)
    carrier_freq_hz: float = Field(default=CARRIER_FREQ_HZ, gt=0)
    cell_radius_m: float = Field(default=CELL_RADIUS_M, gt=0)
    path_loss_exp: float = Field(default=PATH_LOSS_EXP, ge=1.0)


class ExperimentConfig(BaseModel):
    problem: ProblemKind = "sum"
    scheme: Scheme = "hybrid"
    association: Policy = "sst"
    L: int = Field(default=NUM_SUBCARRIERS, ge=1)
    k: int = Field(default=SYMBOLS_PER_WORD, ge=1)
    snr_points_db: List[float] = Field(default_factory=lambda: [10.0, 15.0, 20.0, 25.0, 30.0, 35.0])
    trials: int = Field(default=50, ge=1)
    qos_trials: int = Field(default=5, ge=1)
    ber: Optional[float] = None      # None -> Γ = 1
    physical: PhysicalParams = Field(default_factory=PhysicalParams)
    num_sentences: int = Field(default=NUM_SENTENCES, ge=1)
    word_range: Tuple[int, int] = WORD_RANGE
    chars_per_word: int = Field(default=CHARS_PER_WORD, ge=1)
    qos_range: Tuple[float, float] = QOS_RANGE
    qos_granularity: Granularity = "stream"
    m_sat: float = Field(default=M_SAT, gt=0.0, le=1.0)
    max_iters: int = Field(default=10, ge=1)
    candidate_order: CandidateOrder = "ascending"
    rng_seed: int = Field(default=0, ge=0)
    curve_path: Optional[str] = None
    workers: int = Field(default=1, ge=1)
    run_id: Optional[str] = None

    @field_validator("snr_points_db")
    @classmethod
    def _finite_snr(cls, v):
        for x in v:
            if not math.isfinite(x):
                raise ValueError(f"SNR point must be finite: {x}")
        return v

    @field_validator("word_range")
    @classmethod
    def _word_range(cls, v):
        lo, hi = v
        if lo < 1 or lo > hi:
            raise ValueError(f"word_range must satisfy 1 <= min <= max: {v}")
        return v

    @field_validator("qos_range")
    @classmethod
    def _qos_range(cls, v):
        lo, hi = v
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError(f"qos_range must satisfy 0 < lo <= hi <= 1: {v}")
        return v

    @field_validator("ber")
    @classmethod
    def _ber(cls, v):
        if v is not None and not (0.0 < v < 0.2):
            raise ValueError(f"ber must lie in (0, 0.2): {v}")
        return v


class SnrPointMetrics(BaseModel):
    snr_db: float
    utilization_pct: float = Field(ge=0.0, le=100.0)
    improvement_pct: float
    mean_delay_s: float
    trials_ok: int = Field(ge=0)
    trials_infeasible: int = Field(ge=0)


class RunMetrics(BaseModel):
    points: List[SnrPointMetrics] = Field(default_factory=list)
    problem: Optional[ProblemKind] = None
    scheme: Optional[Scheme] = None
    association: Optional[Policy] = None

    def column(self, name: str) -> list:
        return [getattr(p, name) for p in self.points]
