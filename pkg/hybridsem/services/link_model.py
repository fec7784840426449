import math
from dataclasses import dataclass, field

import numpy as np

from hybridsem.errors import DomainError
from hybridsem.schemas import DELAY_INF, ChannelRealization, SimilarityCurve
from hybridsem.services.similarity_model import subcarrier_gamma_many

LN2 = math.log(2.0)


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def gamma_from_ber(ber: float) -> float:
    """SNR gap of uncoded M-QAM: Γ = -ln(5 BER)/1.5, must be >= 1."""
    if not (0.0 < ber < 0.2):
        raise DomainError(f"BER must lie in (0, 0.2): {ber}")
    gap = -math.log(5.0 * ber) / 1.5
    if gap < 1.0 - 1e-12:
        raise DomainError(f"BER {ber} gives Γ={gap:.6g} < 1")
    return max(gap, 1.0)


def shannon_rate(power, c, gap: float, bandwidth: float):
    """W log2(1 + P/(cΓ)) [bit/s]"""
    if gap < 1.0:
        raise DomainError(f"SNR gap must be >= 1: {gap}")
    x = np.asarray(power, dtype=float) / (np.asarray(c, dtype=float) * gap)
    return _out(bandwidth * np.log1p(x) / LN2)


def shannon_delay(bits, rate):
    """U/C; zero rate saturates at DELAY_INF unless U = 0."""
    bits = np.asarray(bits, dtype=float)
    rate = np.asarray(rate, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(rate > 0, bits / np.where(rate > 0, rate, 1.0), DELAY_INF)
    d = np.where(bits == 0, 0.0, np.minimum(d, DELAY_INF))
    return _out(d)


def semantic_delay(word_sum, k: int, bandwidth: float):
    """k Σ O / W: one symbol per channel use, independent of power."""
    if not bandwidth > 0:
        raise DomainError(f"bandwidth must be positive: {bandwidth}")
    return _out(k * np.asarray(word_sum, dtype=float) / bandwidth)


def hybrid_delay(semantic_mask, shannon_delays, semantic_delays):
    """𝒟_l = a_l D_l + ã_l D̃_l"""
    return _out(np.where(np.asarray(semantic_mask, dtype=bool), semantic_delays, shannon_delays))


@dataclass
class SubcarrierProblem:
    """One solver instance: everything both delay objectives need per subcarrier."""

    c: np.ndarray            # N0 W / |h|^2
    bits: np.ndarray         # U_l
    words: np.ndarray        # Σ_n O_{n,l}
    gamma_max: np.ndarray    # linear; inf where the subcarrier is not in S
    p_tot: float
    bandwidth: float
    k: int
    gap: float = 1.0
    semantic_delays: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.bits = np.asarray(self.bits, dtype=float)
        self.words = np.asarray(self.words, dtype=float)
        self.gamma_max = np.asarray(self.gamma_max, dtype=float)
        errors: list[str] = []
        n = self.c.shape
        if len(n) != 1 or n[0] == 0:
            errors.append(f"c must be a non-empty vector, got shape {n}")
        for name in ("bits", "words", "gamma_max"):
            if getattr(self, name).shape != n:
                errors.append(f"{name} has shape {getattr(self, name).shape}, expected {n}")
        if not np.all(self.c > 0) or not np.all(np.isfinite(self.c)):
            errors.append("c_l must be positive and finite")
        if np.any(self.bits < 0) or np.any(self.words < 0):
            errors.append("loads must be non-negative")
        if not self.p_tot > 0:
            errors.append(f"P_tot must be positive: {self.p_tot}")
        if self.gap < 1.0:
            errors.append(f"SNR gap must be >= 1: {self.gap}")
        if errors:
            raise DomainError("; ".join(errors))
        self.semantic_delays = semantic_delay(self.words, self.k, self.bandwidth) * np.ones(n)

    @classmethod
    def from_loads(cls, channels: ChannelRealization, bits, words, m_max,
                   curve: SimilarityCurve | None, p_tot: float, gap: float = 1.0,
                   k: int | None = None) -> "SubcarrierProblem":
        """curve=None builds a Shannon-only instance (S empty)."""
        if curve is None:
            gamma = np.full(channels.L, np.inf)
            k = k or 1
        else:
            gamma = subcarrier_gamma_many(curve, m_max)
            k = curve.k if k is None else k
        return cls(c=channels.c, bits=bits, words=words, gamma_max=gamma, p_tot=p_tot,
                   bandwidth=channels.bandwidth, k=k, gap=gap)

    @property
    def L(self) -> int:
        return int(self.c.shape[0])

    @property
    def feasible(self) -> np.ndarray:
        """Membership in S."""
        return np.isfinite(self.gamma_max)

    @property
    def required_power(self) -> np.ndarray:
        """γ_l^max c_l (inf outside S)."""
        return self.gamma_max * self.c

    def shannon_delays(self, powers) -> np.ndarray:
        rate = shannon_rate(powers, self.c, self.gap, self.bandwidth)
        return np.asarray(shannon_delay(self.bits, rate), dtype=float)

    def delays(self, powers, semantic_mask) -> np.ndarray:
        return np.asarray(hybrid_delay(semantic_mask, self.shannon_delays(powers), self.semantic_delays))

    def objective_sum(self, powers, semantic_mask) -> float:
        return math.fsum(self.delays(powers, semantic_mask))

    def objective_max(self, powers, semantic_mask) -> float:
        return float(np.max(self.delays(powers, semantic_mask)))
