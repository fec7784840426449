"""テキストモデル

文の生成、QoS 閾値のサンプリング、シリアル番号 j と (n, l) の対応、
サブキャリアごとの負荷集計を扱う。
"""
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from hybridsem.errors import ConfigError, DomainError
from hybridsem.schemas import (
    BITS_PER_CHAR,
    CHARS_PER_WORD,
    QOS_RANGE,
    WORD_RANGE,
    Granularity,
    Sentence,
    TextPartition,
)

SeedLike = int | np.random.SeedSequence | None


def serial_to_grid(j: int, L: int) -> tuple[int, int]:
    """j = (n-1)L + l  ->  (n, l)"""
    if j <= 0 or L <= 0:
        raise DomainError(f"serial_to_grid needs j >= 1 and L >= 1 (j={j}, L={L})")
    n, l = divmod(j - 1, L)
    return n + 1, l + 1


def grid_to_serial(n: int, l: int, L: int) -> int:
    if n <= 0 or L <= 0 or not (1 <= l <= L):
        raise DomainError(f"grid_to_serial needs n >= 1 and 1 <= l <= L (n={n}, l={l}, L={L})")
    return (n - 1) * L + l


def _check_qos_range(qos_range: Sequence[float]) -> tuple[float, float]:
    lo, hi = float(qos_range[0]), float(qos_range[1])
    if not (0.0 < lo <= hi <= 1.0):
        raise ConfigError(f"QoS range must satisfy 0 < lo <= hi <= 1: {tuple(qos_range)}")
    return lo, hi


def generate_text(P: int,
                  word_range: Sequence[int] = WORD_RANGE,
                  chars_per_word: int = CHARS_PER_WORD,
                  rng_seed: SeedLike = 0) -> TextPartition:
    """Synthetic corpus: uniform word counts, cpw letters per word plus spaces.

    Thresholds are left at 0 until qos_sample() fills them.
    """
    lo, hi = int(word_range[0]), int(word_range[1])
    if P < 1:
        raise ConfigError(f"P must be >= 1: {P}")
    if lo < 1 or lo > hi:
        raise ConfigError(f"word range must satisfy 1 <= min <= max: {tuple(word_range)}")
    if chars_per_word < 1:
        raise ConfigError(f"chars_per_word must be >= 1: {chars_per_word}")
    rng = np.random.default_rng(rng_seed)
    words = rng.integers(lo, hi + 1, size=P)
    chars = chars_per_word * words + (words - 1)
    sentences = [Sentence(serial_index=j + 1, word_count=int(o), char_count=int(u))
                 for j, (o, u) in enumerate(zip(words, chars))]
    return TextPartition(sentences=sentences, L=1)


def draw_thresholds(P: int,
                    L: int,
                    qos_range: Sequence[float] = QOS_RANGE,
                    rng_seed: SeedLike = 0,
                    granularity: Granularity = "sentence") -> np.ndarray:
    """Array form of the QoS sampler.

    sentence: 文ごとに独立な一様乱数
    stream:   SST で同じサブキャリアに流れる文 (j ≡ l mod L) が同じ閾値を共有
    """
    lo, hi = _check_qos_range(qos_range)
    if P < 1 or L < 1:
        raise ConfigError(f"P and L must be >= 1 (P={P}, L={L})")
    rng = np.random.default_rng(rng_seed)
    if granularity == "sentence":
        n = P
    elif granularity == "stream":
        n = L
    else:
        raise ConfigError(f"unknown QoS granularity: {granularity}")
    draws = np.full(n, lo) if lo == hi else rng.uniform(lo, hi, size=n)
    if granularity == "stream":
        draws = draws[np.arange(P) % L]
    return draws


def qos_sample(partition: TextPartition,
               qos_range: Sequence[float] = QOS_RANGE,
               rng_seed: SeedLike = 0,
               granularity: Granularity = "sentence") -> TextPartition:
    """Fresh thresholds for every non-padding sentence; the corpus is kept."""
    thresholds = draw_thresholds(partition.P, partition.L, qos_range, rng_seed, granularity)
    return partition.with_thresholds(thresholds)


def subcarrier_loads(words: np.ndarray,
                     chars: np.ndarray,
                     thresholds: np.ndarray,
                     groups: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per subcarrier: U_l [bits], Σ O [words], M_l^max.

    `groups` is the (L, N) position table of an Assignment. Padding rows
    contribute zeros everywhere.
    """
    bits = BITS_PER_CHAR * np.asarray(chars, dtype=float)[groups].sum(axis=1)
    word_sums = np.asarray(words, dtype=float)[groups].sum(axis=1)
    m_max = np.asarray(thresholds, dtype=float)[groups].max(axis=1)
    return bits, word_sums, m_max


def export_corpus(partition: TextPartition, path: str | Path) -> None:
    """JSONL: head line then one record per sentence."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        f.write(json.dumps({"type": "corpus", "P": partition.P, "L": partition.L}) + "\n")
        for s in partition.sentences:
            rec = {"type": "sentence", "j": s.serial_index, "O": s.word_count,
                   "u": s.char_count, "M_th": s.threshold}
            f.write(json.dumps(rec) + "\n")


def import_corpus(path: str | Path) -> TextPartition:
    head = None
    sentences: list[Sentence] = []
    with Path(path).open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}:{lineno}: invalid JSON ({e})") from e
            kind = rec.get("type")
            if kind == "corpus":
                head = rec
            elif kind == "sentence":
                try:
                    sentences.append(Sentence(serial_index=rec["j"], word_count=rec["O"],
                                              char_count=rec["u"], threshold=rec.get("M_th", 0.0)))
                except (KeyError, ValueError) as e:
                    raise ConfigError(f"{path}:{lineno}: bad sentence record ({e})") from e
    if head is None:
        raise ConfigError(f"{path}: missing corpus head line")
    if len(sentences) != head.get("P", len(sentences)):
        raise ConfigError(f"{path}: head says P={head.get('P')}, found {len(sentences)} sentences")
    try:
        return TextPartition(sentences=sentences, L=head.get("L", 1))
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e
