import itertools
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from hybridsem.errors import DomainError
from hybridsem.schemas import Assignment, ChannelRealization, Policy, TextPartition


def _gains(channels) -> np.ndarray:
    if isinstance(channels, ChannelRealization):
        return channels.gain_array()
    return np.asarray(channels, dtype=float)


def assign_sst(partition: TextPartition, L: int | None = None) -> Assignment:
    """Serial transmission: sentence j goes to subcarrier ((j-1) mod L) + 1."""
    L = partition.L if L is None else L
    if L < 1 or partition.P % L != 0:
        raise DomainError(f"P={partition.P} is not divisible by L={L}")
    serials = np.arange(1, partition.P + 1).reshape(partition.P // L, L)
    return Assignment(policy="sst", blocks=serials.T.tolist())


def assign_ost(partition: TextPartition, channels) -> Assignment:
    """Ordered transmission: the t-th shortest block of N sentences goes to the t-th weakest channel.

    文長の同順位はシリアル番号で決める。
    """
    gains = _gains(channels)
    L = gains.size
    if L < 1 or partition.P % L != 0:
        raise DomainError(f"P={partition.P} is not divisible by L={L}")
    N = partition.P // L
    serials = np.arange(1, partition.P + 1)
    by_length = np.lexsort((serials, partition.char_counts()))
    by_gain = np.argsort(gains, kind="stable")
    blocks: list[list[int]] = [[] for _ in range(L)]
    for t, l in enumerate(by_gain):
        blocks[int(l)] = (serials[by_length[t * N:(t + 1) * N]]).tolist()
    return Assignment(policy="ost", blocks=blocks)


def assign(partition: TextPartition, channels, policy: Policy) -> Assignment:
    if policy == "sst":
        return assign_sst(partition, _gains(channels).size)
    if policy == "ost":
        return assign_ost(partition, channels)
    raise DomainError(f"unknown association policy: {policy}")


def capacity_order_repair(powers, channels) -> tuple[np.ndarray, float, int]:
    """Swap received powers Q_i = P_i |h_i|^2 until Q is co-ordered with the gains.

    Capacities depend on Q only, so their multiset is unchanged; every swap of a
    mis-ordered pair saves (Q_a - Q_b)(1/g_a - 1/g_b) > 0.
    Returns (repaired powers, power saved, swap rounds).
    """
    p = np.asarray(powers, dtype=float)
    gains = _gains(channels)
    if p.shape != gains.shape:
        raise DomainError(f"powers {p.shape} and gains {gains.shape} differ in shape")
    if np.any(p <= 0):
        raise DomainError("capacity_order_repair needs positive powers")
    q = p * gains
    order = np.argsort(gains, kind="stable")
    qs = q[order]
    rounds = 0
    for i in range(qs.size - 1):
        j = i + int(np.argmin(qs[i:]))
        if qs[j] < qs[i]:
            qs[i], qs[j] = qs[j], qs[i]
            rounds += 1
    q_new = np.empty_like(q)
    q_new[order] = qs
    repaired = q_new / gains
    saved = float(p.sum() - repaired.sum())
    return repaired, max(saved, 0.0), rounds


def rearrangement_bound_check(rates: Sequence[float], sizes: Sequence[float],
                              samples: int = 2000, rng_seed: int = 0,
                              exhaustive_max: int = 8) -> tuple[float, float, bool]:
    """Σ size/rate with the OST pairing (longest on fastest) against other pairings.

    Exhaustive over all permutations up to `exhaustive_max` entries, sampled beyond.
    Returns (ost_sum, worst_sum, ok).
    """
    r = np.asarray(rates, dtype=float)
    s = np.asarray(sizes, dtype=float)
    if r.shape != s.shape or r.ndim != 1 or r.size == 0:
        raise DomainError("rates and sizes must be non-empty vectors of equal length")
    if np.any(r <= 0):
        raise DomainError("rates must be positive")
    inv = 1.0 / r
    # v2: sizes ascending, v3: inverse rates descending
    ost_sum = float(np.sort(s) @ np.sort(inv)[::-1])
    n = s.size
    if n <= exhaustive_max:
        perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    else:
        rng = np.random.default_rng(rng_seed)
        perms = np.array([rng.permutation(n) for _ in range(samples)], dtype=np.int64)
    sums = s[perms] @ inv
    best, worst = float(sums.min()), float(sums.max())
    ok = ost_sum <= best * (1.0 + 1e-12)
    return ost_sum, worst, ok


def export_assignment(assignment: Assignment, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        f.write(json.dumps({"type": "assignment", "policy": assignment.policy,
                            "L": assignment.L, "N": assignment.N}) + "\n")
        for l, block in enumerate(assignment.blocks, start=1):
            f.write(json.dumps({"type": "subcarrier", "l": l, "sentences": block}) + "\n")


def import_assignment(path: str | Path) -> Assignment:
    policy = None
    blocks: dict[int, list[int]] = {}
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("type") == "assignment":
                policy = rec["policy"]
            elif rec.get("type") == "subcarrier":
                blocks[int(rec["l"])] = list(rec["sentences"])
    if policy is None:
        raise DomainError(f"{path}: missing assignment head line")
    return Assignment(policy=policy, blocks=[blocks[l] for l in sorted(blocks)])
