"""最大遅延最小化 (P4)

Shannon サブキャリア同士は遅延が等しくなる配分が最適 (equal-delay)。
その上で、意味通信に切り替えると電力が浮くサブキャリアを 1 本ずつ貪欲に切り替える。
"""
import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from scipy.optimize import brentq

from hybridsem.errors import DomainError, InfeasibleSelection
from hybridsem.schemas import SubcarrierAllocation
from hybridsem.services.link_model import SubcarrierProblem
from hybridsem.utils.audit import dbg


def equal_delay_allocation(problem: SubcarrierProblem, shannon_mask, p_avail: float) -> tuple[np.ndarray, float]:
    """Split p_avail over the Shannon set so that every D_m is equal.

    Reference subcarrier is the one with the largest U; the others follow
    P_m = c_mΓ((1 + P_ref/(c_refΓ))^(U_m/U_ref) - 1). Entries outside the set are 0.
    """
    mask = np.asarray(shannon_mask, dtype=bool)
    if mask.shape != (problem.L,):
        raise DomainError(f"Shannon set has shape {mask.shape}, expected ({problem.L},)")
    if not np.any(mask):
        raise DomainError("equal-delay allocation needs at least one Shannon subcarrier")
    if not p_avail > 0:
        raise InfeasibleSelection(f"no power left for the Shannon subcarriers ({p_avail:.6g} W)",
                                  residual=p_avail)
    powers = np.zeros(problem.L)
    active = mask & (problem.bits > 0)
    if not np.any(active):
        powers[mask] = p_avail / mask.sum()
        return powers, 0.0
    idx = np.flatnonzero(active)
    cg = problem.c[idx] * problem.gap
    ref = int(np.argmax(problem.bits[idx]))
    ratio = problem.bits[idx] / problem.bits[idx][ref]

    def follow(p_ref: float) -> np.ndarray:
        return cg * np.expm1(ratio * math.log1p(p_ref / cg[ref]))

    def excess(p_ref: float) -> float:
        return math.fsum(follow(p_ref)) - p_avail

    hi = p_avail
    while excess(hi) < 0:
        hi *= 2.0
    p_ref = brentq(excess, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    p = follow(p_ref)
    powers[idx] = p * (p_avail / math.fsum(p))
    delta = float(np.max(problem.shannon_delays(powers)[idx]))
    return powers, delta


def complexity_estimate(L: int, root_iters: int) -> float:
    """L log2 L + 2L^2 + ((L^2 + L)/2) X"""
    if L < 1:
        raise DomainError(f"L must be >= 1: {L}")
    return L * math.log2(L) + 2 * L * L + (L * L + L) / 2 * root_iters


@dataclass
class MinMaxState:
    problem: SubcarrierProblem
    powers: np.ndarray
    modes: np.ndarray                     # True = semantic
    delta: float                          # common Shannon delay Δ
    deltas: list[float] = field(default_factory=list)
    # (l, P_l before the switch, γ^max c_l, D̃_l)
    switches: list[tuple[int, float, float, float]] = field(default_factory=list)
    # candidate vector v of the last outer iteration: (l, D̃_l, P̃_l)
    candidates: list[tuple[int, float, float]] = field(default_factory=list)
    equal_delay_solves: int = 0
    sort_work: float = 0.0
    order: str = "ascending"
    stop_reason: str = ""

    @property
    def objective(self) -> float:
        """max_l 𝒟_l"""
        return self.problem.objective_max(self.powers, self.modes)

    @property
    def utilization(self) -> float:
        return 100.0 * float(np.mean(self.modes))

    def delays(self) -> np.ndarray:
        return self.problem.delays(self.powers, self.modes)

    def allocations(self) -> list[SubcarrierAllocation]:
        d = self.delays()
        return [SubcarrierAllocation(index=l + 1, power=float(self.powers[l]),
                                     mode="semantic" if self.modes[l] else "shannon", delay=float(d[l]))
                for l in range(self.problem.L)]


def minmax_heuristic(problem: SubcarrierProblem,
                     order: Literal["ascending", "descending"] = "ascending",
                     run_id: Optional[str] = None) -> MinMaxState:
    """Greedy semantic switching on top of the equal-delay allocation."""
    if order not in ("ascending", "descending"):
        raise DomainError(f"unknown candidate order: {order}")
    L = problem.L
    mask = np.zeros(L, dtype=bool)
    powers, delta = equal_delay_allocation(problem, ~mask, problem.p_tot)
    state = MinMaxState(problem=problem, powers=powers, modes=mask, delta=delta, deltas=[delta],
                        equal_delay_solves=1, order=order)
    required = problem.required_power
    dt = problem.semantic_delays
    state.stop_reason = "max_iters"
    for it in range(1, L + 1):
        eligible = np.flatnonzero(problem.feasible & ~mask)
        keys = dt[eligible] if order == "ascending" else -dt[eligible]
        v = eligible[np.argsort(keys, kind="stable")]
        if v.size > 1:
            state.sort_work += v.size * math.log2(v.size)
        state.candidates = [(int(m) + 1, float(dt[m]), float(required[m])) for m in v]
        chosen = None
        for m in v:
            if dt[m] < delta and powers[m] > required[m]:
                chosen = int(m)
                break
        if chosen is None:
            state.stop_reason = "no_candidate"
            break
        new_mask = mask.copy()
        new_mask[chosen] = True
        p_avail = problem.p_tot - math.fsum(required[new_mask])
        if np.any(~new_mask):
            new_powers, new_delta = equal_delay_allocation(problem, ~new_mask, p_avail)
            state.equal_delay_solves += 1
            new_powers[new_mask] = required[new_mask]
        else:
            # 全サブキャリアが意味通信: 余りは均等に配る
            new_powers = required.copy()
            new_powers += max(p_avail, 0.0) / L
            new_delta = 0.0
        state.switches.append((chosen + 1, float(powers[chosen]), float(required[chosen]), float(dt[chosen])))
        if run_id:
            dbg(run_id, f"[minmax] iter={it} switch l={chosen + 1} Δ {delta:.6g} -> {new_delta:.6g}")
        mask, powers, delta = new_mask, new_powers, new_delta
        state.deltas.append(delta)
        if not np.any(~mask):
            state.stop_reason = "all_semantic"
            break
    state.powers, state.modes, state.delta = powers, mask, delta
    return state
