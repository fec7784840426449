"""総遅延最小化 (P1)

P2: 選択固定での電力配分。意味通信サブキャリアは γ^max c に固定し、
残り P'_tot を Shannon サブキャリアへ Lambert W の閉形式で配る (λ は根探索)。
P3: 電力固定での選択。目的関数がサブキャリアごとに分離するので各 l で独立に決まる。
alternate_optimize: 全 Shannon から P3 → P2 を交互に繰り返す。
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from hybridsem.errors import DomainError, InfeasibleSelection
from hybridsem.schemas import SubcarrierAllocation
from hybridsem.services.link_model import LN2, SubcarrierProblem
from hybridsem.utils.audit import dbg

# 残電力がこれ以下なら P'_tot <= 0 とみなす (P_tot 比)
RESIDUAL_TOL = 1e-12
_W_ITERS = 64


def lambert_w0(x):
    """Principal branch W0 on x >= 0 by Halley iteration.

    Works on g(w) = w - x e^{-w}, which has the same root as w e^w - x
    without overflowing for large x.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("lambert_w0 is only defined here for x >= 0")
    flat = np.atleast_1d(arr).ravel()
    w = np.log1p(flat)
    big = flat > math.e
    if np.any(big):
        l1 = np.log(flat[big])
        l2 = np.log(l1)
        w[big] = l1 - l2 + l2 / l1
    finite = np.isfinite(flat)
    w[~finite] = np.inf
    active = finite & (flat > 0)
    w[flat == 0] = 0.0
    for _ in range(_W_ITERS):
        if not np.any(active):
            break
        wa = w[active]
        xe = flat[active] * np.exp(-wa)
        g = wa - xe
        g1 = 1.0 + xe
        g2 = -xe
        step = 2.0 * g * g1 / (2.0 * g1 * g1 - g * g2)
        w[active] = wa - step
        done = np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(wa))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    out = w.reshape(np.shape(arr))
    return float(out) if out.ndim == 0 else out


def shannon_power(lam: float, c, bits, bandwidth: float, gap: float):
    """P_l(λ) = cΓ (exp[2 W0(sqrt(δ/4))] - 1), δ = ln2 U/(λ W c Γ)."""
    c = np.asarray(c, dtype=float)
    bits = np.asarray(bits, dtype=float)
    delta = LN2 * bits / (lam * bandwidth * c * gap)
    w = lambert_w0(np.sqrt(delta / 4.0))
    return c * gap * np.expm1(2.0 * w)


def _marginal(p, c, bits, bandwidth: float, gap: float) -> np.ndarray:
    cg = c * gap
    x = p / cg
    ln_y = np.log1p(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = LN2 * bits / (bandwidth * cg * (1.0 + x) * ln_y * ln_y)
    return np.where(bits == 0, 0.0, np.where(p > 0, m, np.inf))


def marginal_delay_reduction(problem: SubcarrierProblem, powers) -> np.ndarray:
    """-∂D_l/∂P_l = ln2 U / (W c Γ y ln^2 y), y = 1 + P/(cΓ)."""
    p = np.asarray(powers, dtype=float)
    return _marginal(p, problem.c, problem.bits, problem.bandwidth, problem.gap)


def kkt_residuals(problem: SubcarrierProblem, powers, semantic_mask, lam: float) -> np.ndarray:
    """|marginal - λ| / λ on the Shannon subcarriers carrying data."""
    mask = np.asarray(semantic_mask, dtype=bool)
    active = ~mask & (problem.bits > 0)
    m = marginal_delay_reduction(problem, powers)[active]
    return np.abs(m - lam) / lam


def solve_p2(problem: SubcarrierProblem, semantic_mask) -> tuple[np.ndarray, float]:
    """Power allocation for a fixed selection S'. Returns (powers, λ).

    λ = 0 is returned when no Shannon subcarrier carries data.
    """
    mask = np.asarray(semantic_mask, dtype=bool)
    if mask.shape != (problem.L,):
        raise DomainError(f"selection has shape {mask.shape}, expected ({problem.L},)")
    if np.any(mask & ~problem.feasible):
        bad = (np.flatnonzero(mask & ~problem.feasible) + 1).tolist()
        raise DomainError(f"semantic mode selected outside S on subcarriers {bad}")
    powers = np.zeros(problem.L)
    pinned = problem.required_power[mask]
    residual = problem.p_tot - math.fsum(pinned)
    shannon = ~mask
    active = shannon & (problem.bits > 0)
    tol = RESIDUAL_TOL * problem.p_tot
    if residual < -tol or (np.any(active) and residual <= tol):
        raise InfeasibleSelection(
            f"pinned semantic power exceeds budget (P'_tot={residual:.6g} W)", residual=residual)
    residual = max(residual, 0.0)
    powers[mask] = pinned
    if not np.any(shannon):
        # 全て意味通信: 余りを均等に上乗せして Σ P_l = P_tot を保つ
        powers[mask] += residual / mask.sum()
        return powers, 0.0
    if not np.any(active):
        powers[shannon] = residual / shannon.sum()
        return powers, 0.0
    idx = np.flatnonzero(active)
    c, bits = problem.c[idx], problem.bits[idx]
    if idx.size == 1:
        powers[idx] = residual
        lam = float(marginal_delay_reduction(problem, powers)[idx[0]])
        return powers, lam

    def excess(log_lam: float) -> float:
        p = shannon_power(math.exp(log_lam), c, bits, problem.bandwidth, problem.gap)
        return math.fsum(p) - residual

    # λ が大きいほど Σ P_l(λ) は小さい
    # 下端: 1 本で全部使う λ、上端: 全員が均等割り以下になる λ
    a = math.log(float(np.min(_marginal(np.full_like(c, residual), c, bits, problem.bandwidth, problem.gap))))
    b = math.log(float(np.max(_marginal(np.full_like(c, residual / idx.size), c, bits,
                                        problem.bandwidth, problem.gap))))
    while excess(a) < 0:
        a -= 1.0
    while excess(b) > 0:
        b += 1.0
    log_lam = brentq(excess, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    lam = math.exp(log_lam)
    p = shannon_power(lam, c, bits, problem.bandwidth, problem.gap)
    powers[idx] = p * (residual / math.fsum(p))
    return powers, lam


def select_modes_p3(problem: SubcarrierProblem, powers) -> np.ndarray:
    """Semantic iff l ∈ S, P_l >= γ^max c_l and D̃_l < D_l(P_l). Ties keep Shannon."""
    p = np.asarray(powers, dtype=float)
    return problem.feasible & (p >= problem.required_power) & (problem.semantic_delays < problem.shannon_delays(p))


@dataclass
class SumSolverState:
    problem: SubcarrierProblem
    powers: np.ndarray
    modes: np.ndarray                 # True = semantic
    lam: float
    objective: float
    history: list[tuple[tuple[bool, ...], float]] = field(default_factory=list)
    iterations: int = 0
    stop_reason: str = ""

    @property
    def p_tot(self) -> float:
        return self.problem.p_tot

    @property
    def p_residual(self) -> float:
        """P'_tot available to the Shannon subcarriers."""
        return self.p_tot - math.fsum(self.problem.required_power[self.modes])

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


def alternate_optimize(problem: SubcarrierProblem, max_iters: int = 10,
                       run_id: Optional[str] = None) -> SumSolverState:
    """Alternating P3/P2 from the all-Shannon start; keeps the best iterate."""
    if max_iters < 1:
        raise DomainError(f"max_iters must be >= 1: {max_iters}")
    mask = np.zeros(problem.L, dtype=bool)
    powers, lam = solve_p2(problem, mask)
    obj = problem.objective_sum(powers, mask)
    history = [(tuple(mask.tolist()), obj)]
    seen = {history[0][0]}
    best = (mask, powers, lam, obj)
    reason = "max_iters"
    it = 0
    for it in range(1, max_iters + 1):
        new_mask = select_modes_p3(problem, powers)
        key = tuple(new_mask.tolist())
        if np.array_equal(new_mask, mask):
            reason = "converged"
            break
        if key in seen:
            reason = "oscillation"
            break
        try:
            powers_n, lam_n = solve_p2(problem, new_mask)
        except InfeasibleSelection as e:
            # 直前の選択に戻して終了
            if run_id:
                dbg(run_id, f"[sum] iter={it} infeasible selection reverted: {e}")
            reason = "infeasible"
            break
        mask, powers, lam = new_mask, powers_n, lam_n
        obj = problem.objective_sum(powers, mask)
        history.append((key, obj))
        seen.add(key)
        if run_id:
            dbg(run_id, f"[sum] iter={it} semantic={int(mask.sum())} objective={obj:.6g}")
        if obj < best[3]:
            best = (mask, powers, lam, obj)
    return SumSolverState(problem=problem, powers=best[1], modes=best[0], lam=best[2], objective=best[3],
                          history=history, iterations=it, stop_reason=reason)
