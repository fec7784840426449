import math

import numpy as np
import pytest

from hybridsem.errors import DomainError, InfeasibleSelection
from hybridsem.services.link_model import SubcarrierProblem, gamma_from_ber
from hybridsem.services.minmax_solver import complexity_estimate, equal_delay_allocation, minmax_heuristic


def _delta_oracle(c, bits, bandwidth, gap, p_tot):
    """Bisection on Δ: Σ cΓ(2^{U/(WΔ)} - 1) = P_tot."""
    def need(delta):
        with np.errstate(over="ignore"):
            return float(np.sum(c * gap * np.expm1(math.log(2) * bits / (bandwidth * delta))))

    lo, hi = 1e-12, 1.0
    while need(hi) > p_tot:
        hi *= 2.0
    while need(lo) <= p_tot:
        lo /= 2.0
    for _ in range(300):
        mid = math.sqrt(lo * hi)
        if need(mid) > p_tot:
            lo = mid
        else:
            hi = mid
    return hi


def _shannon_only(c, bits, p_tot, gap=1.0):
    L = len(c)
    return SubcarrierProblem(c=c, bits=bits, words=np.zeros(L), gamma_max=np.full(L, np.inf),
                             p_tot=p_tot, bandwidth=1000.0, k=16, gap=gap)


def test_equal_split_symmetric():
    prob = _shannon_only([1.5, 1.5], [2000.0, 2000.0], 6.0)
    powers, delta = equal_delay_allocation(prob, np.ones(2, dtype=bool), 6.0)
    assert powers == pytest.approx([3.0, 3.0], rel=1e-12)
    d = prob.shannon_delays(powers)
    assert d[0] == pytest.approx(d[1], rel=1e-12)
    assert delta == pytest.approx(d.max(), rel=1e-15)


def test_double_load_closed_form():
    c, gap = 2.0, 1.0
    prob = _shannon_only([c, c], [1000.0, 2000.0], 30.0, gap=gap)
    powers, _ = equal_delay_allocation(prob, np.ones(2, dtype=bool), 30.0)
    p_l = powers[0]
    assert powers[1] == pytest.approx(c * gap * ((1 + p_l / (c * gap)) ** 2 - 1), rel=1e-9)


@pytest.mark.parametrize("L", [1, 2, 3])
def test_equal_delay_matches_oracle(L):
    rng = np.random.default_rng(40 + L)
    for _ in range(200):
        c = rng.uniform(0.1, 10.0, L)
        bits = rng.uniform(100.0, 5000.0, L)
        gap = float(rng.choice([1.0, gamma_from_ber(1e-3), gamma_from_ber(1e-5)]))
        p_tot = float(c.sum() * rng.uniform(0.05, 50.0))
        prob = _shannon_only(c, bits, p_tot, gap)
        powers, delta = equal_delay_allocation(prob, np.ones(L, dtype=bool), p_tot)
        d = prob.shannon_delays(powers)
        assert d.max() - d.min() <= 1e-6 * delta
        assert abs(powers.sum() - p_tot) <= 1e-9 * p_tot
        assert delta == pytest.approx(_delta_oracle(c, bits, 1000.0, gap, p_tot), rel=1e-6)


def test_equal_delay_errors():
    prob = _shannon_only([1.0, 1.0], [10.0, 10.0], 1.0)
    with pytest.raises(DomainError):
        equal_delay_allocation(prob, np.zeros(2, dtype=bool), 1.0)
    with pytest.raises(InfeasibleSelection):
        equal_delay_allocation(prob, np.ones(2, dtype=bool), 0.0)


def test_heuristic_without_semantic_is_equal_delay():
    rng = np.random.default_rng(1)
    c, bits = rng.uniform(0.5, 4.0, 5), rng.uniform(500.0, 3000.0, 5)
    prob = _shannon_only(c, bits, 20.0)
    state = minmax_heuristic(prob)
    powers, delta = equal_delay_allocation(prob, np.ones(5, dtype=bool), 20.0)
    assert not state.modes.any()
    assert np.array_equal(state.powers, powers)
    assert state.delta == delta == state.objective
    assert state.switches == [] and state.stop_reason == "no_candidate"


def test_single_subcarrier_switch():
    # 全電力で D = 2000/(1000*log2(11)) ≈ 0.578 s > D̃ = 16*20/1000 = 0.32 s
    prob = SubcarrierProblem(c=[1.0], bits=[2000.0], words=[20.0], gamma_max=[4.0],
                             p_tot=10.0, bandwidth=1000.0, k=16)
    state = minmax_heuristic(prob)
    assert state.modes.tolist() == [True]
    assert state.objective == pytest.approx(0.32, rel=1e-12)
    # 余りの電力は意味通信サブキャリアに残る
    assert state.powers.sum() == pytest.approx(10.0, rel=1e-12)
    assert state.stop_reason == "all_semantic"


def test_heuristic_properties(problem_factory):
    rng = np.random.default_rng(99)
    switched = 0
    for _ in range(1000):
        L = int(rng.integers(1, 7))
        prob = problem_factory(rng, L)
        state = minmax_heuristic(prob)
        # Δ_i は単調非増加
        assert all(b <= a * (1 + 1e-12) for a, b in zip(state.deltas, state.deltas[1:]))
        assert state.objective <= state.deltas[0] * (1 + 1e-12)
        assert abs(state.powers.sum() - prob.p_tot) <= 1e-9 * prob.p_tot
        for i, (l, before, required, dt) in enumerate(state.switches):
            assert before > required
            assert dt < state.deltas[i]
        shannon = ~state.modes & (prob.bits > 0)
        if shannon.any():
            d = prob.shannon_delays(state.powers)[shannon]
            assert d.max() - d.min() <= 1e-6 * state.delta
        assert np.all(state.powers[state.modes] >= prob.required_power[state.modes] * (1 - 1e-15))
        assert state.equal_delay_solves <= (L * L + L) / 2
        switched += len(state.switches)
    assert switched > 50


def test_candidate_order():
    prob = SubcarrierProblem(c=[1.0, 1.0, 1.0], bits=[3000.0, 3000.0, 3000.0], words=[10.0, 20.0, 30.0],
                             gamma_max=[1.0, 1.0, 1.0], p_tot=9.0, bandwidth=1000.0, k=16)
    asc = minmax_heuristic(prob, order="ascending")
    desc = minmax_heuristic(prob, order="descending")
    assert asc.switches[0][0] == 1
    assert desc.switches[0][0] == 3
    with pytest.raises(DomainError):
        minmax_heuristic(prob, order="random")  # type: ignore[arg-type]


def test_complexity_estimate():
    assert complexity_estimate(1, 1) == 3
    assert complexity_estimate(64, 0) == pytest.approx(64 * 6 + 2 * 64 * 64)
    assert complexity_estimate(4, 10) == pytest.approx(8 + 32 + 100)
    with pytest.raises(DomainError):
        complexity_estimate(0, 1)


def test_sort_work_counted():
    rng = np.random.default_rng(4)
    L = 8
    prob = SubcarrierProblem(c=rng.uniform(0.5, 2.0, L), bits=np.full(L, 3000.0), words=np.full(L, 10.0),
                             gamma_max=np.full(L, 0.5), p_tot=40.0, bandwidth=1000.0, k=16)
    state = minmax_heuristic(prob)
    assert state.switches
    assert 0 < state.sort_work <= complexity_estimate(L, 0)
    assert state.candidates == [] or all(len(c) == 3 for c in state.candidates)
