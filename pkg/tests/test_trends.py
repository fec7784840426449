"""Desk-scale sweeps with the reference parameters (50 x 5 realizations).

These take a few minutes; they check the shape of the curves, not exact values.
"""
import os
from pathlib import Path

import pytest

from hybridsem.services.experiment import load_config, run_sweep

BASELINE = Path(__file__).resolve().parent.parent / "config" / "baseline.yaml"
WORKERS = min(4, os.cpu_count() or 1)


def _config(**kw):
    cfg = load_config(BASELINE)
    return cfg.model_copy(update={"workers": WORKERS, **kw})


@pytest.fixture(scope="module")
def sum_sst():
    return run_sweep(_config())


@pytest.fixture(scope="module")
def sum_ost():
    return run_sweep(_config(association="ost"))


def _util(metrics, snr):
    return {p.snr_db: p.utilization_pct for p in metrics.points}[snr]


def test_utilization_vanishes_at_both_ends(sum_sst):
    assert _util(sum_sst, 10.0) < 5.0
    assert _util(sum_sst, 35.0) < 5.0


def test_utilization_peaks_inside(sum_sst):
    util = sum_sst.column("utilization_pct")
    peak = max(util)
    assert peak >= 30.0
    assert 0 < util.index(peak) < len(util) - 1


def test_hybrid_improves_on_shannon(sum_sst):
    assert all(p.improvement_pct >= 0.0 for p in sum_sst.points)
    assert all(p.trials_ok + p.trials_infeasible == 250 for p in sum_sst.points)


def test_ost_uses_fewer_semantic_subcarriers(sum_sst, sum_ost):
    for a, b in zip(sum_sst.points, sum_ost.points):
        assert b.utilization_pct <= a.utilization_pct, f"{a.snr_db} dB"


def _gap_sweep(snr):
    return [run_sweep(_config(snr_points_db=[snr], ber=ber)).points[0].utilization_pct
            for ber in (None, 1e-3, 1e-5)]


def test_gap_raises_utilization_at_25db():
    plain, ber3, ber5 = _gap_sweep(25.0)
    assert plain < ber3 and plain < ber5
    # neither BER target's delay crossover is reached here; only the allocation shape differs
    assert abs(ber5 - ber3) < 0.5


def test_gap_ordering_at_30db():
    plain, ber3, ber5 = _gap_sweep(30.0)
    assert plain <= ber3 <= ber5
    assert ber3 - plain >= 20.0


def test_minmax_switches_less_than_sum(sum_sst):
    mm = run_sweep(_config(problem="minmax", snr_points_db=[25.0])).points[0]
    assert mm.utilization_pct <= _util(sum_sst, 25.0)
    assert mm.improvement_pct >= 0.0
