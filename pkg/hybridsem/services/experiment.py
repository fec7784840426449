"""Monte-Carlo sweep over SNR points.

Seed layout (spawn keys under the master seed):
  (0,)             corpus
  (1, s, t, q)     QoS thresholds of trial t, QoS realization q at SNR index s
  (2, s, t)        channel of trial t at SNR index s
The association policy is not part of any key, so SST and OST runs see the
same channels and thresholds.
"""
import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import ValidationError

from hybridsem.errors import ConfigError, InfeasibleSelection
from hybridsem.schemas import (
    ExperimentConfig,
    RunMetrics,
    SimilarityCurve,
    SnrPointMetrics,
    TextPartition,
)
from hybridsem.services.association import assign_ost, assign_sst
from hybridsem.services.channel_model import dbm_to_watt, path_loss, power_for_snr, sample_channels
from hybridsem.services.link_model import SubcarrierProblem, gamma_from_ber
from hybridsem.services.minmax_solver import equal_delay_allocation, minmax_heuristic
from hybridsem.services.similarity_model import curve_for
from hybridsem.services.sum_solver import alternate_optimize, solve_p2
from hybridsem.services.text_model import draw_thresholds, generate_text, subcarrier_loads
from hybridsem.utils.audit import dbg, run_write

COLUMNS = ("snr_dB", "utilization_pct", "improvement_pct", "mean_delay_s", "trials_ok", "trials_infeasible")
_FIELDS = ("snr_db", "utilization_pct", "improvement_pct", "mean_delay_s", "trials_ok", "trials_infeasible")

FULL_TRIALS = 500
FULL_QOS_TRIALS = 10

ResultFormat = Literal["csv", "text"]


def derive_seed(master: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master, spawn_key=tuple(int(k) for k in keys))


@dataclass
class SweepContext:
    config: ExperimentConfig
    partition: TextPartition
    words: np.ndarray
    chars: np.ndarray
    real_count: int
    sst_groups: np.ndarray
    curve: SimilarityCurve
    gap: float
    mean_gain: float
    bandwidth: float
    noise_psd: float

    @property
    def P(self) -> int:
        return int(self.words.size)


@dataclass
class TrialResult:
    utilization: float
    improvement: float
    delay: float
    baseline: float


def prepare(config: ExperimentConfig) -> SweepContext:
    """Everything shared by all trials of a sweep: corpus, curve, Γ, l_p, W."""
    cfg = config
    corpus = generate_text(cfg.num_sentences, cfg.word_range, cfg.chars_per_word, derive_seed(cfg.rng_seed, 0))
    partition = corpus.with_subcarriers(cfg.L)
    ph = cfg.physical
    return SweepContext(
        config=cfg,
        partition=partition,
        words=partition.word_counts(),
        chars=partition.char_counts(),
        real_count=corpus.P,
        sst_groups=assign_sst(partition, cfg.L).groups(),
        curve=curve_for(cfg.k, cfg.curve_path, cfg.m_sat),
        gap=1.0 if cfg.ber is None else gamma_from_ber(cfg.ber),
        mean_gain=path_loss(ph.carrier_freq_hz, ph.cell_radius_m, ph.path_loss_exp),
        bandwidth=ph.total_bandwidth_hz / cfg.L,
        noise_psd=dbm_to_watt(ph.noise_psd_dbm_hz),
    )


def _thresholds(ctx: SweepContext, s: int, t: int, q: int) -> np.ndarray:
    cfg = ctx.config
    out = np.zeros(ctx.P)
    out[:ctx.real_count] = draw_thresholds(ctx.real_count, cfg.L, cfg.qos_range,
                                           derive_seed(cfg.rng_seed, 1, s, t, q), cfg.qos_granularity)
    return out


def _shannon_objective(cfg: ExperimentConfig, problem: SubcarrierProblem) -> float:
    mask = np.zeros(problem.L, dtype=bool)
    if cfg.problem == "sum":
        powers, _ = solve_p2(problem, mask)
        return problem.objective_sum(powers, mask)
    powers, _ = equal_delay_allocation(problem, ~mask, problem.p_tot)
    return problem.objective_max(powers, mask)


def run_trial(ctx: SweepContext, s: int, t: int, q: int) -> TrialResult:
    """Baseline (all-Shannon SST) and the configured scheme on one realization."""
    cfg = ctx.config
    p_tot = power_for_snr(cfg.snr_points_db[s], ctx.mean_gain, ctx.noise_psd, ctx.bandwidth)
    channels = sample_channels(cfg.L, ctx.mean_gain, derive_seed(cfg.rng_seed, 2, s, t),
                               bandwidth=ctx.bandwidth, noise_psd=ctx.noise_psd)
    thresholds = _thresholds(ctx, s, t, q)

    bits, words, m_max = subcarrier_loads(ctx.words, ctx.chars, thresholds, ctx.sst_groups)
    base_problem = SubcarrierProblem.from_loads(channels, bits, words, m_max, None, p_tot, ctx.gap, k=cfg.k)
    baseline = _shannon_objective(cfg, base_problem)

    if cfg.association == "ost":
        groups = assign_ost(ctx.partition, channels).groups()
        bits, words, m_max = subcarrier_loads(ctx.words, ctx.chars, thresholds, groups)
    curve = ctx.curve if cfg.scheme == "hybrid" else None
    problem = SubcarrierProblem.from_loads(channels, bits, words, m_max, curve, p_tot, ctx.gap, k=cfg.k)

    utilization = 0.0
    if cfg.scheme == "shannon":
        delay = _shannon_objective(cfg, problem)
    elif cfg.problem == "sum":
        state = alternate_optimize(problem, cfg.max_iters)
        delay, utilization = state.objective, state.utilization
    else:
        mm = minmax_heuristic(problem, cfg.candidate_order)
        delay, utilization = mm.objective, mm.utilization
    improvement = 0.0 if baseline == 0 else 100.0 * (baseline - delay) / baseline
    return TrialResult(utilization=utilization, improvement=improvement, delay=delay, baseline=baseline)


def run_point(ctx: SweepContext, s: int) -> tuple[SnrPointMetrics, list[dict]]:
    cfg = ctx.config
    results: list[TrialResult] = []
    infeasible: list[dict] = []
    for t in range(cfg.trials):
        for q in range(cfg.qos_trials):
            try:
                results.append(run_trial(ctx, s, t, q))
            except InfeasibleSelection as e:
                infeasible.append({"type": "trial_infeasible", "snr_dB": cfg.snr_points_db[s],
                                   "trial": t, "qos": q, "msg": str(e)})
    n = len(results)

    def mean(attr: str) -> float:
        return math.fsum(getattr(r, attr) for r in results) / n if n else float("nan")

    metrics = SnrPointMetrics(
        snr_db=cfg.snr_points_db[s],
        utilization_pct=mean("utilization") if n else 0.0,
        improvement_pct=mean("improvement"),
        mean_delay_s=mean("delay"),
        trials_ok=n,
        trials_infeasible=len(infeasible),
    )
    return metrics, infeasible


def _point_worker(args: tuple[ExperimentConfig, int]) -> tuple[SnrPointMetrics, list[dict]]:
    config, s = args
    return run_point(prepare(config), s)


def run_sweep(config: ExperimentConfig, run_id: Optional[str] = None) -> RunMetrics:
    """All SNR points of a config; identical output for any worker count."""
    cfg = config
    run_id = run_id or cfg.run_id
    run_write(run_id, {"type": "sweep_start", "config": cfg.model_dump(mode="json")})
    n_points = len(cfg.snr_points_db)
    if cfg.workers > 1 and n_points > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, n_points)) as pool:
            outcomes = list(pool.map(_point_worker, [(cfg, s) for s in range(n_points)]))
    else:
        ctx = prepare(cfg)
        outcomes = [run_point(ctx, s) for s in range(n_points)]
    # events are written in SNR order after the points finish, whatever the worker count
    points = []
    for s, (metrics, infeasible) in enumerate(outcomes):
        run_write(run_id, {"type": "point_start", "snr_dB": cfg.snr_points_db[s]})
        for rec in infeasible:
            run_write(run_id, rec)
        run_write(run_id, {"type": "point_end", **metrics.model_dump()})
        dbg(run_id, f"[sweep] {metrics.snr_db:g} dB util={metrics.utilization_pct:.2f}% "
                    f"impr={metrics.improvement_pct:.3f}% ok={metrics.trials_ok}")
        points.append(metrics)
    run_write(run_id, {"type": "sweep_end", "points": n_points})
    return RunMetrics(points=points, problem=cfg.problem, scheme=cfg.scheme, association=cfg.association)


def _fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    return f"{v:.9g}"


def emit_results(metrics: RunMetrics, path: str | Path, fmt: ResultFormat = "csv") -> None:
    """One row per SNR point, fixed columns, 9 significant digits."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    rows = [[_fmt(getattr(p, f)) for f in _FIELDS] for p in metrics.points]
    try:
        if fmt == "csv":
            with path.open("w", encoding="utf-8", newline="") as f:
                w = csv.writer(f, lineterminator="\n")
                w.writerow(COLUMNS)
                w.writerows(rows)
        elif fmt == "text":
            # 9 桁に丸めた値をそのまま数値として書く
            doc = {"columns": list(COLUMNS),
                   "rows": [{c: (int(v) if f.startswith("trials") else float(v))
                             for c, f, v in zip(COLUMNS, _FIELDS, row)} for row in rows]}
            with path.open("w", encoding="utf-8") as f:
                yaml.safe_dump(doc, f, sort_keys=False)
        else:
            raise ConfigError(f"unknown result format: {fmt}")
    except OSError as e:
        raise ConfigError(f"cannot write results to {path}: {e}") from e


def read_results(path: str | Path, fmt: ResultFormat | None = None) -> RunMetrics:
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "text")
    if fmt == "csv":
        with path.open("r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or tuple(header) != COLUMNS:
                raise ConfigError(f"{path}: unexpected header {header}")
            raw = [dict(zip(COLUMNS, row)) for row in reader if row]
    else:
        with path.open("r", encoding="utf-8") as f:
            doc = yaml.safe_load(f) or {}
        raw = doc.get("rows") or []
    points = []
    for row in raw:
        points.append(SnrPointMetrics(
            snr_db=float(row["snr_dB"]),
            utilization_pct=float(row["utilization_pct"]),
            improvement_pct=float(row["improvement_pct"]),
            mean_delay_s=float(row["mean_delay_s"]),
            trials_ok=int(row["trials_ok"]),
            trials_infeasible=int(row["trials_infeasible"]),
        ))
    return RunMetrics(points=points)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with Path(path).open("r", encoding="utf-8") as f:
            doc = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        return ExperimentConfig.model_validate(doc)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        yaml.safe_dump(config.model_dump(mode="json"), f, sort_keys=False)


def full_scale(config: ExperimentConfig) -> ExperimentConfig:
    """500 channel x 10 QoS realizations."""
    return config.model_copy(update={"trials": FULL_TRIALS, "qos_trials": FULL_QOS_TRIALS})
