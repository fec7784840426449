from pathlib import Path
import sys
from typing import Annotated, Optional

import numpy as np
import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

# Resolve project root (two levels up from this file: hybridsem/main.py -> project root)
PROJECT_ROOT = Path(__file__).resolve().parent.parent
# Ensure project root on sys.path so `import hybridsem.*` works when running as a script
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from hybridsem.errors import ConfigError, DomainError
from hybridsem.schemas import ExperimentConfig, RunMetrics
from hybridsem.services.experiment import emit_results, full_scale, load_config, run_sweep
from hybridsem.services.similarity_model import default_curve, save_curves
from hybridsem.services.text_model import export_corpus, generate_text, qos_sample

app = typer.Typer(add_completion=False, help="Hybrid semantic/Shannon multi-carrier delay sweeps.")
console = Console()

ConfigOpt = Annotated[Optional[Path], typer.Option("--config", help="YAML ExperimentConfig")]
SnrOpt = Annotated[Optional[str], typer.Option("--snr", help="lo:step:hi in dB, or a single value")]
LOpt = Annotated[Optional[int], typer.Option("--L", help="number of subcarriers")]
KOpt = Annotated[Optional[int], typer.Option("--k", help="semantic symbols per word")]
TrialsOpt = Annotated[Optional[int], typer.Option("--trials", help="channel realizations")]
QosOpt = Annotated[Optional[int], typer.Option("--qos-trials", help="QoS realizations per channel")]
SeedOpt = Annotated[Optional[int], typer.Option("--seed", help="master RNG seed")]
BerOpt = Annotated[Optional[str], typer.Option("--ber", help="target BER, or 'none' for Γ=1")]
AssocOpt = Annotated[Optional[str], typer.Option("--assoc", help="sst | ost")]
OutOpt = Annotated[Optional[Path], typer.Option("--out", help="results file")]
FormatOpt = Annotated[str, typer.Option("--format", help="csv | text")]
FullOpt = Annotated[bool, typer.Option("--full", help="500 x 10 realizations")]
CurveOpt = Annotated[Optional[Path], typer.Option("--curve", help="YAML similarity curves")]
SchemeOpt = Annotated[Optional[str], typer.Option("--scheme", help="hybrid | shannon")]
GranOpt = Annotated[Optional[str], typer.Option("--qos-granularity", help="stream | sentence")]
OrderOpt = Annotated[Optional[str], typer.Option("--order", help="MinMax candidate order")]
ItersOpt = Annotated[Optional[int], typer.Option("--max-iters", help="alternating-optimization rounds")]
WorkersOpt = Annotated[Optional[int], typer.Option("--workers", help="parallel SNR points")]
RunIdOpt = Annotated[Optional[str], typer.Option("--run-id", help="JSONL trace log id")]


def parse_snr(spec: str) -> list[float]:
    """'10:5:35' -> [10, 15, ..., 35]; '25' -> [25]"""
    parts = spec.split(":")
    try:
        values = [float(p) for p in parts]
    except ValueError as e:
        raise ConfigError(f"bad --snr value {spec!r}") from e
    if len(values) == 1:
        return values
    if len(values) != 3:
        raise ConfigError(f"--snr expects lo:step:hi, got {spec!r}")
    lo, step, hi = values
    if step <= 0 or hi < lo:
        raise ConfigError(f"--snr needs step > 0 and hi >= lo: {spec!r}")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 9) for i in range(count)]


def parse_ber(text: str) -> Optional[float]:
    if text.strip().lower() == "none":
        return None
    try:
        return float(text)
    except ValueError as e:
        raise ConfigError(f"bad --ber value {text!r}") from e


def build_config(problem: str, config: Optional[Path], overrides: dict) -> ExperimentConfig:
    base = load_config(config) if config else ExperimentConfig()
    data = base.model_dump()
    data["problem"] = problem
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.model_validate(data)


def render(metrics: RunMetrics, title: str) -> None:
    table = Table(title=title)
    for col in ("SNR [dB]", "utilization [%]", "improvement [%]", "mean delay [s]", "ok", "infeasible"):
        table.add_column(col, justify="right")
    for p in metrics.points:
        table.add_row(f"{p.snr_db:g}", f"{p.utilization_pct:.2f}", f"{p.improvement_pct:.3f}",
                      f"{p.mean_delay_s:.6g}", str(p.trials_ok), str(p.trials_infeasible))
    console.print(table)


def _run(problem: str, config, snr, L, k, trials, qos_trials, seed, ber, assoc, out, fmt, full, curve,
         scheme, granularity, order, max_iters, workers, run_id) -> None:
    try:
        overrides = {
            "snr_points_db": parse_snr(snr) if snr else None,
            "L": L, "k": k, "trials": trials, "qos_trials": qos_trials, "rng_seed": seed,
            "association": assoc, "curve_path": str(curve) if curve else None,
            "scheme": scheme, "qos_granularity": granularity, "candidate_order": order,
            "max_iters": max_iters, "workers": workers, "run_id": run_id,
        }
        cfg = build_config(problem, config, overrides)
        if ber is not None:
            cfg = cfg.model_copy(update={"ber": parse_ber(ber)})
            cfg = ExperimentConfig.model_validate(cfg.model_dump())
        if full:
            cfg = full_scale(cfg)
        if fmt not in ("csv", "text"):
            raise ConfigError(f"--format must be csv or text: {fmt}")
        metrics = run_sweep(cfg)
        render(metrics, f"{problem} / {cfg.scheme} / {cfg.association} / L={cfg.L} k={cfg.k}")
        if out is not None:
            emit_results(metrics, out, fmt)
            console.print(f"[green]wrote[/green] {out}")
    except (ConfigError, DomainError, ValidationError) as e:
        console.print(f"[red]error:[/red] {e}")
        raise typer.Exit(code=2)


@app.command("sum")
def sum_cmd(config: ConfigOpt = None, snr: SnrOpt = None, L: LOpt = None, k: KOpt = None,
            trials: TrialsOpt = None, qos_trials: QosOpt = None, seed: SeedOpt = None, ber: BerOpt = None,
            assoc: AssocOpt = None, out: OutOpt = None, fmt: FormatOpt = "csv", full: FullOpt = False,
            curve: CurveOpt = None, scheme: SchemeOpt = None, granularity: GranOpt = None,
            order: OrderOpt = None, max_iters: ItersOpt = None, workers: WorkersOpt = None,
            run_id: RunIdOpt = None):
    """Minimize the sum of subcarrier delays."""
    _run("sum", config, snr, L, k, trials, qos_trials, seed, ber, assoc, out, fmt, full, curve,
         scheme, granularity, order, max_iters, workers, run_id)


@app.command("minmax")
def minmax_cmd(config: ConfigOpt = None, snr: SnrOpt = None, L: LOpt = None, k: KOpt = None,
               trials: TrialsOpt = None, qos_trials: QosOpt = None, seed: SeedOpt = None, ber: BerOpt = None,
               assoc: AssocOpt = None, out: OutOpt = None, fmt: FormatOpt = "csv", full: FullOpt = False,
               curve: CurveOpt = None, scheme: SchemeOpt = None, granularity: GranOpt = None,
               order: OrderOpt = None, max_iters: ItersOpt = None, workers: WorkersOpt = None,
               run_id: RunIdOpt = None):
    """Minimize the largest subcarrier delay."""
    _run("minmax", config, snr, L, k, trials, qos_trials, seed, ber, assoc, out, fmt, full, curve,
         scheme, granularity, order, max_iters, workers, run_id)


@app.command("curve")
def curve_cmd(k: Annotated[list[int], typer.Option("--k", help="k values")] = [16],
              out: OutOpt = None):
    """Print (and optionally export) the synthetic similarity curves."""
    curves = [default_curve(v) for v in k]
    for c in curves:
        table = Table(title=f"synthetic curve k={c.k} (M_sat={c.m_sat})")
        table.add_column("SNR [dB]", justify="right")
        table.add_column("similarity", justify="right")
        for snr, sim in c.points[::4] + (c.points[-1],):
            table.add_row(f"{snr:g}", f"{sim:.4f}")
        console.print(table)
    if out is not None:
        save_curves(curves, out)
        console.print(f"[green]wrote[/green] {out}")


@app.command("corpus")
def corpus_cmd(out: Annotated[Path, typer.Option("--out", help="JSONL corpus file")],
               P: Annotated[int, typer.Option("--P", help="number of sentences")] = 7296,
               L: LOpt = None, seed: SeedOpt = None,
               granularity: GranOpt = None):
    """Export a synthetic corpus with sampled QoS thresholds."""
    try:
        if seed is not None and seed < 0:
            raise ConfigError(f"--seed must be non-negative: {seed}")
        part = generate_text(P, rng_seed=seed or 0).with_subcarriers(L or 1)
        part = qos_sample(part, rng_seed=seed or 0, granularity=granularity or "sentence")
        export_corpus(part, out)
        console.print(f"[green]wrote[/green] {out} ({part.P} sentences)")
    except (ConfigError, DomainError, ValidationError) as e:
        console.print(f"[red]error:[/red] {e}")
        raise typer.Exit(code=2)


if __name__ == "__main__":
    app()
