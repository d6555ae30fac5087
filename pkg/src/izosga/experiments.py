"""Experiment recipes, checkpoints and CSV/SVG emission.

Recipes
-------
``sweep``          constant oracle budgets, one curve per budget plus a random-IRS baseline
``schedule``       budget schedules that change at fixed iteration marks
``train-deploy``   train with one budget, freeze the IRS, evaluate other budgets
``physical``       ``sweep`` on the varactor IRS

Per-run seeds come from ``derive_seed(spec_seed, seed_index, budget_index,
stream)``, a counter-based SeedSequence derivation, so every run can be
reproduced in isolation and worker assignment never changes results.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import ConfigError, LoadedScenario, build_optimizer, load_scenario, read_toml, resolve_path
from .irs import ParameterBox
from .optimizer import (
    OptimizerConfig,
    evaluate_fixed,
    izosga_runs,
    lemma3_check,
    normalize_schedule,
    random_thetas,
)

logger = logging.getLogger(__name__)

CSV_HEADER = "iteration,mean_sumrate_bits,std_sumrate_bits,budget,eps_tilde_mean"
DEPLOY_HEADER = "budget,mean_sumrate_bits,std_sumrate_bits,samples_per_seed,seeds"
CHECKPOINT_VERSION = 1

STREAM_RUN, STREAM_BASELINE, STREAM_DEPLOY = 0, 1, 2
RECIPES = ("sweep", "schedule", "train-deploy", "physical")


def derive_seed(spec_seed: int, seed_index: int, budget_index: int, stream: int = 0) -> int:
    """64-bit run seed from ``(spec_seed, seed_index, budget_index, stream)``."""
    ss = np.random.SeedSequence(entropy=int(spec_seed), spawn_key=(int(seed_index), int(budget_index), int(stream)))
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


# ---------------------------------------------------------------------------
# experiment loading


@dataclass
class ExperimentSpec:
    name: str
    recipe: str
    scenario: LoadedScenario
    optimizer: OptimizerConfig
    seeds: list
    output: Path
    params: dict = field(default_factory=dict)
    resolved: dict = field(default_factory=dict, repr=False)

    @property
    def spec_seed(self) -> int:
        return self.optimizer.seed

    def environment(self):
        return self.scenario.environment()


EXPERIMENT_DEFAULTS = {
    "name": "experiment",
    "recipe": "sweep",
    "irs_kind": None,
    "seeds": 1,
    "output": "results",
    "budgets": [20],
    "window_fraction": 0.05,
    "baseline": True,
    "schedules": {},
    "train_budget": 20,
    "deploy_budgets": [1, 2, 3, 4, 5],
    "deploy_iterations": 2000,
    "svg_smoothing": 200,
}


def parse_seeds(value) -> list:
    """``N`` means indices ``0..N-1``; a list is taken as explicit indices."""
    if isinstance(value, str):
        value = value.strip()
        if "," in value or value.startswith("["):
            value = [int(v) for v in value.strip("[]").split(",") if v.strip()]
        else:
            value = int(value)
    if isinstance(value, (int, np.integer)):
        if value < 1:
            raise ValueError("seed count must be >= 1")
        return list(range(int(value)))
    seeds = [int(v) for v in value]
    if not seeds:
        raise ValueError("seed list is empty")
    return seeds


def load_experiment(path, overrides: dict | None = None) -> ExperimentSpec:
    """Read an experiment file; its ``scenario`` key is resolved relative to it."""
    path = resolve_path(path)
    raw = read_toml(path)
    exp = dict(EXPERIMENT_DEFAULTS)
    exp.update(raw.get("experiment", {}))
    exp.update({k: v for k, v in (overrides or {}).items() if v is not None})
    problems = []
    unknown = set(exp) - set(EXPERIMENT_DEFAULTS) - {"scenario"}
    if unknown:
        problems.append(f"experiment has unknown keys {sorted(unknown)}")
    if exp["recipe"] not in RECIPES:
        problems.append(f"experiment.recipe must be one of {RECIPES}, got {exp['recipe']!r}")
    if "scenario" not in exp:
        problems.append("experiment.scenario (path to scenario file) is required")
    try:
        seeds = parse_seeds(exp["seeds"])
    except (ValueError, TypeError) as exc:
        problems.append(f"experiment.seeds: {exc}")
        seeds = []
    if not 0 < float(exp["window_fraction"]) <= 1:
        problems.append("experiment.window_fraction must lie in (0, 1]")
    schedules = {}
    for label, sched in dict(exp["schedules"]).items():
        try:
            schedules[label] = normalize_schedule([tuple(e) for e in sched])
        except (ValueError, TypeError) as exc:
            problems.append(f"experiment.schedules.{label}: {exc}")
    if exp["recipe"] == "schedule" and not schedules:
        problems.append("schedule recipe needs experiment.schedules")
    if problems:
        raise ConfigError(path, problems)
    scenario_path = Path(exp["scenario"])
    if not scenario_path.is_absolute():
        candidate = path.parent / scenario_path
        scenario_path = candidate if candidate.exists() else scenario_path
    kind = "varactor" if exp["recipe"] == "physical" else exp["irs_kind"]
    loaded = load_scenario(scenario_path, kind=kind)
    optimizer, opt_resolved = build_optimizer(raw.get("optimizer", {}), path)
    exp["seeds"] = seeds
    exp["schedules"] = {k: [[s, b.max_iterations] for s, b in v] for k, v in schedules.items()}
    resolved = {"experiment": exp, "optimizer": opt_resolved, "scenario": loaded.resolved,
                "scenario_fingerprint": loaded.fingerprint}
    params = dict(exp)
    params["schedules"] = schedules
    return ExperimentSpec(
        name=exp["name"], recipe=exp["recipe"], scenario=loaded, optimizer=optimizer,
        seeds=seeds, output=Path(exp["output"]), params=params, resolved=resolved,
    )


# ---------------------------------------------------------------------------
# aggregation and emission


@dataclass
class CurveAggregate:
    label: str
    mean: np.ndarray
    std: np.ndarray
    budget: np.ndarray
    eps_mean: np.ndarray | None = None
    runs: int = 0

    @classmethod
    def from_curves(cls, label, curves, budget, eps=None):
        curves = np.atleast_2d(np.asarray(curves, dtype=float))
        eps_mean = None
        if eps is not None:
            eps = np.atleast_2d(np.asarray(eps, dtype=float))
            seen = np.isfinite(eps).any(axis=0)
            eps_mean = np.full(eps.shape[1], np.nan)
            eps_mean[seen] = np.nanmean(eps[:, seen], axis=0)
        return cls(label, curves.mean(axis=0), curves.std(axis=0), np.asarray(budget, dtype=int),
                   eps_mean, curves.shape[0])


def _fmt(x: float) -> str:
    return "" if not np.isfinite(x) else f"{x:.10f}"


def emit_csv(aggregate: CurveAggregate, path) -> Path:
    """Write ``iteration, mean, std, budget, eps_tilde_mean`` rows."""
    path = Path(path)
    n = aggregate.mean.size
    lengths = {aggregate.std.size, aggregate.budget.size}
    if aggregate.eps_mean is not None:
        lengths.add(aggregate.eps_mean.size)
    if n == 0:
        raise ValueError("cannot emit an empty curve")
    if lengths != {n}:
        raise ValueError(f"series lengths differ in aggregate {aggregate.label!r}")
    eps = aggregate.eps_mean if aggregate.eps_mean is not None else np.full(n, np.nan)
    lines = [CSV_HEADER]
    for t in range(n):
        lines.append(f"{t},{_fmt(aggregate.mean[t])},{_fmt(aggregate.std[t])},{int(aggregate.budget[t])},{_fmt(eps[t])}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc
    return path


def trailing_mean(values, window: int) -> np.ndarray:
    """Mean over the last ``window`` samples (fewer at the start)."""
    values = np.asarray(values, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(1, values.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def emit_svg(curves: dict, path, title: str = "", smooth: int = 200,
             xlabel: str = "iteration", ylabel: str = "sumrate [bits/s/Hz]") -> Path:
    """Polyline chart, one series per entry of ``curves``; output is byte-stable."""
    if not curves:
        raise ValueError("no curves to plot")
    series = {k: np.asarray(v, dtype=float) for k, v in curves.items()}
    lengths = {v.size for v in series.values()}
    if len(lengths) != 1 or 0 in lengths:
        raise ValueError("all series must be nonempty and of equal length")
    n = lengths.pop()
    if smooth and smooth > 1:
        series = {k: trailing_mean(v, smooth) for k, v in series.items()}
    width, height, left, right, top, bottom = 720, 440, 70, 160, 40, 50
    pw, ph = width - left - right, height - top - bottom
    lo = min(float(v.min()) for v in series.values())
    hi = max(float(v.max()) for v in series.values())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    stride = max(1, n // 500)

    def x_of(i):
        return left + pw * (i / max(n - 1, 1))

    def y_of(v):
        return top + ph * (1 - (v - lo) / (hi - lo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for j in range(5):
        v = lo + (hi - lo) * j / 4
        out.append(f'<text x="{left - 6}" y="{y_of(v) + 4:.1f}" text-anchor="end" font-size="11">{v:.2f}</text>')
        i = (n - 1) * j / 4
        out.append(f'<text x="{x_of(i):.1f}" y="{top + ph + 16}" text-anchor="middle" font-size="11">{int(round(i))}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{ylabel}</text>')
    for k, (label, v) in enumerate(series.items()):
        color = _PALETTE[k % len(_PALETTE)]
        idx = list(range(0, n, stride))
        if idx[-1] != n - 1:
            idx.append(n - 1)
        pts = " ".join(f"{x_of(i):.2f},{y_of(v[i]):.2f}" for i in idx)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 14 + 18 * k
        out.append(f'<line x1="{left + pw + 12}" y1="{ly - 4}" x2="{left + pw + 32}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly}" font-size="11">{label}</text>')
    out.append("</svg>")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc
    return path


def final_window(curves, fraction: float) -> tuple[np.ndarray, int]:
    """Per-run mean over the last ``ceil(fraction * len)`` samples."""
    curves = np.atleast_2d(np.asarray(curves, dtype=float))
    w = max(1, math.ceil(fraction * curves.shape[1]))
    return curves[:, -w:].mean(axis=1), w


def _dump_json(obj, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


# ---------------------------------------------------------------------------
# checkpoints


class CheckpointMismatchError(RuntimeError):
    pass


@dataclass
class Checkpoint:
    irs_kind: str
    box: ParameterBox
    thetas: np.ndarray  # one row per seed
    scenario_fingerprint: str
    metadata: dict = field(default_factory=dict)
    returned_thetas: np.ndarray | None = None
    version: int = CHECKPOINT_VERSION


def _encode(values) -> list:
    return [format(float(v), ".17g") for v in np.asarray(values, dtype=float).reshape(-1)]


def save_checkpoint(ckpt: Checkpoint, path) -> Path:
    thetas = np.atleast_2d(ckpt.thetas)
    if not all(ckpt.box.contains(t) for t in thetas):
        raise ValueError("checkpoint theta lies outside its box")
    doc = {
        "format_version": ckpt.version,
        "irs_kind": ckpt.irs_kind,
        "box": {"lower": _encode(ckpt.box.lower), "upper": _encode(ckpt.box.upper)},
        "theta": [_encode(t) for t in thetas],
        "returned_theta": None if ckpt.returned_thetas is None else [_encode(t) for t in np.atleast_2d(ckpt.returned_thetas)],
        "scenario_fingerprint": ckpt.scenario_fingerprint,
        "metadata": ckpt.metadata,
    }
    path = Path(path)
    _dump_json(doc, path)
    return path


def load_checkpoint(path, expected_fingerprint: str | None = None) -> Checkpoint:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    box = ParameterBox(np.array([float(v) for v in doc["box"]["lower"]]),
                       np.array([float(v) for v in doc["box"]["upper"]]))
    thetas = np.array([[float(v) for v in row] for row in doc["theta"]])
    returned = doc.get("returned_theta")
    if returned is not None:
        returned = np.array([[float(v) for v in row] for row in returned])
    if expected_fingerprint is not None and doc["scenario_fingerprint"] != expected_fingerprint:
        raise CheckpointMismatchError(
            f"checkpoint {path} was trained on scenario {doc['scenario_fingerprint'][:12]}..., "
            f"not {expected_fingerprint[:12]}..."
        )
    if not all(box.contains(t) for t in thetas):
        raise ValueError(f"checkpoint {path} holds theta outside its box")
    return Checkpoint(doc["irs_kind"], box, thetas, doc["scenario_fingerprint"], doc.get("metadata", {}), returned)


# ---------------------------------------------------------------------------
# recipes


def _run_block(env, config, run_seeds, baseline_seeds, want_baseline):
    """One schedule over all seeds (worker entry point)."""
    runs = izosga_runs(env, config, run_seeds, on_failure="drop")
    base = None
    if want_baseline:
        thetas = random_thetas(env, baseline_seeds)
        base = evaluate_fixed(env, thetas, config.budget_schedule, config.iterations, baseline_seeds,
                              warm_start=config.warm_start)
    return runs, base


def _execute(tasks, workers: int):
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_block, *t) for t in tasks]
            return [f.result() for f in futures]
    return [_run_block(*t) for t in tasks]


def _run_schedules(spec: ExperimentSpec, labelled: list, workers: int, baseline: bool):
    env = spec.environment()
    tasks = []
    for b_index, (_, schedule) in enumerate(labelled):
        config = replace(spec.optimizer, budget_schedule=schedule)
        run_seeds = [derive_seed(spec.spec_seed, s, b_index, STREAM_RUN) for s in spec.seeds]
        base_seeds = [derive_seed(spec.spec_seed, s, b_index, STREAM_BASELINE) for s in spec.seeds]
        tasks.append((env, config, run_seeds, base_seeds, baseline))
    return env, _execute(tasks, workers)


def _summarize_block(label, runs, base, seeds, fraction):
    ok = [(s, r) for s, r in zip(seeds, runs) if not r.failed]
    failed = [{"label": label, "seed_index": s, "error": r.failure} for s, r in zip(seeds, runs) if r.failed]
    curves = np.array([r.sumrate_curve for _, r in ok]) if ok else np.empty((0, runs[0].sumrate_curve.size))
    budget = runs[0].budget_curve
    eps = None
    if ok and ok[0][1].error_curve is not None:
        eps = np.array([r.error_curve for _, r in ok])
    entry = {"runs": len(ok), "failed": len(failed)}
    checks = {}
    if ok:
        per_seed, w = final_window(curves, fraction)
        entry.update(final_window_mean=float(per_seed.mean()), final_window_per_seed=per_seed.tolist(), window=w,
                     seed_indices=[s for s, _ in ok])
        lemma = [lemma3_check(r) for _, r in ok]
        checks["second_moment_bound"] = all(sat for _, sat in lemma)
        entry["lemma3_bound"] = [b for b, _ in lemma]
        entry["mean_sq_grad"] = [r.diagnostics.mean_sq_grad for _, r in ok]
    if base is not None:
        base_seed, w = final_window(base, fraction)
        entry["baseline_final_window_mean"] = float(base_seed.mean())
        entry["baseline_mean"] = float(base.mean())
    agg = CurveAggregate.from_curves(label, curves, budget, eps) if ok else None
    base_agg = CurveAggregate.from_curves(f"{label} random IRS", base, budget) if base is not None else None
    return entry, failed, checks, agg, base_agg


def _write_outputs(spec, out, aggregates, summary, svg: bool, prefix: str):
    out = Path(out)
    files = []
    for key, (agg, base_agg) in aggregates.items():
        if agg is not None:
            files.append(emit_csv(agg, out / f"{prefix}_{key}.csv"))
        if base_agg is not None:
            files.append(emit_csv(base_agg, out / f"baseline_{key}.csv"))
    if svg:
        curves = {}
        for key, (agg, base_agg) in aggregates.items():
            if agg is not None:
                curves[agg.label] = agg.mean
        for key, (agg, base_agg) in aggregates.items():
            if base_agg is not None:
                curves[base_agg.label] = base_agg.mean
                break
        if curves:
            files.append(emit_svg(curves, out / f"{prefix}.svg", title=spec.name,
                                  smooth=int(spec.params.get("svg_smoothing", 200))))
    _dump_json(spec.resolved, out / "resolved_config.json")
    _dump_json(summary, out / "summary.json")
    return files


def run_sweep(spec: ExperimentSpec, out=None, workers: int = 1, svg: bool = False) -> dict:
    """One run per (seed, budget); per-budget mean/std curves and a random-IRS baseline."""
    out = Path(out or spec.output)
    budgets = [int(b) for b in spec.params["budgets"]]
    labelled = [(f"b{b:02d}", normalize_schedule(b)) for b in budgets]
    _, results = _run_schedules(spec, labelled, workers, bool(spec.params.get("baseline", True)))
    summary = {"name": spec.name, "recipe": spec.recipe, "irs_kind": spec.scenario.irs.kind,
               "iterations": spec.optimizer.iterations, "seeds": spec.seeds, "budgets": {}, "failed_runs": [],
               "checks": {}}
    aggregates = {}
    for (key, _), b, (runs, base) in zip(labelled, budgets, results):
        entry, failed, checks, agg, base_agg = _summarize_block(
            f"budget {b}", runs, base, spec.seeds, spec.params["window_fraction"])
        summary["budgets"][key] = dict(entry, budget=b)
        summary["failed_runs"] += failed
        for name, ok in checks.items():
            summary["checks"][name] = summary["checks"].get(name, True) and ok
        aggregates[key] = (agg, base_agg)
    summary["ok"] = not summary["failed_runs"] and all(summary["checks"].values())
    summary["files"] = [p.name for p in _write_outputs(spec, out, aggregates, summary, svg, "sweep")]
    _dump_json(summary, out / "summary.json")
    return summary


def run_physical(spec: ExperimentSpec, out=None, workers: int = 1, svg: bool = False) -> dict:
    if spec.scenario.irs.kind != "varactor":
        raise ValueError("physical recipe needs a varactor IRS")
    return run_sweep(spec, out, workers, svg)


def _segments(schedule, T):
    marks = [s for s, _ in schedule] + [T + 1]
    return [(marks[i], marks[i + 1], b.max_iterations) for i, (_, b) in enumerate(schedule)]


def run_schedule(spec: ExperimentSpec, out=None, workers: int = 1, svg: bool = False) -> dict:
    """Budgets that change at fixed iteration marks; per-segment means in the summary."""
    out = Path(out or spec.output)
    labelled = list(spec.params["schedules"].items())
    _, results = _run_schedules(spec, labelled, workers, bool(spec.params.get("baseline", True)))
    T = spec.optimizer.iterations
    summary = {"name": spec.name, "recipe": spec.recipe, "iterations": T, "seeds": spec.seeds,
               "schedules": {}, "failed_runs": [], "checks": {}}
    aggregates = {}
    for (label, schedule), (runs, base) in zip(labelled, results):
        entry, failed, checks, agg, base_agg = _summarize_block(
            label, runs, base, spec.seeds, spec.params["window_fraction"])
        ok_runs = [r for r in runs if not r.failed]
        if ok_runs:
            curves = np.array([r.sumrate_curve for r in ok_runs])
            entry["segments"] = [
                {"start": a, "stop": b - 1, "budget": budget, "mean": float(curves[:, a:b].mean())}
                for a, b, budget in _segments(schedule, T)
            ]
        entry["schedule"] = [[s, b.max_iterations] for s, b in schedule]
        summary["schedules"][label] = entry
        summary["failed_runs"] += failed
        for name, ok in checks.items():
            summary["checks"][name] = summary["checks"].get(name, True) and ok
        aggregates[label] = (agg, base_agg)
    summary["ok"] = not summary["failed_runs"] and all(summary["checks"].values())
    summary["files"] = [p.name for p in _write_outputs(spec, out, aggregates, summary, svg, "schedule")]
    _dump_json(summary, out / "summary.json")
    return summary


def deploy_table(env, thetas, budgets, samples: int, spec_seed: int, seeds) -> list:
    """Mean sum rate over fresh realizations for each budget with ``theta`` frozen."""
    rows = []
    for b_index, budget in enumerate(budgets):
        dseeds = [derive_seed(spec_seed, s, b_index, STREAM_DEPLOY) for s in seeds]
        curves = evaluate_fixed(env, thetas, int(budget), samples - 1, dseeds)
        per_seed = curves.mean(axis=1)
        rows.append({"budget": int(budget), "mean": float(per_seed.mean()), "std": float(per_seed.std()),
                     "per_seed": per_seed.tolist(), "samples": samples})
    return rows


def emit_deploy_csv(rows, path) -> Path:
    lines = [DEPLOY_HEADER]
    n_seeds = None
    for r in rows:
        n_seeds = len(r["per_seed"])
        lines.append(f"{r['budget']},{_fmt(r['mean'])},{_fmt(r['std'])},{r['samples']},{n_seeds}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def run_train(spec: ExperimentSpec, out=None, workers: int = 1, svg: bool = False) -> dict:
    """Train with ``train_budget`` and persist the checkpoint."""
    out = Path(out or spec.output)
    budget = int(spec.params["train_budget"])
    labelled = [(f"train_b{budget:02d}", normalize_schedule(budget))]
    env, [(runs, base)] = _run_schedules(spec, labelled, workers, bool(spec.params.get("baseline", True)))
    entry, failed, checks, agg, base_agg = _summarize_block(
        f"train budget {budget}", runs, base, spec.seeds, spec.params["window_fraction"])
    ok_runs = [(s, r) for s, r in zip(spec.seeds, runs) if not r.failed]
    if not ok_runs:
        raise RuntimeError("every training run failed")
    curves = np.array([r.sumrate_curve for _, r in ok_runs])
    per_seed, w = final_window(curves, spec.params["window_fraction"])
    terminal = curves[:, -w:].reshape(-1)
    entry["terminal_band"] = [float(terminal.mean() - 2 * terminal.std()), float(terminal.mean() + 2 * terminal.std())]
    ckpt = Checkpoint(
        irs_kind=spec.scenario.irs.kind,
        box=env.box,
        thetas=np.array([r.final_theta for _, r in ok_runs]),
        returned_thetas=np.array([r.returned_theta for _, r in ok_runs]),
        scenario_fingerprint=spec.scenario.fingerprint,
        metadata={"experiment": spec.name, "train_budget": budget, "iterations": spec.optimizer.iterations,
                  "spec_seed": spec.spec_seed, "seed_indices": [s for s, _ in ok_runs]},
    )
    save_checkpoint(ckpt, out / "checkpoint.json")
    summary = {"name": spec.name, "recipe": spec.recipe, "train": entry, "failed_runs": failed, "checks": checks,
               "checkpoint": "checkpoint.json"}
    summary["ok"] = not failed and all(checks.values())
    summary["files"] = [p.name for p in _write_outputs(spec, out, {labelled[0][0]: (agg, base_agg)}, summary, svg, "train")]
    _dump_json(summary, out / "summary.json")
    return summary


def run_deploy(spec: ExperimentSpec, checkpoint_path=None, out=None, use_returned: bool = False) -> dict:
    """Evaluate each deploy budget with the checkpointed IRS frozen."""
    out = Path(out or spec.output)
    ckpt_path = Path(checkpoint_path or out / "checkpoint.json")
    ckpt = load_checkpoint(ckpt_path, expected_fingerprint=spec.scenario.fingerprint)
    if ckpt.irs_kind != spec.scenario.irs.kind:
        raise CheckpointMismatchError(f"checkpoint IRS kind {ckpt.irs_kind!r} != scenario {spec.scenario.irs.kind!r}")
    env = spec.environment()
    thetas = ckpt.returned_thetas if use_returned and ckpt.returned_thetas is not None else ckpt.thetas
    seeds = ckpt.metadata.get("seed_indices", list(range(len(thetas))))
    rows = deploy_table(env, thetas, spec.params["deploy_budgets"], int(spec.params["deploy_iterations"]),
                        spec.spec_seed, seeds)
    emit_deploy_csv(rows, out / "deploy.csv")
    summary = {"name": spec.name, "recipe": "deploy", "checkpoint": str(ckpt_path), "deploy": rows, "ok": True}
    _dump_json(summary, out / "deploy_summary.json")
    return summary


def run_train_deploy(spec: ExperimentSpec, out=None, workers: int = 1, svg: bool = False) -> dict:
    out = Path(out or spec.output)
    summary = run_train(spec, out, workers, svg)
    deploy = run_deploy(spec, out / "checkpoint.json", out)
    summary["deploy"] = deploy["deploy"]
    summary["files"].append("deploy.csv")
    _dump_json(summary, out / "summary.json")
    return summary
