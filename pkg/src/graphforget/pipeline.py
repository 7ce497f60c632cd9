"""End-to-end experiment pipeline: data, source/gold training, unlearning,
evaluation, and artifact persistence."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import METHOD_DISTILL, ExperimentConfig, config_text
from .graphs import (
    Graph,
    EdgeSplit,
    ForgetSet,
    delete_nodes,
    generate_sbm,
    load_graph,
    sample_forget_edges,
    split_edges,
)
from .metrics import (
    EvalReport,
    assemble_report,
    eval_forget,
    eval_retain,
    flops_estimate,
    mi_ratio,
)
from .models import ModelParams, save_params
from .reporting import (
    render_report_figure,
    render_trace_figure,
    write_history_csv,
    write_report_csv,
    write_report_json,
    write_timing_csv,
    write_trace_csv,
)
from .training import train
from .unlearning import UnlearnTrace, distill_unlearn, grad_ascent_unlearn, make_destroyer

_SEED_STAGES = ("split", "train", "forget", "gold", "destroyer", "unlearn", "eval", "calib")


class StageError(RuntimeError):
    """Failure wrapped with the pipeline stage it happened in."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.__cause__ = cause


def derive_seeds(master: int) -> dict:
    """Stable per-stage seeds from the master seed."""
    state = np.random.SeedSequence(master).generate_state(len(_SEED_STAGES))
    return {name: int(x) for name, x in zip(_SEED_STAGES, state)}


@dataclass
class PipelineResult:
    report: EvalReport
    out_dir: Path
    baselines: dict = field(default_factory=dict)
    stage_seconds: dict = field(default_factory=dict)
    trace: UnlearnTrace | None = None
    source: ModelParams | None = None
    gold: ModelParams | None = None
    unlearned: ModelParams | None = None


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def build_dataset(cfg: ExperimentConfig) -> Graph:
    if cfg.dataset_kind == "sbm":
        s = cfg.sbm
        return generate_sbm(s.blocks, s.per_block, s.p_in, s.p_out, s.feature_dim, cfg.seed)
    f = cfg.files
    return load_graph(f.edges, f.features, f.feature_dim)


def build_forget(cfg: ExperimentConfig, graph: Graph, split: EdgeSplit, seeds: dict) -> ForgetSet:
    if cfg.locality == "node":
        return delete_nodes(graph, list(cfg.nodes), split)
    return sample_forget_edges(graph, split, cfg.forget_ratio, cfg.locality, seeds["forget"])


def run_pipeline(cfg: ExperimentConfig, write_artifacts: bool = True) -> PipelineResult:
    """Execute the full protocol: load/generate, split, train the source,
    sample the forget set, retrain the reference, unlearn, evaluate, report."""
    seeds = derive_seeds(cfg.seed)
    out = Path(cfg.out_dir)
    if write_artifacts:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(config_text(cfg), encoding="ascii")

    graph = _stage("dataset", build_dataset, cfg)
    split = _stage("split", split_edges, graph, cfg.val_frac, cfg.test_frac, seeds["split"])

    stage_seconds: dict[str, float] = {}

    def timed_train(train_edges, seed):
        t0 = time.perf_counter()
        params, history = train(
            graph, train_edges, split.val, split.val_neg,
            replace(cfg.train, seed=seed), arch=cfg.arch, hidden=cfg.hidden,
        )
        return params, history, time.perf_counter() - t0

    source, src_history, src_secs = _stage("train-source", timed_train, split.train, seeds["train"])
    stage_seconds["train_source"] = src_secs
    if write_artifacts:
        save_params(source, out / "checkpoint_source.txt")
        write_history_csv(out / "history_source.csv", src_history)

    forget = _stage("forget", build_forget, cfg, graph, split, seeds)

    gold, gold_history, gold_secs = _stage("train-gold", timed_train, forget.retain, seeds["gold"])
    stage_seconds["train_gold"] = gold_secs
    if write_artifacts:
        save_params(gold, out / "checkpoint_gold.txt")
        write_history_csv(out / "history_gold.csv", gold_history)

    def do_unlearn():
        ucfg = replace(cfg.unlearn, seed=seeds["unlearn"])
        t0 = time.perf_counter()
        if cfg.method == METHOD_DISTILL:
            destroyer = make_destroyer(cfg.destroyer_kind(), source, forget, graph, seeds["destroyer"])
            params, trace = distill_unlearn(source, graph, split, forget, destroyer, ucfg)
        else:
            params = grad_ascent_unlearn(
                source, graph, split, forget, ucfg.epochs, ucfg.lr, seeds["unlearn"]
            )
            trace = UnlearnTrace()
        return params, trace, time.perf_counter() - t0

    unlearned, trace, unlearn_secs = _stage("unlearn", do_unlearn)
    stage_seconds["unlearn"] = unlearn_secs
    if write_artifacts:
        save_params(unlearned, out / "checkpoint_unlearned.txt")
        write_trace_csv(out / "trace.csv", trace)
        write_timing_csv(out / "timing.csv", stage_seconds, trace)
        if len(trace):
            render_trace_figure(trace, out / "trace.png")

    def do_eval():
        es, cs = seeds["eval"], seeds["calib"]
        baselines = {
            "source": {
                "auc_retain": eval_retain(source, graph, split, forget, es),
                "auc_forget": eval_forget(source, graph, split, forget, es),
            },
            "gold": {
                "auc_retain": eval_retain(gold, graph, split, forget, es),
                "auc_forget": eval_forget(gold, graph, split, forget, es),
                "mi_ratio": mi_ratio(source, gold, graph, split, forget, cs),
            },
        }
        report = assemble_report(
            dataset=cfg.dataset_name,
            arch=cfg.arch,
            strategy=(str(cfg.unlearn.strategy) if cfg.method == METHOD_DISTILL else cfg.method),
            locality=cfg.locality,
            ratio=float(cfg.forget_ratio),
            seed=cfg.seed,
            auc_retain=eval_retain(unlearned, graph, split, forget, es),
            auc_forget=eval_forget(unlearned, graph, split, forget, es),
            mi_ratio=mi_ratio(source, unlearned, graph, split, forget, cs),
            unlearn_seconds=unlearn_secs,
            flops_forward=flops_estimate(cfg.arch, (graph.feature_dim, *cfg.hidden), graph),
        )
        return report, baselines

    report, baselines = _stage("evaluate", do_eval)
    if write_artifacts:
        _stage("report", _write_report_artifacts, out, report, baselines, seeds, stage_seconds)

    return PipelineResult(
        report=report,
        out_dir=out,
        baselines=baselines,
        stage_seconds=stage_seconds,
        trace=trace,
        source=source,
        gold=gold,
        unlearned=unlearned,
    )


def _write_report_artifacts(out: Path, report, baselines, seeds, stage_seconds) -> None:
    write_report_json(out / "report.json", report, baselines, seeds)
    write_report_csv(out / "report.csv", report)
    render_report_figure(report, baselines, stage_seconds, out / "report.png")


def sweep(cfg: ExperimentConfig, axes: dict) -> Path:
    """Cartesian sweep over axis values; one run_pipeline per point, rows
    appended to a single CSV. Failures are recorded in the row and the sweep
    continues. Per-run seeds are the base seed plus the run index."""
    from itertools import product

    from .reporting import append_sweep_row

    valid = {"ratio", "unlearn_lr", "strategy", "locality"}
    unknown = set(axes) - valid
    if unknown:
        raise ValueError(f"unknown sweep axes: {sorted(unknown)} (valid: {sorted(valid)})")
    names = [k for k in ("ratio", "unlearn_lr", "strategy", "locality") if k in axes]
    if not names or any(len(axes[k]) == 0 for k in names):
        raise ValueError("sweep needs at least one non-empty axis")

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "sweep.csv"
    for run_index, values in enumerate(product(*(axes[k] for k in names))):
        point = dict(zip(names, values))
        run_cfg = replace(
            cfg,
            seed=cfg.seed + run_index,
            out_dir=str(out / f"run_{run_index:03d}"),
            forget_ratio=float(point.get("ratio", cfg.forget_ratio)),
            locality=point.get("locality", cfg.locality),
            unlearn=replace(
                cfg.unlearn,
                lr=float(point.get("unlearn_lr", cfg.unlearn.lr)),
                strategy=int(point.get("strategy", cfg.unlearn.strategy)),
            ),
        )
        echo = {
            "dataset": run_cfg.dataset_name,
            "arch": run_cfg.arch,
            "strategy": str(run_cfg.unlearn.strategy),
            "locality": run_cfg.locality,
            "ratio": float(run_cfg.forget_ratio),
            "seed": run_cfg.seed,
        }
        try:
            result = run_pipeline(run_cfg)
        except Exception as exc:
            append_sweep_row(csv_path, echo, error=str(exc))
            continue
        append_sweep_row(csv_path, result.report.json_dict(include_timing=True))
    return csv_path
