"""Command-line interface: train / unlearn / eval / bench / sweep."""
from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from .config import (
    ExperimentConfig,
    FileSpec,
    SbmSpec,
    load_config_file,
    parse_retain_batch,
)
from .graphs import split_edges
from .metrics import assemble_report, eval_forget, eval_retain, flops_estimate, mi_ratio
from .models import load_params, save_params
from .pipeline import (
    StageError,
    build_dataset,
    build_forget,
    derive_seeds,
    run_pipeline,
    sweep,
)
from .reporting import (
    render_report_figure,
    render_trace_figure,
    write_history_csv,
    write_report_csv,
    write_report_json,
    write_timing_csv,
    write_trace_csv,
)
from .training import TrainConfig, train
from .unlearning import (
    UnlearnConfig,
    UnlearnTrace,
    distill_unlearn,
    grad_ascent_unlearn,
    make_destroyer,
)


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI experiment file; flags override its values")
    p.add_argument("--seed", type=int, help="master seed (mandatory unless in config)")
    p.add_argument("--out", help="output directory (env D2D_OUT overrides the default)")
    p.add_argument("--dataset", choices=["sbm", "files"], help="dataset source")
    p.add_argument("--edges", help="edge-list path for --dataset files")
    p.add_argument("--features", help="feature CSV path")
    p.add_argument("--feature-dim", type=int, help="synthetic feature width")
    p.add_argument("--sbm-blocks", type=int)
    p.add_argument("--sbm-per-block", type=int)
    p.add_argument("--sbm-p-in", type=float)
    p.add_argument("--sbm-p-out", type=float)
    p.add_argument("--arch", choices=["gcn", "gin"])
    p.add_argument("--hidden", help="comma list of layer widths, e.g. 128,64")
    p.add_argument("--val-frac", type=float)
    p.add_argument("--test-frac", type=float)
    p.add_argument("--forget-ratio", type=float)
    p.add_argument("--locality", choices=["in", "out", "node"])
    p.add_argument("--nodes", help="comma list of node ids for --locality node")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--lr", type=float, help="training learning rate")
    p.add_argument("--patience", type=int)
    p.add_argument("--neg-ratio", type=int)
    p.add_argument("--fixed-negatives", action="store_true", default=None,
                   help="reuse one negative sample instead of per-epoch resampling")
    p.add_argument("--method", choices=["distill", "gradascent"])
    p.add_argument("--strategy", type=int, choices=[1, 2, 3])
    p.add_argument("--alpha", type=float)
    p.add_argument("--temperature", type=float)
    p.add_argument("--unlearn-epochs", type=int)
    p.add_argument("--unlearn-lr", type=float)
    p.add_argument("--retain-batch", help="int, 'all', or 'auto'")
    p.add_argument("--destroyer", choices=["auto", "random", "negative"])
    p.add_argument("--resample-pairs", action="store_true", default=None)


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config_file(args.config) if args.config else ExperimentConfig()

    def pick(flag, current):
        return current if flag is None else flag

    sbm = SbmSpec(
        blocks=pick(args.sbm_blocks, cfg.sbm.blocks),
        per_block=pick(args.sbm_per_block, cfg.sbm.per_block),
        p_in=pick(args.sbm_p_in, cfg.sbm.p_in),
        p_out=pick(args.sbm_p_out, cfg.sbm.p_out),
        feature_dim=pick(args.feature_dim, cfg.sbm.feature_dim),
    )
    files = FileSpec(
        edges=pick(args.edges, cfg.files.edges),
        features=pick(args.features, cfg.files.features),
        feature_dim=pick(args.feature_dim, cfg.files.feature_dim),
    )
    train_cfg = TrainConfig(
        epochs=pick(args.epochs, cfg.train.epochs),
        lr=pick(args.lr, cfg.train.lr),
        patience=pick(args.patience, cfg.train.patience),
        neg_ratio=pick(args.neg_ratio, cfg.train.neg_ratio),
        resample_negatives=(
            cfg.train.resample_negatives if args.fixed_negatives is None else False
        ),
    )
    unlearn_cfg = UnlearnConfig(
        strategy=pick(args.strategy, cfg.unlearn.strategy),
        alpha=pick(args.alpha, cfg.unlearn.alpha),
        temperature=pick(args.temperature, cfg.unlearn.temperature),
        epochs=pick(args.unlearn_epochs, cfg.unlearn.epochs),
        lr=pick(args.unlearn_lr, cfg.unlearn.lr),
        retain_batch=(
            cfg.unlearn.retain_batch if args.retain_batch is None
            else parse_retain_batch(args.retain_batch)
        ),
        resample_pairs=(
            cfg.unlearn.resample_pairs if args.resample_pairs is None else True
        ),
    )
    seed = pick(args.seed, cfg.seed if args.config else None)
    if seed is None:
        raise SystemExit("error: --seed is mandatory (or set it in the config file)")
    out_dir = args.out or os.environ.get("D2D_OUT") or cfg.out_dir
    nodes = cfg.nodes if args.nodes is None else tuple(
        int(x) for x in args.nodes.replace(" ", "").split(",") if x
    )
    hidden = cfg.hidden if args.hidden is None else tuple(
        int(x) for x in args.hidden.replace(" ", "").split(",") if x
    )
    return ExperimentConfig(
        seed=seed,
        dataset_kind=pick(args.dataset, cfg.dataset_kind),
        sbm=sbm,
        files=files,
        arch=pick(args.arch, cfg.arch),
        hidden=hidden,
        val_frac=pick(args.val_frac, cfg.val_frac),
        test_frac=pick(args.test_frac, cfg.test_frac),
        forget_ratio=pick(args.forget_ratio, cfg.forget_ratio),
        locality=pick(args.locality, cfg.locality),
        nodes=nodes,
        method=pick(args.method, cfg.method),
        destroyer=pick(args.destroyer, cfg.destroyer),
        train=train_cfg,
        unlearn=unlearn_cfg,
        out_dir=out_dir,
    )


def _prepare(cfg: ExperimentConfig):
    seeds = derive_seeds(cfg.seed)
    graph = build_dataset(cfg)
    split = split_edges(graph, cfg.val_frac, cfg.test_frac, seeds["split"])
    return seeds, graph, split


def cmd_train(args) -> int:
    cfg = build_config(args)
    seeds, graph, split = _prepare(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    params, history = train(
        graph, split.train, split.val, split.val_neg,
        replace(cfg.train, seed=seeds["train"]), arch=cfg.arch, hidden=cfg.hidden,
    )
    secs = time.perf_counter() - t0
    save_params(params, out / "checkpoint_source.txt")
    write_history_csv(out / "history_source.csv", history)
    write_timing_csv(out / "timing.csv", {"train_source": secs})
    best = max((h[2] for h in history if h[2] == h[2]), default=float("nan"))
    print(f"trained {cfg.arch} on {len(split.train)} edges; best val AUC {best:.4f}")
    print(f"checkpoint: {out / 'checkpoint_source.txt'}")
    return 0


def cmd_unlearn(args) -> int:
    cfg = build_config(args)
    seeds, graph, split = _prepare(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.source:
        source = load_params(args.source)
    else:
        source, _ = train(
            graph, split.train, split.val, split.val_neg,
            replace(cfg.train, seed=seeds["train"]), arch=cfg.arch, hidden=cfg.hidden,
        )
    forget = build_forget(cfg, graph, split, seeds)
    ucfg = replace(cfg.unlearn, seed=seeds["unlearn"])
    t0 = time.perf_counter()
    if cfg.method == "distill":
        destroyer = make_destroyer(cfg.destroyer_kind(), source, forget, graph, seeds["destroyer"])
        unlearned, trace = distill_unlearn(source, graph, split, forget, destroyer, ucfg)
    else:
        unlearned = grad_ascent_unlearn(source, graph, split, forget, ucfg.epochs, ucfg.lr, seeds["unlearn"])
        trace = UnlearnTrace()
    secs = time.perf_counter() - t0
    save_params(unlearned, out / "checkpoint_unlearned.txt")
    write_trace_csv(out / "trace.csv", trace)
    write_timing_csv(out / "timing.csv", {"unlearn": secs}, trace)
    if len(trace):
        render_trace_figure(trace, out / "trace.png")
    print(f"unlearned {len(forget.forget)} edges ({cfg.locality}) in {secs:.2f}s")
    print(f"checkpoint: {out / 'checkpoint_unlearned.txt'}")
    return 0


def cmd_eval(args) -> int:
    cfg = build_config(args)
    seeds, graph, split = _prepare(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    source = load_params(args.source)
    unlearned = load_params(args.unlearned)
    forget = build_forget(cfg, graph, split, seeds)
    es, cs = seeds["eval"], seeds["calib"]
    baselines = {
        "source": {
            "auc_retain": eval_retain(source, graph, split, forget, es),
            "auc_forget": eval_forget(source, graph, split, forget, es),
        }
    }
    if args.gold:
        gold = load_params(args.gold)
        baselines["gold"] = {
            "auc_retain": eval_retain(gold, graph, split, forget, es),
            "auc_forget": eval_forget(gold, graph, split, forget, es),
            "mi_ratio": mi_ratio(source, gold, graph, split, forget, cs),
        }
    report = assemble_report(
        dataset=cfg.dataset_name,
        arch=cfg.arch,
        strategy=str(cfg.unlearn.strategy) if cfg.method == "distill" else cfg.method,
        locality=cfg.locality,
        ratio=float(cfg.forget_ratio),
        seed=cfg.seed,
        auc_retain=eval_retain(unlearned, graph, split, forget, es),
        auc_forget=eval_forget(unlearned, graph, split, forget, es),
        mi_ratio=mi_ratio(source, unlearned, graph, split, forget, cs),
        unlearn_seconds=0.0,
        flops_forward=flops_estimate(cfg.arch, (graph.feature_dim, *cfg.hidden), graph),
    )
    write_report_json(out / "report.json", report, baselines, seeds)
    write_report_csv(out / "report.csv", report)
    render_report_figure(report, baselines, {}, out / "report.png")
    print(f"retain AUC {report.auc_retain:.4f}  forget AUC {report.auc_forget:.4f}  "
          f"MI ratio {report.mi_ratio:.4f}")
    return 0


def cmd_bench(args) -> int:
    cfg = build_config(args)
    result = run_pipeline(cfg)
    r = result.report
    gold = result.baselines.get("gold", {})
    print(f"report: {result.out_dir / 'report.json'}")
    print(f"unlearned: retain AUC {r.auc_retain:.4f}  forget AUC {r.auc_forget:.4f}  "
          f"MI ratio {r.mi_ratio:.4f}")
    print(f"gold:      retain AUC {gold.get('auc_retain', float('nan')):.4f}  "
          f"forget AUC {gold.get('auc_forget', float('nan')):.4f}")
    print("timing: " + "  ".join(f"{k} {v:.2f}s" for k, v in result.stage_seconds.items()))
    return 0


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    axes = {}
    if args.ratios:
        axes["ratio"] = [float(x) for x in args.ratios.split(",") if x]
    if args.lrs:
        axes["unlearn_lr"] = [float(x) for x in args.lrs.split(",") if x]
    if args.strategies:
        axes["strategy"] = [int(x) for x in args.strategies.split(",") if x]
    if args.localities:
        axes["locality"] = [x for x in args.localities.split(",") if x]
    path = sweep(cfg, axes)
    print(f"sweep rows: {path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="graphforget",
        description="Train, unlearn, and evaluate link-prediction GNNs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the source model")
    p_unlearn = sub.add_parser("unlearn", help="unlearn a forget set from a model")
    p_unlearn.add_argument("--source", help="source checkpoint (trained if omitted)")
    p_eval = sub.add_parser("eval", help="evaluate checkpoints")
    p_eval.add_argument("--source", required=True)
    p_eval.add_argument("--unlearned", required=True)
    p_eval.add_argument("--gold")
    p_bench = sub.add_parser("bench", help="full train/unlearn/eval pipeline")
    p_sweep = sub.add_parser("sweep", help="bench over axes of values")
    p_sweep.add_argument("--ratios", help="comma list of forget ratios")
    p_sweep.add_argument("--lrs", help="comma list of unlearning learning rates")
    p_sweep.add_argument("--strategies", help="comma list of strategies")
    p_sweep.add_argument("--localities", help="comma list of localities")

    for p in (p_train, p_unlearn, p_eval, p_bench, p_sweep):
        _add_common_flags(p)

    args = parser.parse_args(argv)
    handlers = {
        "train": cmd_train,
        "unlearn": cmd_unlearn,
        "eval": cmd_eval,
        "bench": cmd_bench,
        "sweep": cmd_sweep,
    }
    try:
        return handlers[args.command](args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
