"""Evaluation metrics: AUC, forget/retain scores, membership-inference ratio,
FLOPs estimation, and report assembly."""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .graphs import Graph, EdgeSplit, ForgetSet, LOCALITY_NODE, sample_negatives
from .models import ARCH_GCN, ARCH_GIN, ModelParams, forward, propagation_for, score_edges

REPORT_CSV_HEADER = [
    "dataset",
    "arch",
    "strategy",
    "locality",
    "ratio",
    "seed",
    "auc_retain",
    "auc_forget",
    "mi_ratio",
    "unlearn_seconds",
    "flops_forward",
]


def auc(scores, labels) -> float:
    """Probability a random positive outranks a random negative; ties count 0.5.

    Computed from fractional (midrank) Mann-Whitney ranks, which equals the
    brute-force pair statistic exactly.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos + n_neg != s.size:
        raise ValueError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need at least one positive and one negative label")
    _, inverse, counts = np.unique(s, return_inverse=True, return_counts=True)
    cum = np.cumsum(counts)
    midranks = cum - (counts - 1) / 2.0
    ranks = midranks[inverse]
    rank_sum_pos = float(np.sum(ranks[y == 1]))
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def retain_view_features(graph: Graph, forget: ForgetSet) -> np.ndarray:
    """Graph features with deleted nodes' rows zeroed for node unlearning."""
    if forget.locality != LOCALITY_NODE:
        return graph.features
    feats = np.array(graph.features, copy=True)
    feats[forget.deleted_nodes] = 0.0
    return feats


def retain_propagation(arch: str, graph: Graph, forget: ForgetSet):
    """Propagation matrix built from the retained train edges only."""
    keep = {(int(u), int(v)) for u, v in forget.retain}
    exclude = [row for row in graph.edges.tolist() if (row[0], row[1]) not in keep]
    return propagation_for(arch, graph, exclude=exclude)


def _model_probs(model: ModelParams, graph: Graph, forget: ForgetSet, pairs) -> np.ndarray:
    adj = retain_propagation(model.arch, graph, forget)
    feats = retain_view_features(graph, forget)
    embeds = forward(model, adj, feats)
    _, probs = score_edges(embeds.last, pairs, 1.0)
    return probs


def eval_forget(model: ModelParams, graph: Graph, split: EdgeSplit, forget: ForgetSet, seed: int) -> float:
    """AUC separating forget edges (label 0) from an equal-size seeded sample
    of retained train edges (label 1), scored on the retain-graph view.

    Values near 0.5 mean the forget edges are indistinguishable from retained
    ones, which is what the retrained reference model produces.
    """
    n_f = len(forget.forget)
    if n_f == 0:
        raise ValueError("forget set is empty")
    if len(forget.retain) < n_f:
        raise ValueError("retain set smaller than forget set")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(forget.retain), size=n_f, replace=False)
    pairs = np.vstack([forget.forget, forget.retain[idx]])
    labels = np.concatenate([np.zeros(n_f), np.ones(n_f)])
    probs = _model_probs(model, graph, forget, pairs)
    return auc(probs, labels)


def eval_retain(model: ModelParams, graph: Graph, split: EdgeSplit, forget: ForgetSet, seed: int) -> float:
    """AUC over held-out test edges vs. their sampled non-edges on the
    retain-graph view. ``seed`` is accepted for interface symmetry."""
    if len(split.test) == 0:
        raise ValueError("test split is empty")
    pairs = np.vstack([split.test, split.test_neg])
    labels = np.concatenate([np.ones(len(split.test)), np.zeros(len(split.test_neg))])
    probs = _model_probs(model, graph, forget, pairs)
    return auc(probs, labels)


def rank_membership(edge_scores, calibration_scores) -> np.ndarray:
    """Membership probability of each score: the fraction of calibration
    scores strictly below it (an empirical-rank attack)."""
    calib = np.sort(np.asarray(calibration_scores, dtype=np.float64))
    if calib.size == 0:
        raise ValueError("empty calibration set")
    edges = np.asarray(edge_scores, dtype=np.float64)
    return np.searchsorted(calib, edges, side="left") / calib.size


def mi_ratio(
    source: ModelParams,
    unlearned: ModelParams,
    graph: Graph,
    split: EdgeSplit,
    forget: ForgetSet,
    seed: int,
    calibration_size: int = 1024,
) -> float:
    """Empirical-rank membership attack ratio, averaged over forget edges.

    Membership probability of an edge under a model is the fraction of seeded
    calibration non-edges the model scores strictly lower. Ratios above 1 mean
    the unlearned model leaks less about the forget set than the source did.
    """
    if len(forget.forget) == 0:
        raise ValueError("forget set is empty")
    n = graph.num_nodes
    feasible = n * (n - 1) // 2 - graph.num_edges
    size = min(calibration_size, feasible)
    if size < 1:
        raise ValueError("no non-edges available for calibration")
    calib = sample_negatives(graph, size, exclude=None, seed=seed)

    def membership(model: ModelParams) -> np.ndarray:
        probs = _model_probs(model, graph, forget, np.vstack([forget.forget, calib]))
        return rank_membership(probs[: len(forget.forget)], probs[len(forget.forget):])

    mem_src = membership(source)
    mem_unl = membership(unlearned)
    return float(np.mean(mem_src / np.maximum(mem_unl, 1e-6)))


def flops_counts(arch: str, dims, num_nodes: int, nnz: int) -> int:
    """Closed-form forward-pass FLOPs from raw counts (2 per multiply-add)."""
    dims = tuple(int(d) for d in dims)
    total = 0
    for l in range(len(dims) - 1):
        f_in, f_out = dims[l], dims[l + 1]
        total += 2 * num_nodes * f_in * f_out + 2 * nnz * f_out
        if arch == ARCH_GIN:
            total += 2 * num_nodes * f_out * f_out
    return total


def flops_estimate(arch: str, dims, graph: Graph) -> int:
    """Forward-pass FLOPs estimate; nnz counts directed entries plus self-loops."""
    if arch not in (ARCH_GCN, ARCH_GIN):
        raise ValueError(f"unknown arch {arch!r}")
    nnz = 2 * graph.num_edges + graph.num_nodes
    return flops_counts(arch, dims, graph.num_nodes, nnz)


@dataclass(frozen=True)
class EvalReport:
    """Metrics for one unlearning run plus the configuration echo."""

    dataset: str
    arch: str
    strategy: str
    locality: str
    ratio: float
    seed: int
    auc_retain: float
    auc_forget: float
    mi_ratio: float
    unlearn_seconds: float
    flops_forward: int

    def __post_init__(self):
        for name in ("auc_retain", "auc_forget"):
            x = getattr(self, name)
            if not 0.0 <= x <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {x}")
        if self.mi_ratio <= 0:
            raise ValueError(f"mi_ratio must be positive, got {self.mi_ratio}")
        if self.flops_forward < 0:
            raise ValueError("flops_forward must be nonnegative")

    def csv_row(self) -> list[str]:
        d = asdict(self)
        return [_format_cell(d[k]) for k in REPORT_CSV_HEADER]

    def json_dict(self, include_timing: bool = True) -> dict:
        d = asdict(self)
        if not include_timing:
            d.pop("unlearn_seconds")
        return d

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.json_dict(include_timing), sort_keys=True, indent=2) + "\n"


def _format_cell(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def assemble_report(**pieces) -> EvalReport:
    """Build a validated EvalReport; every header field must be supplied."""
    missing = [k for k in REPORT_CSV_HEADER if k not in pieces]
    if missing:
        raise ValueError(f"missing report fields: {missing}")
    extra = set(pieces) - set(REPORT_CSV_HEADER)
    if extra:
        raise ValueError(f"unknown report fields: {sorted(extra)}")
    return EvalReport(**pieces)
