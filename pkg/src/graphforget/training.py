"""Supervised link-prediction training for the source and retrained models."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graphs import Graph, as_edge_array, edge_key_set, sample_negatives
from .metrics import auc
from .models import (
    ARCH_GCN,
    ARCH_GIN,
    ModelParams,
    forward,
    forward_nodes,
    propagation_for,
    score_edges,
)
from .optim import OptState, adam_step

DEFAULT_HIDDEN = (128, 64)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    lr: float = 0.001
    patience: int = 50
    neg_ratio: int = 1
    seed: int = 0
    resample_negatives: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr < 0:
            raise ValueError("lr must be nonnegative")
        if self.neg_ratio < 1:
            raise ValueError("neg_ratio must be >= 1")


def init_params(arch: str, dims, seed: int) -> ModelParams:
    """Glorot-uniform initialization from a seeded PRNG; GIN epsilons start at 0."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2:
        raise ValueError("need at least input and output dims")
    rng = np.random.default_rng(seed)

    def glorot(fan_in: int, fan_out: int) -> np.ndarray:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    if arch == ARCH_GCN:
        weights = tuple(glorot(dims[l], dims[l + 1]) for l in range(len(dims) - 1))
        return ModelParams(arch, weights, seed=seed)
    if arch == ARCH_GIN:
        weights = []
        for l in range(len(dims) - 1):
            weights.append(glorot(dims[l], dims[l + 1]))
            weights.append(glorot(dims[l + 1], dims[l + 1]))
        eps = tuple(np.zeros(1) for _ in range(len(dims) - 1))
        return ModelParams(arch, tuple(weights), eps, seed=seed)
    raise ValueError(f"unknown arch {arch!r}")


def _loss_and_grads(params, adj, features, pairs, labels, temperature=1.0):
    w_nodes = [ad.param(w) for w in params.weights]
    e_nodes = [ad.param(e) for e in params.epsilons]
    hs = forward_nodes(params, w_nodes, e_nodes, adj, features)
    probs = ad.sigmoid(ad.edge_logits(hs[-1], pairs), temperature)
    loss = ad.bce(probs, labels)
    grads = ad.grad(loss, w_nodes + e_nodes)
    return float(loss.value), grads


def train(
    graph: Graph,
    train_edges,
    val,
    val_neg,
    cfg: TrainConfig,
    arch: str = ARCH_GCN,
    hidden=DEFAULT_HIDDEN,
):
    """Train by BCE on train edges vs. per-epoch resampled negatives.

    The propagation matrix is built from the given train edges only, so held
    out and forgotten edges never enter message passing. Returns the
    parameters from the best-validation-AUC epoch (early stopping) and a
    history of (epoch, train_loss, val_auc) tuples.
    """
    train_edges = as_edge_array(train_edges)
    val = as_edge_array(val)
    val_neg = as_edge_array(val_neg)
    if len(train_edges) == 0:
        raise ValueError("no train edges")
    dims = (graph.feature_dim, *hidden)
    params = init_params(arch, dims, cfg.seed)
    exclude = [e for e in graph.edges.tolist() if tuple(e) not in edge_key_set(train_edges)]
    adj = propagation_for(arch, graph, exclude=exclude)
    state = OptState.for_params(params)
    rng = np.random.default_rng(cfg.seed)
    fixed_neg_seed = int(rng.integers(0, 2**63 - 1))

    n_neg = cfg.neg_ratio * len(train_edges)
    labels = np.concatenate([np.ones(len(train_edges)), np.zeros(n_neg)])
    use_val = len(val) > 0 and len(val_neg) > 0
    val_pairs = np.vstack([val, val_neg]) if use_val else None
    val_labels = np.concatenate([np.ones(len(val)), np.zeros(len(val_neg))]) if use_val else None

    history = []
    best_auc = -np.inf
    best_params = params
    stale = 0
    for epoch in range(cfg.epochs):
        neg_seed = int(rng.integers(0, 2**63 - 1)) if cfg.resample_negatives else fixed_neg_seed
        negs = sample_negatives(graph, n_neg, exclude=None, seed=neg_seed)
        pairs = np.vstack([train_edges, negs])
        loss, grads = _loss_and_grads(params, adj, graph.features, pairs, labels)
        if not np.isfinite(loss):
            raise RuntimeError(f"training diverged at epoch {epoch}: loss={loss}")
        params, state = adam_step(params, grads, state, cfg.lr)

        val_auc = float("nan")
        if use_val:
            embeds = forward(params, adj, graph.features)
            _, val_probs = score_edges(embeds.last, val_pairs, 1.0)
            val_auc = auc(val_probs, val_labels)
            if val_auc > best_auc:
                best_auc = val_auc
                best_params = params
                stale = 0
            else:
                stale += 1
        history.append((epoch, loss, val_auc))
        if use_val and stale >= cfg.patience:
            break
    return (best_params if use_val else params), history
