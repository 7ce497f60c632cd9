"""Distillation-based edge/node unlearning plus the gradient-ascent baseline.

A frozen copy of the source model supplies targets that keep retained
knowledge in place, while a destroyer model supplies targets that overwrite
what the forget set taught. Three strategies combine these with either
soft-target KL or per-layer embedding MSE losses.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .graphs import Graph, EdgeSplit, ForgetSet
from .metrics import retain_propagation, retain_view_features
from .models import ModelParams, NormAdj, forward, forward_nodes, score_edges
from .optim import OptState, adam_step
from .training import init_params

DESTROYER_RANDOM = "random_init"
DESTROYER_NEGATIVE = "negative_pairs"

RETAIN_BATCH_ALL = "all"

_STRATEGY_DESTROYER = {1: DESTROYER_RANDOM, 2: DESTROYER_RANDOM, 3: DESTROYER_NEGATIVE}


@dataclass(frozen=True)
class UnlearnConfig:
    strategy: int = 1
    alpha: float = 0.5
    temperature: float = 1.0
    epochs: int = 200
    lr: float = 0.001
    retain_batch: int | str | None = None
    seed: int = 0
    resample_pairs: bool = False

    def __post_init__(self):
        if self.strategy not in (1, 2, 3):
            raise ValueError(f"strategy must be 1, 2, or 3, got {self.strategy}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if isinstance(self.retain_batch, str) and self.retain_batch != RETAIN_BATCH_ALL:
            raise ValueError(f"retain_batch must be an int, 'all', or None, got {self.retain_batch!r}")


@dataclass(frozen=True)
class DestroyerSpec:
    """Where the forget-set targets come from.

    random_init: a fresh untrained model supplies near-neutral targets.
    negative_pairs: the trained model itself, read at a seeded non-neighbor
    of each forget-edge endpoint, supplies negative targets.
    """

    kind: str
    params: ModelParams
    pair_map: dict[int, int] | None = None

    def __post_init__(self):
        if self.kind not in (DESTROYER_RANDOM, DESTROYER_NEGATIVE):
            raise ValueError(f"unknown destroyer kind {self.kind!r}")
        if self.kind == DESTROYER_NEGATIVE and not self.pair_map:
            raise ValueError("negative_pairs destroyer needs a pair_map")


@dataclass(frozen=True)
class UnlearnTrace:
    """Per-epoch record of the unlearning loop (values before each update)."""

    loss: list = field(default_factory=list)
    loss_r: list = field(default_factory=list)
    loss_f: list = field(default_factory=list)
    kl_info_bound: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.loss)


def _sample_non_neighbors(graph: Graph, nodes, seed: int) -> dict[int, int]:
    rng = np.random.default_rng(seed)
    neighbor_sets = graph.neighbor_sets()
    mapping = {}
    for w in sorted(int(x) for x in set(nodes)):
        blocked = neighbor_sets[w] | {w}
        pool = np.array([x for x in range(graph.num_nodes) if x not in blocked], dtype=np.int64)
        if pool.size == 0:
            raise ValueError(f"node {w} has no non-neighbor to pair with")
        mapping[w] = int(pool[rng.integers(0, pool.size)])
    return mapping


def make_destroyer(kind: str, source: ModelParams, forget: ForgetSet, graph: Graph, seed: int) -> DestroyerSpec:
    """Build the destroyer for a run: a fresh random model, or the source
    model plus a map from each forget endpoint to a sampled non-neighbor."""
    if kind == DESTROYER_RANDOM:
        return DestroyerSpec(kind, init_params(source.arch, source.dims, seed))
    if kind == DESTROYER_NEGATIVE:
        if len(forget.forget) == 0:
            raise ValueError("negative_pairs destroyer needs a non-empty forget set")
        endpoints = forget.forget.ravel()
        return DestroyerSpec(kind, source, _sample_non_neighbors(graph, endpoints, seed))
    raise ValueError(f"unknown destroyer kind {kind!r}")


def _audit_excludes(adj: NormAdj, edges: np.ndarray) -> None:
    # Construction audit: no forget edge may appear in the propagation matrix.
    m = adj.matrix
    for u, v in edges:
        if m[int(u), int(v)] != 0.0:
            raise AssertionError(f"forget edge ({u}, {v}) leaked into propagation")


def _resolve_batch_size(retain_batch, n_retain: int, n_forget: int) -> int:
    if retain_batch is None:
        return min(n_retain, 4 * n_forget)
    if retain_batch == RETAIN_BATCH_ALL:
        return n_retain
    size = int(retain_batch)
    if size < 1:
        raise ValueError("retain batch must be >= 1")
    return min(size, n_retain)


def _mapped_pairs(forget_edges: np.ndarray, pair_map: dict[int, int]) -> np.ndarray:
    return np.array(
        [[pair_map[int(u)], pair_map[int(v)]] for u, v in forget_edges], dtype=np.int64
    )


def distill_unlearn(
    source: ModelParams,
    graph: Graph,
    split: EdgeSplit,
    forget: ForgetSet,
    destroyer: DestroyerSpec,
    cfg: UnlearnConfig,
):
    """Run preserver/destroyer distillation; returns (unlearned params, trace).

    Per epoch the trainable model is driven toward the frozen source on a
    seeded retain-edge batch (weight alpha) and toward the destroyer on the
    forget edges (weight 1 - alpha). All propagation runs on the retain-graph
    view, so forget edges never participate in message passing.
    """
    if destroyer.kind != _STRATEGY_DESTROYER[cfg.strategy]:
        raise ValueError(
            f"strategy {cfg.strategy} requires a {_STRATEGY_DESTROYER[cfg.strategy]!r} "
            f"destroyer, got {destroyer.kind!r}"
        )
    if len(forget.forget) == 0:
        raise ValueError("forget set is empty")

    adj = retain_propagation(source.arch, graph, forget)
    _audit_excludes(adj, forget.forget)
    feats = retain_view_features(graph, forget)
    temp = cfg.temperature
    forget_edges = forget.forget
    retain_edges = forget.retain

    preserver = forward(source, adj, feats)
    rng = np.random.default_rng(cfg.seed)
    batch_size = _resolve_batch_size(cfg.retain_batch, len(retain_edges), len(forget_edges))

    # Forget-side targets are constant across epochs (frozen models, fixed
    # adjacency), so compute them once up front.
    if destroyer.kind == DESTROYER_RANDOM:
        destroyer_embeds = forward(destroyer.params, adj, feats)
        _, destr_forget_probs = score_edges(destroyer_embeds.last, forget_edges, temp)
        rows_f = np.unique(forget_edges.ravel())
        destr_row_targets = [h[rows_f] for h in destroyer_embeds.per_layer]
    else:
        destroyer_embeds = preserver
        pair_map = dict(destroyer.pair_map)
        mapped = _mapped_pairs(forget_edges, pair_map)
        _, destr_forget_probs = score_edges(preserver.last, mapped, temp)
        rows_f = np.unique(forget_edges.ravel())
        destr_row_targets = [h[np.array([pair_map[int(w)] for w in rows_f])] for h in preserver.per_layer]

    params = source
    state = OptState.for_params(params)
    trace = UnlearnTrace()
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        if cfg.resample_pairs and destroyer.kind == DESTROYER_NEGATIVE:
            pair_map = _sample_non_neighbors(graph, forget_edges.ravel(), int(rng.integers(0, 2**63 - 1)))
            mapped = _mapped_pairs(forget_edges, pair_map)
            _, destr_forget_probs = score_edges(preserver.last, mapped, temp)
            destr_row_targets = [
                h[np.array([pair_map[int(w)] for w in rows_f])] for h in preserver.per_layer
            ]
        batch_idx = rng.choice(len(retain_edges), size=batch_size, replace=False)
        batch = retain_edges[batch_idx]

        w_nodes = [ad.param(w) for w in params.weights]
        e_nodes = [ad.param(e) for e in params.epsilons]
        hs = forward_nodes(params, w_nodes, e_nodes, adj, feats)

        if cfg.strategy == 1:
            _, pres_batch_probs = score_edges(preserver.last, batch, temp)
            model_batch = ad.sigmoid(ad.edge_logits(hs[-1], batch), temp)
            loss_r = ad.kl_bernoulli(pres_batch_probs, model_batch)
            model_forget = ad.sigmoid(ad.edge_logits(hs[-1], forget_edges), temp)
            loss_f = ad.kl_bernoulli(destr_forget_probs, model_forget)
            kl_info = float(loss_f.value)
        else:
            rows_r = np.unique(batch.ravel())
            loss_r = None
            loss_f = None
            for l, h in enumerate(hs):
                term_r = ad.mse_rows(h, preserver.per_layer[l][rows_r], rows_r)
                term_f = ad.mse_rows(h, destr_row_targets[l], rows_f)
                loss_r = term_r if loss_r is None else ad.add(loss_r, term_r)
                loss_f = term_f if loss_f is None else ad.add(loss_f, term_f)
            _, model_forget_probs = score_edges(hs[-1].value, forget_edges, temp)
            kl_info = _kl_value(destr_forget_probs, model_forget_probs)

        total = ad.add(ad.scale(loss_r, cfg.alpha), ad.scale(loss_f, 1.0 - cfg.alpha))
        if not np.isfinite(total.value):
            raise RuntimeError(f"unlearning diverged at epoch {epoch}")

        trace.loss.append(float(total.value))
        trace.loss_r.append(float(loss_r.value))
        trace.loss_f.append(float(loss_f.value))
        trace.kl_info_bound.append(kl_info)

        grads = ad.grad(total, w_nodes + e_nodes)
        params, state = adam_step(params, grads, state, cfg.lr)
        trace.seconds.append(time.perf_counter() - t0)
    return params, trace


def _kl_value(target_p: np.ndarray, model_q: np.ndarray) -> float:
    return float(ad.kl_bernoulli(target_p, ad.constant(model_q)).value)


def grad_ascent_unlearn(
    source: ModelParams,
    graph: Graph,
    split: EdgeSplit,
    forget: ForgetSet,
    epochs: int,
    lr: float,
    seed: int,
) -> ModelParams:
    """Baseline: ascend the BCE of forget edges labeled positive, so the model
    is pushed away from predicting them."""
    if len(forget.forget) == 0:
        raise ValueError("forget set is empty")
    adj = retain_propagation(source.arch, graph, forget)
    _audit_excludes(adj, forget.forget)
    feats = retain_view_features(graph, forget)
    labels = np.ones(len(forget.forget))
    params = source
    state = OptState.for_params(params)
    for epoch in range(epochs):
        w_nodes = [ad.param(w) for w in params.weights]
        e_nodes = [ad.param(e) for e in params.epsilons]
        hs = forward_nodes(params, w_nodes, e_nodes, adj, feats)
        probs = ad.sigmoid(ad.edge_logits(hs[-1], forget.forget), 1.0)
        loss = ad.bce(probs, labels)
        if not np.isfinite(loss.value):
            raise RuntimeError(f"gradient ascent diverged at epoch {epoch}")
        grads = [-g for g in ad.grad(loss, w_nodes + e_nodes)]
        params, state = adam_step(params, grads, state, lr)
    return params
