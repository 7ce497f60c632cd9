"""GCN / GIN parameter containers, propagation matrices, forward passes, and scoring.

Forward passes expose the embeddings of every layer, since the distillation
losses match intermediate representations and not just the final output.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import autodiff as ad
from .graphs import Graph, as_edge_array, edge_key_set

ARCH_GCN = "gcn"
ARCH_GIN = "gin"

KIND_GCN_NORM = "gcn-norm"
KIND_SUM = "sum"


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ModelParams:
    """Per-layer weights of a link-prediction GNN.

    GCN stores one matrix per layer. GIN stores two matrices per layer
    (the in-layer MLP) plus one trainable epsilon scalar per layer, kept
    as shape-(1,) arrays so the optimizer treats them uniformly.
    """

    arch: str
    weights: tuple
    epsilons: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.arch not in (ARCH_GCN, ARCH_GIN):
            raise ValueError(f"unknown arch {self.arch!r}")
        ws = tuple(_freeze(w) for w in self.weights)
        eps = tuple(_freeze(e) for e in self.epsilons)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "epsilons", eps)
        if self.arch == ARCH_GIN:
            if len(ws) % 2 != 0 or len(eps) != len(ws) // 2:
                raise ValueError("gin needs two matrices and one epsilon per layer")
            for l in range(len(eps)):
                w1, w2 = ws[2 * l], ws[2 * l + 1]
                if w1.shape[1] != w2.shape[0]:
                    raise ValueError(f"gin layer {l}: MLP dims do not chain")
                if l > 0 and ws[2 * l - 1].shape[1] != w1.shape[0]:
                    raise ValueError(f"gin layer {l}: input dim does not chain")
        else:
            if eps:
                raise ValueError("gcn takes no epsilons")
            for l in range(1, len(ws)):
                if ws[l - 1].shape[1] != ws[l].shape[0]:
                    raise ValueError(f"gcn layer {l}: dims do not chain")
        for w in ws + eps:
            if not np.all(np.isfinite(w)):
                raise ValueError("parameters must be finite")

    @property
    def num_layers(self) -> int:
        return len(self.weights) if self.arch == ARCH_GCN else len(self.weights) // 2

    @property
    def dims(self) -> tuple[int, ...]:
        """Feature-dimension chain (input, hidden..., output)."""
        if self.arch == ARCH_GCN:
            return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)
        chain = [self.weights[0].shape[0]]
        for l in range(self.num_layers):
            chain.append(self.weights[2 * l + 1].shape[1])
        return tuple(chain)

    def flat(self) -> tuple:
        """All trainable arrays in a fixed order (weights, then epsilons)."""
        return self.weights + self.epsilons

    def replace_flat(self, arrays) -> "ModelParams":
        arrays = tuple(arrays)
        nw = len(self.weights)
        return ModelParams(self.arch, arrays[:nw], arrays[nw:], seed=self.seed)


@dataclass(frozen=True)
class LayerEmbeddings:
    """Node-embedding matrices from one forward pass, one per layer."""

    per_layer: tuple

    def __post_init__(self):
        object.__setattr__(self, "per_layer", tuple(_freeze(h) for h in self.per_layer))
        rows = {h.shape[0] for h in self.per_layer}
        if len(rows) > 1:
            raise ValueError("all layers must have the same node count")

    @property
    def num_layers(self) -> int:
        return len(self.per_layer)

    @property
    def last(self) -> np.ndarray:
        return self.per_layer[-1]


@dataclass(frozen=True)
class NormAdj:
    """Sparse propagation matrix over a (possibly restricted) graph view.

    kind "gcn-norm": D^{-1/2} (A + I) D^{-1/2}; kind "sum": raw symmetric
    adjacency without self-loops, used by GIN's neighbor aggregation.
    """

    matrix: sparse.csr_matrix = field(repr=False)
    kind: str = KIND_GCN_NORM

    def __post_init__(self):
        m = self.matrix
        if m.shape[0] != m.shape[1]:
            raise ValueError("propagation matrix must be square")
        if (abs(m - m.T) > 0).nnz != 0:
            raise ValueError("propagation matrix must be symmetric")
        if m.nnz and (m.data.min() <= 0.0 or m.data.max() > 1.0):
            raise ValueError("entries must lie in (0, 1]")

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    @property
    def num_nodes(self) -> int:
        return self.matrix.shape[0]


def _kept_edges(graph: Graph, exclude) -> np.ndarray:
    if exclude is None:
        return graph.edges
    drop = edge_key_set(exclude)
    if drop - edge_key_set(graph.edges):
        raise ValueError("exclude contains pairs that are not graph edges")
    keep = [row for row in range(graph.num_edges)
            if (int(graph.edges[row, 0]), int(graph.edges[row, 1])) not in drop]
    return graph.edges[keep]


def gcn_normalize(graph: Graph, exclude=None) -> NormAdj:
    """Symmetric-normalized adjacency with self-loops over graph edges minus
    ``exclude``; isolated nodes reduce to a pure self-loop entry of 1."""
    edges = _kept_edges(graph, exclude)
    n = graph.num_nodes
    loops = np.arange(n, dtype=np.int64)
    if edges.size:
        rows = np.concatenate([edges[:, 0], edges[:, 1], loops])
        cols = np.concatenate([edges[:, 1], edges[:, 0], loops])
    else:
        rows = cols = loops
    data = np.ones(rows.size, dtype=np.float64)
    a = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
    deg = np.asarray(a.sum(axis=1)).ravel()
    dinv = 1.0 / np.sqrt(deg)
    a = a.tocoo()
    scaled = a.data * dinv[a.row] * dinv[a.col]
    return NormAdj(sparse.csr_matrix((scaled, (a.row, a.col)), shape=(n, n)), KIND_GCN_NORM)


def sum_adjacency(graph: Graph, exclude=None) -> NormAdj:
    """Raw symmetric 0/1 adjacency without self-loops (GIN aggregation)."""
    edges = _kept_edges(graph, exclude)
    n = graph.num_nodes
    if edges.size == 0:
        return NormAdj(sparse.csr_matrix((n, n), dtype=np.float64), KIND_SUM)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    data = np.ones(rows.size, dtype=np.float64)
    return NormAdj(sparse.csr_matrix((data, (rows, cols)), shape=(n, n)), KIND_SUM)


def propagation_for(arch: str, graph: Graph, exclude=None) -> NormAdj:
    if arch == ARCH_GCN:
        return gcn_normalize(graph, exclude)
    if arch == ARCH_GIN:
        return sum_adjacency(graph, exclude)
    raise ValueError(f"unknown arch {arch!r}")


def _check_adj(arch: str, adj: NormAdj) -> None:
    expected = KIND_GCN_NORM if arch == ARCH_GCN else KIND_SUM
    if adj.kind != expected:
        raise ValueError(f"arch {arch!r} needs a {expected!r} propagation matrix, got {adj.kind!r}")


def forward_nodes(params: ModelParams, weight_nodes, eps_nodes, adj: NormAdj, features) -> list:
    """Tape forward pass; returns one autodiff node per layer."""
    _check_adj(params.arch, adj)
    if features.shape[1] != params.dims[0]:
        raise ValueError(
            f"feature dim {features.shape[1]} != model input dim {params.dims[0]}"
        )
    s = adj.matrix
    h = ad.constant(features)
    outs = []
    num_layers = params.num_layers
    if params.arch == ARCH_GCN:
        for l in range(num_layers):
            z = ad.matmul(ad.spmm(s, h), weight_nodes[l])
            h = ad.relu(z) if l < num_layers - 1 else z
            outs.append(h)
    else:
        for l in range(num_layers):
            agg = ad.spmm(s, h)
            one_plus_eps = ad.add_const(eps_nodes[l], 1.0)
            z = ad.add(ad.scale_by(h, one_plus_eps), agg)
            hidden = ad.relu(ad.matmul(z, weight_nodes[2 * l]))
            out = ad.matmul(hidden, weight_nodes[2 * l + 1])
            h = ad.relu(out) if l < num_layers - 1 else out
            outs.append(h)
    return outs


def forward(params: ModelParams, adj: NormAdj, features) -> LayerEmbeddings:
    """Inference-only forward pass returning all layer embeddings."""
    w_nodes = [ad.constant(w) for w in params.weights]
    e_nodes = [ad.constant(e) for e in params.epsilons]
    outs = forward_nodes(params, w_nodes, e_nodes, adj, np.asarray(features, dtype=np.float64))
    return LayerEmbeddings(tuple(n.value for n in outs))


def score_edges(last_embed: np.ndarray, pairs, temperature: float = 1.0):
    """Inner-product logits and temperature-scaled sigmoid probabilities.

    The two-class softmax with the non-edge logit pinned at zero collapses to
    p = sigmoid(z / T), which is what this computes.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    pairs = as_edge_array(pairs)
    h = np.asarray(last_embed, dtype=np.float64)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= h.shape[0]):
        raise ValueError("pair index out of range")
    logits = np.einsum("ij,ij->i", h[pairs[:, 0]], h[pairs[:, 1]])
    probs = 1.0 / (1.0 + np.exp(-logits / float(temperature)))
    return logits, probs


_CKPT_MAGIC = "graphforget-checkpoint 1"


def save_params(params: ModelParams, path) -> None:
    """Textual checkpoint, bit-exact round trip via shortest-repr floats."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(_CKPT_MAGIC + "\n")
        fh.write(f"arch {params.arch}\n")
        fh.write("dims " + " ".join(str(d) for d in params.dims) + "\n")
        fh.write(f"seed {params.seed}\n")
        fh.write(f"weights {len(params.weights)}\n")
        for w in params.weights:
            fh.write(f"matrix {w.shape[0]} {w.shape[1]}\n")
            for row in w:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")
        fh.write(f"epsilons {len(params.epsilons)}\n")
        for e in params.epsilons:
            fh.write(repr(float(e[0])) + "\n")


def load_params(path) -> ModelParams:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _CKPT_MAGIC:
        raise ValueError(f"{path}: not a graphforget checkpoint")
    pos = 1

    def take(prefix: str) -> list[str]:
        nonlocal pos
        parts = lines[pos].split()
        if parts[0] != prefix:
            raise ValueError(f"{path}: expected {prefix!r} at line {pos + 1}")
        pos += 1
        return parts[1:]

    arch = take("arch")[0]
    take("dims")
    seed = int(take("seed")[0])
    n_weights = int(take("weights")[0])
    weights = []
    for _ in range(n_weights):
        r, c = (int(x) for x in take("matrix"))
        mat = np.empty((r, c), dtype=np.float64)
        for i in range(r):
            mat[i] = [float(x) for x in lines[pos].split()]
            pos += 1
        weights.append(mat)
    n_eps = int(take("epsilons")[0])
    epsilons = []
    for _ in range(n_eps):
        epsilons.append(np.array([float(lines[pos])]))
        pos += 1
    return ModelParams(arch, tuple(weights), tuple(epsilons), seed=seed)
