"""Graph containers plus the sampling operations that carve out splits and forget sets.

All randomized operations take an explicit integer seed and are pure functions
of (inputs, seed). Edge arrays are int64 of shape (m, 2) with u < v per row.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

LOCALITY_IN = "in"
LOCALITY_OUT = "out"
LOCALITY_NODE = "node"

DEFAULT_FEATURE_DIM = 32


def as_edge_array(edges) -> np.ndarray:
    """Coerce edge input (list of pairs or array) to a (m, 2) int64 array."""
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"edge array must have shape (m, 2), got {arr.shape}")
    return arr


def edge_key_set(edges) -> set[tuple[int, int]]:
    """Set of (min, max) tuples for membership tests."""
    arr = as_edge_array(edges)
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    return set(zip(lo.tolist(), hi.tolist()))


def _canonical_edges(edges) -> np.ndarray:
    """Normalize to u < v, drop self-loops and duplicates, sort lexicographically."""
    arr = as_edge_array(edges)
    if arr.size == 0:
        return arr
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    keep = lo != hi
    pairs = np.unique(np.column_stack([lo[keep], hi[keep]]), axis=0)
    return pairs.astype(np.int64)


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Graph:
    """Immutable undirected attributed graph.

    ``edges`` holds each undirected pair once (u < v); ``csr`` is the 0/1
    adjacency over the symmetrized edge set, so csr.nnz == 2 * len(edges).
    """

    num_nodes: int
    edges: np.ndarray
    features: np.ndarray
    csr: sparse.csr_matrix = field(repr=False)

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ValueError("graph needs at least one node")
        e = self.edges
        if e.size:
            if e.min() < 0 or e.max() >= self.num_nodes:
                raise ValueError("edge endpoint out of range")
            if np.any(e[:, 0] >= e[:, 1]):
                raise ValueError("edges must satisfy u < v (no self-loops)")
            if len(edge_key_set(e)) != len(e):
                raise ValueError("duplicate edges")
        if self.features.shape[0] != self.num_nodes:
            raise ValueError(
                f"feature rows ({self.features.shape[0]}) != num_nodes ({self.num_nodes})"
            )
        object.__setattr__(self, "edges", _freeze(e))
        object.__setattr__(self, "features", _freeze(np.asarray(self.features, dtype=np.float64)))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def neighbor_sets(self) -> list[set[int]]:
        """Adjacency as a list of neighbor sets (derived from csr)."""
        indptr, indices = self.csr.indptr, self.csr.indices
        return [set(indices[indptr[i]:indptr[i + 1]].tolist()) for i in range(self.num_nodes)]


def _build_csr(num_nodes: int, edges: np.ndarray) -> sparse.csr_matrix:
    if edges.size == 0:
        return sparse.csr_matrix((num_nodes, num_nodes), dtype=np.float64)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    data = np.ones(rows.size, dtype=np.float64)
    return sparse.csr_matrix((data, (rows, cols)), shape=(num_nodes, num_nodes))


def make_graph(num_nodes: int, edges, features=None, feature_dim: int = DEFAULT_FEATURE_DIM) -> Graph:
    """Build a Graph from raw edges; synthesizes cyclic one-hot features if absent."""
    canon = _canonical_edges(edges)
    if canon.size and (canon.min() < 0 or canon.max() >= num_nodes):
        raise ValueError("edge endpoint out of range")
    if features is None:
        features = _one_hot_features(num_nodes, feature_dim)
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    return Graph(num_nodes, canon, features, _build_csr(num_nodes, canon))


def _one_hot_features(num_nodes: int, feature_dim: int) -> np.ndarray:
    # Identity rows cycled through feature_dim columns so no row is all-zero.
    feats = np.zeros((num_nodes, feature_dim), dtype=np.float64)
    feats[np.arange(num_nodes), np.arange(num_nodes) % feature_dim] = 1.0
    return feats


def load_graph(edge_path, feature_path=None, feature_dim: int | None = None) -> Graph:
    """Parse an ASCII edge list (one "u<TAB>v" pair per line, '#' comments).

    Duplicate, reversed, and self-loop lines are dropped after being counted
    toward the node-index range. Features come from a CSV (one row per node)
    when given, otherwise cyclic one-hot rows of width ``feature_dim``.
    """
    if feature_dim is None:
        feature_dim = DEFAULT_FEATURE_DIM
    pairs = []
    max_index = -1
    declared_nodes = 0
    with open(edge_path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "nodes" and parts[1].isdigit():
                    declared_nodes = max(declared_nodes, int(parts[1]))
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{edge_path}:{lineno}: expected two integers, got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ValueError(f"{edge_path}:{lineno}: non-integer endpoint in {line!r}") from None
            if u < 0 or v < 0:
                raise ValueError(f"{edge_path}:{lineno}: negative node index in {line!r}")
            max_index = max(max_index, u, v)
            if u != v:
                pairs.append((min(u, v), max(u, v)))
    num_nodes = max(max_index + 1, declared_nodes)
    if num_nodes < 1:
        raise ValueError(f"{edge_path}: no node indices found")
    if feature_path is not None:
        features = np.loadtxt(feature_path, delimiter=",", dtype=np.float64, ndmin=2)
        if features.shape[0] < max_index + 1:
            raise ValueError(
                f"{feature_path}: {features.shape[0]} feature rows but edge file "
                f"references node {max_index}"
            )
        num_nodes = max(num_nodes, features.shape[0])
    else:
        features = _one_hot_features(num_nodes, feature_dim)
    canon = _canonical_edges(pairs)
    return Graph(num_nodes, canon, features, _build_csr(num_nodes, canon))


def save_edges(graph: Graph, path) -> None:
    """Write the edge list back to the ASCII format accepted by load_graph."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# nodes {graph.num_nodes}\n")
        for u, v in graph.edges:
            fh.write(f"{u}\t{v}\n")


def generate_sbm(
    num_blocks: int,
    nodes_per_block: int,
    p_in: float,
    p_out: float,
    feature_dim: int,
    seed: int,
) -> Graph:
    """Seeded stochastic block model with block one-hot features plus noise."""
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise ValueError(f"need 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if num_blocks < 1 or nodes_per_block < 1 or feature_dim < 1:
        raise ValueError("counts must be >= 1")
    n = num_blocks * nodes_per_block
    rng = np.random.default_rng(seed)
    block = np.arange(n) // nodes_per_block
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(block[iu] == block[ju], p_in, p_out)
    mask = rng.random(iu.size) < prob
    edges = np.column_stack([iu[mask], ju[mask]]).astype(np.int64)
    feats = np.zeros((n, feature_dim), dtype=np.float64)
    feats[np.arange(n), block % feature_dim] = 1.0
    feats += rng.uniform(0.0, 0.1, size=(n, feature_dim))
    return Graph(n, edges, feats, _build_csr(n, edges))


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


@dataclass(frozen=True)
class EdgeSplit:
    """Disjoint train/val/test partition of a graph's edges plus sampled non-edges."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    val_neg: np.ndarray
    test_neg: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test", "val_neg", "test_neg"):
            object.__setattr__(self, name, _freeze(as_edge_array(getattr(self, name))))
        if len(self.val_neg) != len(self.val) or len(self.test_neg) != len(self.test):
            raise ValueError("negative lists must match val/test sizes")

    def validate_against(self, graph: Graph) -> None:
        parts = [edge_key_set(self.train), edge_key_set(self.val), edge_key_set(self.test)]
        if sum(len(p) for p in parts) != graph.num_edges:
            raise ValueError("split parts overlap or miss edges")
        union = parts[0] | parts[1] | parts[2]
        if union != edge_key_set(graph.edges):
            raise ValueError("split does not cover the edge set")
        negs = edge_key_set(self.val_neg) | edge_key_set(self.test_neg)
        if negs & edge_key_set(graph.edges):
            raise ValueError("negative sample contains a real edge")


def split_edges(graph: Graph, val_frac: float, test_frac: float, seed: int) -> EdgeSplit:
    """Uniform seeded split; |val| = round(val_frac*|E|), |test| = round(test_frac*|E|)."""
    if val_frac < 0 or test_frac < 0 or val_frac + test_frac >= 1.0:
        raise ValueError("need val_frac + test_frac < 1 and both nonnegative")
    m = graph.num_edges
    if m == 0:
        raise ValueError("cannot split a graph with no edges")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m)
    n_val = _round_half_up(val_frac * m)
    n_test = _round_half_up(test_frac * m)
    val = graph.edges[perm[:n_val]]
    test = graph.edges[perm[n_val:n_val + n_test]]
    train = graph.edges[perm[n_val + n_test:]]
    neg_seed = int(rng.integers(0, 2**63 - 1))
    negs = sample_negatives(graph, n_val + n_test, exclude=None, seed=neg_seed)
    return EdgeSplit(train, val, test, negs[:n_val], negs[n_val:])


@dataclass(frozen=True)
class ForgetSet:
    """Partition of the train edges into a forget set and its complement."""

    forget: np.ndarray
    retain: np.ndarray
    locality: str
    deleted_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        object.__setattr__(self, "forget", _freeze(as_edge_array(self.forget)))
        object.__setattr__(self, "retain", _freeze(as_edge_array(self.retain)))
        object.__setattr__(
            self, "deleted_nodes", _freeze(np.asarray(self.deleted_nodes, dtype=np.int64))
        )
        if self.locality not in (LOCALITY_IN, LOCALITY_OUT, LOCALITY_NODE):
            raise ValueError(f"unknown locality {self.locality!r}")
        if edge_key_set(self.forget) & edge_key_set(self.retain):
            raise ValueError("forget and retain sets overlap")
        if self.locality == LOCALITY_NODE and self.deleted_nodes.size == 0:
            raise ValueError("node locality requires deleted_nodes")


def edge_is_local(graph: Graph, train_edges: np.ndarray, edge) -> bool:
    """IN predicate: after removing ``edge``, some other train edge has an
    endpoint within 2 hops of either of its endpoints."""
    u, v = int(edge[0]), int(edge[1])
    adj = graph.csr
    removed = {(u, v), (v, u)}

    def neighbors(w: int):
        row = adj.indices[adj.indptr[w]:adj.indptr[w + 1]]
        return (int(x) for x in row if (w, int(x)) not in removed)

    ball = {u, v}
    frontier = [u, v]
    for _ in range(2):
        nxt = []
        for w in frontier:
            for x in neighbors(w):
                if x not in ball:
                    ball.add(x)
                    nxt.append(x)
        frontier = nxt
    deg = np.zeros(graph.num_nodes, dtype=np.int64)
    np.add.at(deg, train_edges[:, 0], 1)
    np.add.at(deg, train_edges[:, 1], 1)
    total = int(sum(deg[w] for w in ball))
    # The candidate edge itself contributes 2 (both endpoints are in the ball).
    return total > 2


def sample_forget_edges(
    graph: Graph, split: EdgeSplit, ratio: float, locality: str, seed: int
) -> ForgetSet:
    """Sample round(ratio*|train|) train edges whose 2-hop locality matches
    ``locality`` ("in" or "out"), uniformly with a seeded PRNG."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    if locality not in (LOCALITY_IN, LOCALITY_OUT):
        raise ValueError(f"locality must be 'in' or 'out', got {locality!r}")
    train = split.train
    k = _round_half_up(ratio * len(train))
    if k < 1:
        raise ValueError(f"ratio {ratio} of {len(train)} train edges rounds to zero")

    # Precompute train endpoint degrees once; edge_is_local recomputes them,
    # so inline the ball walk here for the full scan.
    deg = np.zeros(graph.num_nodes, dtype=np.int64)
    np.add.at(deg, train[:, 0], 1)
    np.add.at(deg, train[:, 1], 1)
    adj = graph.csr
    want_in = locality == LOCALITY_IN

    candidates = []
    for row in range(len(train)):
        u, v = int(train[row, 0]), int(train[row, 1])
        removed = {(u, v), (v, u)}
        ball = {u, v}
        frontier = [u, v]
        for _ in range(2):
            nxt = []
            for w in frontier:
                for x in adj.indices[adj.indptr[w]:adj.indptr[w + 1]]:
                    x = int(x)
                    if (w, x) in removed or x in ball:
                        continue
                    ball.add(x)
                    nxt.append(x)
            frontier = nxt
        is_in = sum(int(deg[w]) for w in ball) > 2
        if is_in == want_in:
            candidates.append(row)
    if len(candidates) < k:
        raise ValueError(
            f"requested {k} forget edges with locality {locality!r} "
            f"but only {len(candidates)} candidates qualify"
        )
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(candidates), size=k, replace=False)
    rows = np.array([candidates[i] for i in chosen], dtype=np.int64)
    mask = np.zeros(len(train), dtype=bool)
    mask[rows] = True
    return ForgetSet(train[rows], train[~mask], locality)


def delete_nodes(graph: Graph, node_ids, split: EdgeSplit) -> ForgetSet:
    """Forget set holding every train edge incident to any of the given nodes."""
    ids = np.unique(np.asarray(node_ids, dtype=np.int64))
    if ids.size == 0:
        raise ValueError("no nodes given")
    if ids.min() < 0 or ids.max() >= graph.num_nodes:
        raise ValueError(f"node id out of range [0, {graph.num_nodes})")
    train = split.train
    member = np.zeros(graph.num_nodes, dtype=bool)
    member[ids] = True
    mask = member[train[:, 0]] | member[train[:, 1]]
    if not mask.any():
        raise ValueError("no train edge is incident to the given nodes")
    return ForgetSet(train[mask], train[~mask], LOCALITY_NODE, deleted_nodes=ids)


def sample_negatives(graph: Graph, count: int, exclude=None, seed: int = 0) -> np.ndarray:
    """Sample ``count`` distinct non-edges (u < v), avoiding graph edges and
    the extra ``exclude`` pairs; deterministic per seed."""
    n = graph.num_nodes
    total = n * (n - 1) // 2
    excluded = edge_key_set(graph.edges)
    if exclude is not None:
        excluded |= edge_key_set(exclude)
    feasible = total - len(excluded)
    if count > feasible:
        raise ValueError(f"requested {count} non-edges but only {feasible} exist")
    if count == 0:
        return np.zeros((0, 2), dtype=np.int64)
    rng = np.random.default_rng(seed)
    if feasible <= 4 * count:
        iu, ju = np.triu_indices(n, k=1)
        all_pairs = np.column_stack([iu, ju]).astype(np.int64)
        keep = np.array([(int(a), int(b)) not in excluded for a, b in all_pairs])
        pool = all_pairs[keep]
        idx = rng.choice(len(pool), size=count, replace=False)
        return pool[idx]
    out = []
    seen = set()
    while len(out) < count:
        need = count - len(out)
        us = rng.integers(0, n, size=2 * need + 8)
        vs = rng.integers(0, n, size=2 * need + 8)
        lo = np.minimum(us, vs)
        hi = np.maximum(us, vs)
        for a, b in zip(lo.tolist(), hi.tolist()):
            if a == b:
                continue
            pair = (a, b)
            if pair in excluded or pair in seen:
                continue
            seen.add(pair)
            out.append(pair)
            if len(out) == count:
                break
    return np.array(out, dtype=np.int64)
