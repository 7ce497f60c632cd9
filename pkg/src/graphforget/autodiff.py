"""Tape-based reverse-mode differentiation over a fixed operator set.

The operators cover exactly what the models and losses need: dense matmul,
sparse-dense matmul, ReLU, temperature-scaled sigmoid, edge inner products,
and the three training losses. Everything is float64; reductions go through
numpy in a fixed order, so repeated runs are bit-identical.
"""
from __future__ import annotations

import numpy as np

CLAMP = 1e-12


class Node:
    """A value in a recorded computation plus the VJPs back to its parents."""

    __slots__ = ("value", "grad", "parents", "vjps", "requires")

    def __init__(self, value, parents=(), vjps=(), requires=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = tuple(parents)
        self.vjps = tuple(vjps)
        self.requires = requires or any(p.requires for p in self.parents)


def param(value) -> Node:
    """Leaf node that accumulates a gradient."""
    return Node(value, requires=True)


def constant(value) -> Node:
    """Leaf node treated as constant; no gradient is produced for it."""
    return Node(value)


def _topo(root: Node) -> list[Node]:
    order: list[Node] = []
    visited: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires and id(p) not in visited:
                stack.append((p, False))
    return order


def backward(loss: Node) -> None:
    """Populate ``grad`` on every parameter reachable from the scalar ``loss``."""
    if loss.value.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.value.shape}")
    if not loss.requires:
        return
    loss.grad = np.ones_like(loss.value)
    for node in reversed(_topo(loss)):
        g = node.grad
        if g is None:
            continue
        for parent, vjp in zip(node.parents, node.vjps):
            if not parent.requires:
                continue
            contrib = vjp(g)
            parent.grad = contrib if parent.grad is None else parent.grad + contrib


def grad(loss: Node, params: list[Node]) -> list[np.ndarray]:
    """Gradients of a scalar loss with respect to each parameter node.

    Parameters the loss does not depend on get exact zero gradients.
    """
    backward(loss)
    return [p.grad if p.grad is not None else np.zeros_like(p.value) for p in params]


def matmul(a: Node, b: Node) -> Node:
    value = a.value @ b.value
    return Node(
        value,
        parents=(a, b),
        vjps=(lambda g, bv=b.value: g @ bv.T, lambda g, av=a.value: av.T @ g),
    )


def spmm(s, h: Node) -> Node:
    """Sparse constant matrix times dense node."""
    st = s.T.tocsr()
    return Node(s @ h.value, parents=(h,), vjps=(lambda g: st @ g,))


def relu(x: Node) -> Node:
    mask = x.value > 0
    return Node(np.where(mask, x.value, 0.0), parents=(x,), vjps=(lambda g: g * mask,))


def add(a: Node, b: Node) -> Node:
    return Node(a.value + b.value, parents=(a, b), vjps=(lambda g: g, lambda g: g))


def scale(x: Node, c: float) -> Node:
    c = float(c)
    return Node(x.value * c, parents=(x,), vjps=(lambda g: g * c,))


def add_const(x: Node, c: float) -> Node:
    return Node(x.value + float(c), parents=(x,), vjps=(lambda g: g,))


def scale_by(x: Node, s: Node) -> Node:
    """Elementwise x * s with s a shape-(1,) node (broadcast scalar)."""
    return Node(
        x.value * s.value[0],
        parents=(x, s),
        vjps=(
            lambda g, sv=float(s.value[0]): g * sv,
            lambda g, xv=x.value: np.array([np.sum(g * xv)]),
        ),
    )


def reduce_sum(x: Node) -> Node:
    return Node(np.sum(x.value), parents=(x,), vjps=(lambda g, xv=x.value: g * np.ones_like(xv),))


def edge_logits(h: Node, pairs: np.ndarray) -> Node:
    """Inner products <h_u, h_v> for each (u, v) row of ``pairs``."""
    u = pairs[:, 0]
    v = pairs[:, 1]
    hu = h.value[u]
    hv = h.value[v]
    value = np.einsum("ij,ij->i", hu, hv)

    def vjp(g):
        out = np.zeros_like(h.value)
        np.add.at(out, u, g[:, None] * hv)
        np.add.at(out, v, g[:, None] * hu)
        return out

    return Node(value, parents=(h,), vjps=(vjp,))


def sigmoid(z: Node, temperature: float = 1.0) -> Node:
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    t = float(temperature)
    p = 1.0 / (1.0 + np.exp(-z.value / t))
    return Node(p, parents=(z,), vjps=(lambda g: g * p * (1.0 - p) / t,))


def _clamped(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    clipped = np.clip(p, CLAMP, 1.0 - CLAMP)
    interior = (p > CLAMP) & (p < 1.0 - CLAMP)
    return clipped, interior


def bce(p: Node, labels) -> Node:
    """Mean binary cross-entropy of probabilities against 0/1 labels."""
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != p.value.shape:
        raise ValueError(f"labels shape {y.shape} != probabilities shape {p.value.shape}")
    pc, interior = _clamped(p.value)
    n = pc.size
    value = -np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))

    def vjp(g):
        d = (-y / pc + (1.0 - y) / (1.0 - pc)) / n
        return g * np.where(interior, d, 0.0)

    return Node(value, parents=(p,), vjps=(vjp,))


def kl_bernoulli(target_p, q: Node) -> Node:
    """Mean Bernoulli KL(target || model) with the target held constant."""
    p = np.asarray(target_p, dtype=np.float64)
    if p.shape != q.value.shape:
        raise ValueError(f"target shape {p.shape} != model shape {q.value.shape}")
    pc = np.clip(p, CLAMP, 1.0 - CLAMP)
    qc, interior = _clamped(q.value)
    n = qc.size
    value = np.mean(pc * np.log(pc / qc) + (1.0 - pc) * np.log((1.0 - pc) / (1.0 - qc)))

    def vjp(g):
        d = (-pc / qc + (1.0 - pc) / (1.0 - qc)) / n
        return g * np.where(interior, d, 0.0)

    return Node(value, parents=(q,), vjps=(vjp,))


def mse_rows(a: Node, target: np.ndarray, rows: np.ndarray) -> Node:
    """Mean squared difference between a[rows] and the target matrix."""
    rows = np.asarray(rows, dtype=np.int64)
    target = np.asarray(target, dtype=np.float64)
    diff = a.value[rows] - target
    n = diff.size
    value = np.mean(diff * diff)

    def vjp(g):
        out = np.zeros_like(a.value)
        np.add.at(out, rows, g * 2.0 * diff / n)
        return out

    return Node(value, parents=(a,), vjps=(vjp,))
