"""Scalar loss functions shared by training, unlearning, and the tests.

These wrap the autodiff operators on constant inputs so the value computed
here is bit-identical to what the training tape computes.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .models import LayerEmbeddings


def bce_loss(probabilities, labels) -> float:
    """Mean binary cross-entropy; probabilities are clamped at 1e-12."""
    p = ad.constant(np.asarray(probabilities, dtype=np.float64))
    return float(ad.bce(p, labels).value)


def kl_bernoulli(target_p, model_q) -> float:
    """Mean Bernoulli KL divergence KL(target || model), both sides clamped."""
    q = ad.constant(np.asarray(model_q, dtype=np.float64))
    return float(ad.kl_bernoulli(np.asarray(target_p, dtype=np.float64), q).value)


def mse_embeddings(a: LayerEmbeddings, b: LayerEmbeddings, rows=None) -> float:
    """Sum over layers of the mean squared difference restricted to ``rows``."""
    if a.num_layers != b.num_layers:
        raise ValueError("embedding stacks have different depths")
    total = 0.0
    for ha, hb in zip(a.per_layer, b.per_layer):
        if ha.shape != hb.shape:
            raise ValueError(f"layer shape mismatch: {ha.shape} vs {hb.shape}")
        idx = np.arange(ha.shape[0]) if rows is None else np.unique(np.asarray(rows, dtype=np.int64))
        if idx.size and (idx.min() < 0 or idx.max() >= ha.shape[0]):
            raise ValueError("row index out of range")
        total += float(ad.mse_rows(ad.constant(ha), hb[idx], idx).value)
    return total
