"""Binary cross entropy and its masked dual-head variant.

Probabilities are clamped to [1e-7, 1 - 1e-7] against sigmoid
saturation. Masked labels are marked with a negative sentinel; a masked
head contributes neither loss nor gradient.
"""

from __future__ import annotations

import numpy as np

CLAMP = 1e-7
MASKED = -1.0


def _clamp(q):
    return np.clip(q, CLAMP, 1.0 - CLAMP)


def bce_loss(p, q) -> float:
    """Mean binary cross entropy of probabilities q against labels p."""
    p = np.asarray(p, dtype=float)
    q = _clamp(np.asarray(q, dtype=float))
    return float(np.mean(-(p * np.log(q) + (1.0 - p) * np.log(1.0 - q))))


def bce_loss_grad(p, q) -> np.ndarray:
    """d(mean BCE)/dq, elementwise."""
    p = np.asarray(p, dtype=float)
    qc = _clamp(np.asarray(q, dtype=float))
    return (qc - p) / (qc * (1.0 - qc)) / p.size


def masked_bce_loss(p, q) -> float:
    """BCE over the unmasked heads only.

    ``p``: labels (B, 2) with MASKED marking the head that carries no
    label for this sample; ``q``: probabilities (B, 2). Averaged over
    samples (each sample has exactly one labelled head).
    """
    p = np.asarray(p, dtype=float)
    q = _clamp(np.asarray(q, dtype=float))
    live = p != MASKED
    terms = -(p * np.log(q) + (1.0 - p) * np.log(1.0 - q))
    return float(np.sum(terms * live) / p.shape[0])


def masked_bce_loss_grad(p, q) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    qc = _clamp(np.asarray(q, dtype=float))
    live = p != MASKED
    g = np.where(live, (qc - p) / (qc * (1.0 - qc)), 0.0)
    return g / p.shape[0]
