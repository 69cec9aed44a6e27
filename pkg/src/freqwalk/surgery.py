"""Conflict-aware aggregation of per-criterion gradients.

Each gradient is projected off every other gradient it conflicts with
(negative inner product) before the projected copies are summed. Projection
targets are the raw input gradients, not the partially projected ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyGradientSet

# targets shorter than this are skipped: identically-zero gradients (a flat
# criterion) must not turn the projection into 0/0
ZERO_NORM = 1e-15


@dataclass(frozen=True)
class SurgeryConfig:
    """Iteration order for both the outer loop and the projection targets.

    order: permutation of gradient indices; None keeps the given order.
    shuffle_seed: draws a random permutation instead (reproducible per seed).
    printed_numerator: compatibility variant that scales the projection by
    (g_p . g_p) instead of (g_p . g'); it does not produce an orthogonal
    update and exists only for side-by-side inspection.
    """

    order: Optional[Sequence[int]] = None
    shuffle_seed: Optional[int] = None
    printed_numerator: bool = False


def surgery(gradients: Sequence[np.ndarray], cfg: Optional[SurgeryConfig] = None) -> np.ndarray:
    """Aggregate gradients with pairwise conflict projection; returns their sum."""
    if cfg is None:
        cfg = SurgeryConfig()
    grads = [np.asarray(g, dtype=float) for g in gradients]
    if len(grads) == 0:
        raise EmptyGradientSet("surgery needs at least one gradient")

    if cfg.shuffle_seed is not None:
        order = list(np.random.default_rng(cfg.shuffle_seed).permutation(len(grads)))
    elif cfg.order is not None:
        order = list(cfg.order)
        if sorted(order) != list(range(len(grads))):
            raise ValueError("order must be a permutation of the gradient indices")
    else:
        order = list(range(len(grads)))

    total = np.zeros_like(grads[0])
    for i in order:
        gp = grads[i].copy()
        for j in order:
            if j == i:
                continue
            gq = grads[j]
            nq = float(np.dot(gq, gq))
            if np.sqrt(nq) < ZERO_NORM:
                continue
            dot = float(np.dot(gp, gq))
            if dot < 0.0:
                num = float(np.dot(gp, gp)) if cfg.printed_numerator else dot
                gp = gp - (num / nq) * gq
        total = total + gp
    return total
