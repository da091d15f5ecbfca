"""Dual contrastive objective aligning the two reconstruction paths.

Both terms are the standard negative-log softmax (InfoNCE) over cosine
similarities at a temperature: the feature term matches each node's
completed feature row against its propagated representation, and the
structure term matches each node's decoded adjacency row against its
sparsified diffusion row.  Positives sit on the diagonal; every other node
is a negative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse as sp

from .autodiff import (
    Tensor,
    add,
    diag_part,
    matmul,
    right_matmul_t,
    row_logsumexp,
    row_normalize,
    scale,
    sum_all,
    transpose,
)

NORM_EPS = 1e-12


@dataclass(frozen=True)
class ContrastiveConfig:
    """temperature scales the similarities; the diagonal is always the positive."""

    temperature: float = 0.5
    include_self_in_negatives: bool = False

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError(f"temperature {self.temperature} must be positive")
        if self.include_self_in_negatives:
            raise ValueError("the diagonal is the positive pair, not a negative")


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _infonce(sim: Tensor, temperature: float) -> Tensor:
    """Sum over rows of log-sum-exp minus the diagonal, at the temperature."""
    s = scale(sim, 1.0 / temperature)
    return sum_all(add(row_logsumexp(s), scale(diag_part(s), -1.0)))


def _normalize_rows_const(m, eps: float = NORM_EPS):
    """Row-normalize a gradient-free matrix, dense or sparse."""
    if sp.issparse(m):
        m = sp.csr_array(m)
        norms = np.sqrt(np.asarray(m.multiply(m).sum(axis=1)).ravel())
        return sp.diags_array(1.0 / np.maximum(norms, eps)) @ m
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return m / np.maximum(norms, eps)


def feature_contrastive_loss(completed, propagated, temperature: float) -> Tensor:
    """InfoNCE between completed feature rows and propagated representations."""
    x = row_normalize(_as_tensor(completed), NORM_EPS)
    z = row_normalize(_as_tensor(propagated), NORM_EPS)
    return _infonce(matmul(x, transpose(z)), temperature)


def structure_contrastive_loss(decoded_adj, diffusion, temperature: float) -> Tensor:
    """InfoNCE between decoded adjacency rows and sparsified diffusion rows.

    The diffusion side is a training constant, so its row normalization
    happens off the tape; sparse input keeps the similarity product cheap.
    """
    a = row_normalize(_as_tensor(decoded_adj), NORM_EPS)
    rows = _normalize_rows_const(diffusion)
    if sp.issparse(rows):
        sim = right_matmul_t(a, rows)
    else:
        sim = matmul(a, transpose(Tensor(rows)))
    return _infonce(sim, temperature)


def total_contrastive_loss(completed, propagated, decoded_adj, diffusion,
                           config: ContrastiveConfig) -> tuple[Tensor, Tensor, Tensor]:
    """Sum of the two terms; returns (total, feature term, structure term)."""
    l_f = feature_contrastive_loss(completed, propagated, config.temperature)
    l_s = structure_contrastive_loss(decoded_adj, diffusion, config.temperature)
    return add(l_f, l_s), l_f, l_s
