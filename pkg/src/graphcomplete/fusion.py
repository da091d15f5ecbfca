"""Attention fusion of the two reconstructed feature views.

Each view's row is projected to a small attention space, scored against a
learned vector, and squashed with tanh, giving one scalar per (node, view).
A per-node two-way softmax turns the scalars into convex weights, and the
fused row is the weighted combination of the two views' rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    ShapeError,
    Tensor,
    add,
    add_rowvec,
    concat_cols,
    matmul,
    mul_colvec,
    row_softmax,
    slice_cols,
    tanh,
)
from .nn import ParamStore, glorot


@dataclass(frozen=True)
class FusionOut:
    """fused: (n, d) combined features; weights: (n, 2) per-node view weights.

    Both fields are tape tensors when built during training; .value gives
    the arrays.
    """

    fused: Tensor
    weights: Tensor


def init_fusion(store: ParamStore, d: int, attention_dim: int,
                rng: np.random.Generator, prefix: str = "fusion") -> None:
    """One projection and one score vector per view, shared attention width."""
    store.add(f"{prefix}.proj_f.W", glorot(rng, d, attention_dim))
    store.add(f"{prefix}.proj_f.b", np.zeros((1, attention_dim)))
    store.add(f"{prefix}.proj_s.W", glorot(rng, d, attention_dim))
    store.add(f"{prefix}.proj_s.b", np.zeros((1, attention_dim)))
    store.add(f"{prefix}.score_f", glorot(rng, attention_dim, 1))
    store.add(f"{prefix}.score_s", glorot(rng, attention_dim, 1))


def _gate(view: Tensor, store: ParamStore, prefix: str, side: str) -> Tensor:
    proj = add_rowvec(matmul(view, store[f"{prefix}.proj_{side}.W"]),
                      store[f"{prefix}.proj_{side}.b"])
    return tanh(matmul(proj, store[f"{prefix}.score_{side}"]))


def attention_fuse(feature_view, structure_view, store: ParamStore, prefix: str = "fusion") -> FusionOut:
    """Combine the two views row by row with learned convex weights."""
    x = feature_view if isinstance(feature_view, Tensor) else Tensor(np.asarray(feature_view, dtype=np.float64))
    z = structure_view if isinstance(structure_view, Tensor) else Tensor(np.asarray(structure_view, dtype=np.float64))
    if x.value.shape != z.value.shape:
        raise ShapeError(f"views differ: {x.value.shape} vs {z.value.shape}")
    gates = concat_cols(_gate(x, store, prefix, "f"), _gate(z, store, prefix, "s"))
    weights = row_softmax(gates)
    fused = add(mul_colvec(x, slice_cols(weights, 0, 1)),
                mul_colvec(z, slice_cols(weights, 1, 2)))
    return FusionOut(fused=fused, weights=weights)


def export_fusion_weights(out: FusionOut, path: str, header: str | None = None) -> None:
    """tsv of per-node weights: node, weight on the feature view, on the structure view."""
    w = out.weights.value
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write("node\tw_feature\tw_structure\n")
        for i in range(w.shape[0]):
            fh.write(f"{i}\t{format(w[i, 0], '.12g')}\t{format(w[i, 1], '.12g')}\n")
