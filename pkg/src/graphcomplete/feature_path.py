"""Feature-reconstruction path.

Missing attribute entries are filled by a two-layer MLP applied to the
zero-filled feature rows; observed entries pass through untouched.  An
inner-product decoder then turns the completed features into a dense
soft adjacency, the structure view this path contributes.
"""

from __future__ import annotations

import numpy as np

from .autodiff import ShapeError, Tensor, matmul, sigmoid, transpose, where_mask
from .nn import ParamStore, mlp2_forward


def impute_features(features: np.ndarray, feature_mask: np.ndarray,
                    store: ParamStore, prefix: str = "imputer",
                    dropout: float = 0.0, rng=None) -> Tensor:
    """Complete missing entries with the imputer MLP.

    The merge keeps observed entries bit-exact and routes gradients only
    through the entries the network actually fills in.
    """
    features = np.asarray(features, dtype=np.float64)
    if feature_mask.shape != features.shape:
        raise ShapeError(f"mask {feature_mask.shape} vs features {features.shape}")
    d = features.shape[1]
    w1 = store[f"{prefix}.W1"].value
    w2 = store[f"{prefix}.W2"].value
    if w1.shape[0] != d or w2.shape[1] != d:
        raise ShapeError(f"imputer maps {w1.shape[0]} -> {w2.shape[1]}, features have d={d}")
    predicted = mlp2_forward(store, prefix, features, dropout=dropout, rng=rng)
    return where_mask(feature_mask, features, predicted)


def decode_structure(completed) -> Tensor:
    """Inner-product decoder: logistic of the feature Gram matrix."""
    x = completed if isinstance(completed, Tensor) else Tensor(np.asarray(completed, dtype=np.float64))
    return sigmoid(matmul(x, transpose(x)))
