"""Parameter storage, initialization, optimizers, and small network blocks.

Parameters live in a ParamStore keyed by dotted names ("imputer.W1").  The
same store object is threaded through forward functions, the optimizer, and
the finite-difference oracle, so every consumer sees one consistent set of
values and gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    ShapeError,
    Tensor,
    add_rowvec,
    constant,
    matmul,
    mul,
    relu,
)


class ParamStore:
    """Named trainable matrices with shape-matched gradient buffers."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(value, dtype=np.float64), requires_grad=True)
        t.grad = np.zeros_like(t.value)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = np.zeros_like(t.value)

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.value.copy() for name, t in self._params.items()}

    def restore(self, values: dict[str, np.ndarray]) -> None:
        for name, v in values.items():
            t = self._params[name]
            if t.value.shape != v.shape:
                raise ShapeError(f"restore {name}: {t.value.shape} vs {v.shape}")
            t.value = v.copy()


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Symmetric uniform init scaled by the layer's fan sizes."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_affine(store: ParamStore, prefix: str, fan_in: int, fan_out: int,
                rng: np.random.Generator, bias: bool = True) -> None:
    store.add(f"{prefix}.W", glorot(rng, fan_in, fan_out))
    if bias:
        store.add(f"{prefix}.b", np.zeros((1, fan_out)))


def init_mlp2(store: ParamStore, prefix: str, dims: tuple[int, int, int],
              rng: np.random.Generator) -> None:
    """Two affine layers: dims = (input, hidden, output)."""
    a, h, b = dims
    store.add(f"{prefix}.W1", glorot(rng, a, h))
    store.add(f"{prefix}.b1", np.zeros((1, h)))
    store.add(f"{prefix}.W2", glorot(rng, h, b))
    store.add(f"{prefix}.b2", np.zeros((1, b)))


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout multiplier: zeros with probability rate, else 1/(1-rate)."""
    if not (0.0 <= rate < 1.0):
        raise ValueError(f"dropout rate {rate} outside [0, 1)")
    return (rng.random(shape) >= rate) / (1.0 - rate)


def mlp2_forward(store: ParamStore, prefix: str, X,
                 dropout: float = 0.0,
                 rng: np.random.Generator | None = None) -> Tensor:
    """ReLU(X·W1 + b1)·W2 + b2 on the tape.

    Dropout (inverted, training only) is applied after the hidden activation
    when a rate and generator are given.
    """
    x = X if isinstance(X, Tensor) else constant(X)
    h = relu(add_rowvec(matmul(x, store[f"{prefix}.W1"]), store[f"{prefix}.b1"]))
    if dropout > 0.0:
        if rng is None:
            raise ValueError("dropout requires a generator")
        h = mul(h, constant(dropout_mask(h.value.shape, dropout, rng)))
    return add_rowvec(matmul(h, store[f"{prefix}.W2"]), store[f"{prefix}.b2"])


# ---------------------------------------------------------------------------
# optimization


@dataclass(frozen=True)
class OptimConfig:
    learning_rate: float
    weight_decay: float = 0.0
    method: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate {self.learning_rate} must be nonnegative")
        if self.method not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer method {self.method!r}")


class Optimizer:
    """sgd or adam over a ParamStore; grads are zeroed after each step."""

    def __init__(self, store: ParamStore, config: OptimConfig):
        self.store = store
        self.config = config
        self._m = {name: np.zeros_like(t.value) for name, t in store.items()}
        self._v = {name: np.zeros_like(t.value) for name, t in store.items()}
        self._t = 0

    def step(self) -> None:
        cfg = self.config
        self._t += 1
        for name, p in self.store.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.value)
            if cfg.weight_decay:
                g = g + cfg.weight_decay * p.value
            if cfg.method == "sgd":
                new = p.value - cfg.learning_rate * g
            else:
                m = cfg.beta1 * self._m[name] + (1 - cfg.beta1) * g
                v = cfg.beta2 * self._v[name] + (1 - cfg.beta2) * g * g
                self._m[name], self._v[name] = m, v
                m_hat = m / (1 - cfg.beta1 ** self._t)
                v_hat = v / (1 - cfg.beta2 ** self._t)
                new = p.value - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)
            if not np.all(np.isfinite(new)):
                raise FloatingPointError(f"non-finite update for parameter {name!r}")
            p.value = new
        self.store.zero_grad()


# ---------------------------------------------------------------------------
# verification oracle


def finite_diff_grad(loss_fn, store: ParamStore, eps: float = 1e-5,
                     names=None) -> dict[str, np.ndarray]:
    """Central-difference gradients, entry by entry.

    loss_fn must be a pure function of the store's current values.  This is
    deliberately independent of the tape: it calls loss_fn 2·(entry count)
    times and never inspects analytic gradients.
    """
    grads = {}
    for name in (names if names is not None else store.names()):
        value = store[name].value
        g = np.zeros_like(value)
        it = np.nditer(value, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = value[idx]
            value[idx] = orig + eps
            lp = float(loss_fn())
            value[idx] = orig - eps
            lm = float(loss_fn())
            value[idx] = orig
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise FloatingPointError(f"non-finite loss while probing {name}{idx}")
            g[idx] = (lp - lm) / (2.0 * eps)
            it.iternext()
        grads[name] = g
    return grads


# ---------------------------------------------------------------------------
# shared kernels


def cosine_matrix(U: np.ndarray, V: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """S[i][j] = cosine of U row i with V row j, zero rows floored at eps."""
    U = np.asarray(U, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if U.ndim != 2 or V.ndim != 2 or U.shape[1] != V.shape[1]:
        raise ShapeError(f"cosine_matrix: {U.shape} vs {V.shape}")
    un = U / np.maximum(np.linalg.norm(U, axis=1, keepdims=True), eps)
    vn = V / np.maximum(np.linalg.norm(V, axis=1, keepdims=True), eps)
    return un @ vn.T


# ---------------------------------------------------------------------------
# checkpoints


def save_params(store: ParamStore, path: str) -> None:
    """Write all parameters as tsv: a name/shape header line, then the rows."""
    with open(path, "w", encoding="utf-8") as fh:
        for name, t in sorted(store.items()):
            r, c = t.value.shape
            fh.write(f"{name}\t{r}\t{c}\n")
            for row in t.value:
                fh.write("\t".join(format(v, ".17g") for v in row) + "\n")


def load_params(path: str) -> dict[str, np.ndarray]:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    i = 0
    while i < len(lines):
        if not lines[i]:
            i += 1
            continue
        name, r, c = lines[i].split("\t")
        r, c = int(r), int(c)
        rows = [list(map(float, lines[i + 1 + j].split("\t"))) for j in range(r)]
        arr = np.asarray(rows, dtype=np.float64)
        if arr.shape != (r, c):
            raise ValueError(f"{path}: shape header for {name} disagrees with data")
        out[name] = arr
        i += 1 + r
    return out
