"""Shared test helpers: gradient comparison and small fixtures."""

import numpy as np
import pytest

import graphcomplete as gc
from graphcomplete import autodiff as ad
from graphcomplete.nn import ParamStore, finite_diff_grad

# gradient acceptance rule used throughout: relative error below 1e-4,
# falling back to absolute error below 1e-7 where the analytic gradient
# is too small for a meaningful ratio
REL_TOL = 1e-4
ABS_TOL = 1e-7
SMALL = 1e-6
FD_EPS = 1e-5


def assert_grads_match(analytic: dict, numeric: dict):
    assert set(analytic) >= set(numeric)
    for name, num in numeric.items():
        ana = analytic[name]
        small = np.abs(ana) < SMALL
        if small.any():
            worst_abs = np.abs(ana - num)[small].max()
            assert worst_abs < ABS_TOL, f"{name}: absolute error {worst_abs}"
        big = ~small
        if big.any():
            denom = np.maximum(np.abs(ana), np.abs(num))[big]
            worst_rel = (np.abs(ana - num)[big] / denom).max()
            assert worst_rel < REL_TOL, f"{name}: relative error {worst_rel}"


def gradcheck(build_loss, store: ParamStore):
    """Compare tape gradients of build_loss(store) against central differences."""
    loss = build_loss(store)
    ad.backward(loss)
    analytic = {name: t.grad.copy() for name, t in store.items()}
    store.zero_grad()
    numeric = finite_diff_grad(lambda: build_loss(store).value, store, eps=FD_EPS)
    assert_grads_match(analytic, numeric)


@pytest.fixture
def tiny_masked_dataset():
    """6-node, d=4 two-block graph with a few masked entries and edges."""
    means = gc.data.two_block_features(4)
    ds = gc.generate_sbm(3, 2, 0.9, 0.2, means, 0.3, seed=2)
    return gc.apply_mask(ds, gc.MaskSpec(0.3, 0.2, "entry", 5))


def sbm_fixture(mean_scale: float = 0.05, seed: int = 0) -> gc.GraphDataset:
    """The 100-node two-block benchmark graph used by the longer tests.

    Block means sit close together relative to the noise so plain feature
    smoothing cannot saturate accuracy; that leaves measurable headroom
    for structure recovery.
    """
    means = gc.data.two_block_features(16) * mean_scale
    return gc.generate_sbm(50, 2, 0.3, 0.02, means, 0.5, seed=seed)
