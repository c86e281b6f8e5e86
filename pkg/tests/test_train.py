"""Batching, the pooled-softmax training step, and the fit loop."""

import random

import numpy as np
import pytest

from smartpaste import nn
from smartpaste.models import Hyper, ModelParams, build_vocab
from smartpaste.train import (Item, ItemCache, NonFiniteLoss, TrainConfig,
                              fit, make_batches, make_items,
                              per_placeholder_accuracy, train_step)


@pytest.fixture(scope="module")
def loc_setup(tiny_instances):
    insts = tiny_instances[:8]
    types, lexemes = build_vocab(insts)
    return insts, types, lexemes


def fresh_params(types, lexemes, variant="loc", seed=5):
    return ModelParams(variant, Hyper(hidden=8, tree_depth=4),
                       types, lexemes, seed=seed)


class TestBatching:
    def test_items_cover_all_placeholders(self, tiny_instances):
        items = make_items(tiny_instances)
        assert len(items) == sum(len(i.placeholders) for i in tiny_instances)
        assert all(it.truth in it.candidates for it in items)

    def test_batches_partition_items(self, tiny_instances):
        items = make_items(tiny_instances)
        batches = make_batches(items, 4, random.Random(0))
        flat = [it for b in batches for it in b]
        assert sorted(id(i) for i in flat) == sorted(id(i) for i in items)
        assert all(len(b) <= 4 for b in batches)

    def test_shuffle_is_seeded(self, tiny_instances):
        items = make_items(tiny_instances)
        a = make_batches(items, 4, random.Random(3))
        b = make_batches(items, 4, random.Random(3))
        assert [[id(x) for x in batch] for batch in a] == \
            [[id(x) for x in batch] for batch in b]


class TestTrainStep:
    def test_loss_finite_and_params_move(self, loc_setup):
        insts, types, lexemes = loc_setup
        params = fresh_params(types, lexemes)
        before = {n: t.data.copy() for n, t in params.named().items()}
        adam = nn.AdamState(params.tensors())
        items = make_items(insts)[:6]
        loss = train_step(params, items, adam, ItemCache(), 1e-2,
                          random.Random(0))
        assert np.isfinite(loss) and loss > 0
        moved = any(not np.array_equal(before[n], t.data)
                    for n, t in params.named().items())
        assert moved

    def test_gradients_cleared_after_step(self, loc_setup):
        insts, types, lexemes = loc_setup
        params = fresh_params(types, lexemes)
        adam = nn.AdamState(params.tensors())
        train_step(params, make_items(insts)[:4], adam, ItemCache(), 1e-3,
                   random.Random(0))
        assert all(t.grad is None for t in params.tensors())

    def test_in_batch_normalization_pools_other_truths(self, loc_setup):
        """The same item gets a different loss when other items join the
        batch, because their truth usage vectors enter its softmax."""
        insts, types, lexemes = loc_setup
        items = make_items(insts)[:4]

        def loss_of(batch):
            params = fresh_params(types, lexemes)
            adam = nn.AdamState(params.tensors())
            return train_step(params, batch, adam, ItemCache(), 0.0,
                              random.Random(0))

        alone = loss_of(items[:1])
        assert loss_of(items) != pytest.approx(alone)

    def test_non_finite_loss_raises(self, loc_setup):
        insts, types, lexemes = loc_setup
        params = fresh_params(types, lexemes)
        for t in params.tensors():
            t.data[...] = 1e300
        adam = nn.AdamState(params.tensors())
        with np.errstate(all="ignore"), pytest.raises(NonFiniteLoss):
            train_step(params, make_items(insts)[:2], adam, ItemCache(),
                       1e-3, random.Random(0))


class TestFit:
    def test_loss_decreases_and_accuracy_reported(self, loc_setup):
        insts, types, lexemes = loc_setup
        params = fresh_params(types, lexemes)
        logs = []
        result = fit(params, insts, insts,
                     TrainConfig(epochs=4, batch_size=4, lr=1e-2, seed=2,
                                 patience=4),
                     log=logs.append)
        assert len(logs) == result.epochs_run
        assert result.losses[-1] < result.losses[0]
        assert 0.0 <= result.best_valid_acc <= 1.0

    def test_deterministic_given_seed(self, loc_setup):
        insts, types, lexemes = loc_setup
        runs = []
        for _ in range(2):
            params = fresh_params(types, lexemes)
            fit(params, insts, insts,
                TrainConfig(epochs=2, batch_size=4, seed=7, patience=2))
            runs.append({n: t.data.copy()
                         for n, t in params.named().items()})
        for name in runs[0]:
            assert np.array_equal(runs[0][name], runs[1][name]), name

    def test_early_stopping_and_best_restore(self, loc_setup, tmp_path):
        insts, types, lexemes = loc_setup
        params = fresh_params(types, lexemes)
        ckpt = str(tmp_path / "best.json")
        result = fit(params, insts, insts,
                     TrainConfig(epochs=50, batch_size=4, lr=1e-2, seed=2,
                                 patience=2, checkpoint=ckpt))
        assert result.epochs_run <= 50
        # restored parameters reproduce the reported best accuracy
        acc = per_placeholder_accuracy(params, make_items(insts))
        assert acc == pytest.approx(result.best_valid_acc)

    def test_checkpoint_records_epoch(self, loc_setup, tmp_path):
        insts, types, lexemes = loc_setup
        params = fresh_params(types, lexemes)
        ckpt = str(tmp_path / "m.json")
        result = fit(params, insts, insts,
                     TrainConfig(epochs=2, batch_size=4, seed=2, patience=2,
                                 checkpoint=ckpt))
        loaded, cfg = ModelParams.load(ckpt)
        assert cfg["epoch"] == result.best_epoch
        for name, t in loaded.named().items():
            assert np.array_equal(t.data, params.named()[name].data)


def test_accuracy_requires_items(loc_setup):
    insts, types, lexemes = loc_setup
    with pytest.raises(nn.EmptyInput):
        per_placeholder_accuracy(fresh_params(types, lexemes), [])
