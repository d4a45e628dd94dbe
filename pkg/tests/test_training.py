import csv

import numpy as np
import pytest
import torch
from torch import nn

from newsseg.errors import DivergenceError, EmptyInput, ValidationError
from newsseg.models import ParameterStore, TrainConfig, TransformerConfig, build_model, evaluate, train, write_epoch_log


def blobs(n=60, seed=0):
    """Two Gaussian blobs far apart along a known direction."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    x = rng.normal(0, 0.3, (n, 2)) + np.where(y[:, None] == 0, [-2.0, 1.0], [2.0, -1.0])
    return [((torch.tensor(xi, dtype=torch.float32),), int(yi)) for xi, yi in zip(x, y)], x, y


def cfg(**kw):
    base = dict(optimizer="adam", learning_rate=0.05, batch_size=8, max_epochs=30, early_stop_patience=None)
    base.update(kw)
    return TrainConfig(**base)


def snapshot(model):
    return ParameterStore.from_module(model)


class TestLearning:
    def test_separable_reaches_perfect_accuracy(self):
        data, x, y = blobs()
        # closed-form check that the data really is separated by w = (-2, 1)
        assert np.all((x @ np.array([-2.0, 1.0]) > 0) == (y == 0))
        torch.manual_seed(0)
        model = nn.Linear(2, 2)
        result = train(model, data, cfg(), seed=0)
        assert evaluate(model, data)[1] == 1.0
        assert result.log[-1].train_acc == 1.0

    def test_loss_decreases(self):
        data, _, _ = blobs()
        torch.manual_seed(0)
        result = train(nn.Linear(2, 2), data, cfg(max_epochs=10), seed=0)
        assert result.log[-1].train_loss < result.log[0].train_loss

    def test_deterministic(self):
        data, _, _ = blobs()
        results = []
        for _ in range(2):
            torch.manual_seed(1)
            results.append(train(nn.Linear(2, 2), data, cfg(max_epochs=5), seed=3))
        assert results[0].parameters.equals(results[1].parameters)
        assert results[0].log == results[1].log

    def test_weighted_sampling_runs(self):
        data, _, _ = blobs()
        data = data[:40] + [d for d in data[40:] if d[1] == 0]
        torch.manual_seed(0)
        result = train(nn.Linear(2, 2), data, cfg(max_epochs=5, weighted_sampling=True), seed=0)
        assert len(result.log) == 5


class TestOptimizers:
    def test_zero_learning_rate_leaves_weights_unchanged(self):
        data, _, _ = blobs()
        torch.manual_seed(0)
        model = build_model("ast", TransformerConfig(layers=1, heads=2, hidden=8, patch=8, spec_frames=10, num_classes=2))
        before = snapshot(model)
        spec_data = [((torch.randn(128, 10),), i % 2) for i in range(6)]
        for opt in ("adam", "adamw"):
            train(model, spec_data, cfg(optimizer=opt, learning_rate=0.0, max_epochs=2), seed=0)
            assert snapshot(model).equals(before)

    def test_adamw_without_decay_equals_adam(self):
        data, _, _ = blobs()
        out = []
        for opt in ("adam", "adamw"):
            torch.manual_seed(0)
            model = nn.Linear(2, 2)
            train(model, data, cfg(optimizer=opt, weight_decay=0.0, max_epochs=4), seed=0)
            out.append(snapshot(model))
        assert out[0].equals(out[1])

    def test_default_decay_differs(self):
        data, _, _ = blobs()
        out = []
        for opt in ("adam", "adamw"):
            torch.manual_seed(0)
            model = nn.Linear(2, 2)
            train(model, data, cfg(optimizer=opt, max_epochs=4), seed=0)
            out.append(snapshot(model))
        assert not out[0].equals(out[1])


class TestEarlyStopping:
    def test_constant_loss_stops_after_patience(self, tmp_path):
        data, _, _ = blobs()
        torch.manual_seed(0)
        result = train(nn.Linear(2, 2), data, cfg(learning_rate=0.0, early_stop_patience=15, max_epochs=100), seed=0)
        assert result.stopped_early and result.epochs_run == 16 and result.best_epoch == 1
        assert [r.improved for r in result.log] == [True] + [False] * 15
        write_epoch_log(result.log, tmp_path / "log.csv")
        rows = list(csv.DictReader(open(tmp_path / "log.csv")))
        assert len(rows) == 16 and rows[-1]["epoch"] == "16"

    def test_restore_best(self):
        data, _, _ = blobs()
        val = [(x, 1 - y) for x, y in data]  # validation that gets worse as training improves
        torch.manual_seed(0)
        model = nn.Linear(2, 2)
        init = snapshot(model)
        result = train(model, data, cfg(early_stop_patience=3, max_epochs=50), seed=0, val_data=val)
        best = result.log[result.best_epoch - 1]
        assert evaluate(model, val)[0] == pytest.approx(best.val_loss, rel=1e-6)
        assert result.parameters.equals(snapshot(model))
        assert not init.equals(snapshot(model)) or result.best_epoch == 1


class TestErrors:
    def test_empty(self):
        with pytest.raises(EmptyInput):
            train(nn.Linear(2, 2), [], cfg())

    def test_label_out_of_range(self):
        with pytest.raises(ValidationError):
            train(nn.Linear(2, 2), [((torch.zeros(2),), 3)], cfg())

    def test_divergence(self):
        data = [((torch.tensor([float("inf"), 0.0]),), 0)]
        with pytest.raises(DivergenceError):
            train(nn.Linear(2, 2), data, cfg())
