"""Deterministic mini-batch training with cross-entropy and early stopping."""

from __future__ import annotations

import copy
import csv
import logging
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from ..errors import DivergenceError, EmptyInput, ValidationError
from .config import TrainConfig
from .store import ParameterStore

log = logging.getLogger(__name__)

# A dataset is a sequence of (inputs, label) where inputs is a tuple of
# per-example tensors that the model consumes positionally.
Example = tuple[tuple[torch.Tensor, ...], int]


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    improved: bool


@dataclass
class TrainResult:
    parameters: ParameterStore
    log: list[EpochRecord]
    best_epoch: int
    stopped_early: bool

    @property
    def epochs_run(self) -> int:
        return len(self.log)


def make_optimizer(params, cfg: TrainConfig) -> torch.optim.Optimizer:
    kwargs = dict(lr=cfg.learning_rate, betas=cfg.betas, eps=cfg.eps, weight_decay=cfg.effective_weight_decay)
    if cfg.optimizer == "adamw":
        return torch.optim.AdamW(params, **kwargs)
    return torch.optim.Adam(params, **kwargs)


def _collate(examples: Sequence[Example]):
    n_inputs = len(examples[0][0])
    inputs = tuple(torch.stack([ex[0][i] for ex in examples]) for i in range(n_inputs))
    labels = torch.tensor([ex[1] for ex in examples], dtype=torch.long)
    return inputs, labels


def _batches(n: int, batch_size: int, order: torch.Tensor):
    for i in range(0, n, batch_size):
        yield order[i : i + batch_size].tolist()


@torch.no_grad()
def evaluate(model: nn.Module, data: Sequence[Example], batch_size: int = 32) -> tuple[float, float]:
    """Mean cross-entropy and accuracy in eval mode."""
    was_training = model.training
    model.eval()
    total_loss = 0.0
    correct = 0
    for idx in _batches(len(data), batch_size, torch.arange(len(data))):
        inputs, labels = _collate([data[i] for i in idx])
        logits = model(*inputs)
        total_loss += F.cross_entropy(logits, labels, reduction="sum").item()
        correct += (logits.argmax(dim=-1) == labels).sum().item()
    model.train(was_training)
    return total_loss / len(data), correct / len(data)


def train(
    model: nn.Module,
    train_data: Sequence[Example],
    cfg: TrainConfig,
    seed: int = 0,
    val_data: Sequence[Example] | None = None,
    sample_weights: np.ndarray | None = None,
) -> TrainResult:
    """Train ``model`` in place and return its parameters plus an epoch log.

    Validation loss drives early stopping: training halts once it has failed
    to strictly improve for ``early_stop_patience`` consecutive epochs. When
    ``val_data`` is omitted the training set stands in for it. With
    ``restore_best`` the returned parameters (and the model) are those of the
    best validation epoch.
    """
    if len(train_data) == 0:
        raise EmptyInput("training set is empty")
    arity = _arity(model)
    labels = [ex[1] for ex in train_data]
    if arity is not None and (min(labels) < 0 or max(labels) >= arity):
        raise ValidationError(f"labels must lie in [0, {arity}), got range [{min(labels)}, {max(labels)}]")
    val_data = train_data if val_data is None else val_data
    if cfg.weighted_sampling and sample_weights is None:
        counts = np.bincount(labels)
        sample_weights = np.array([1.0 / counts[y] for y in labels])

    torch.manual_seed(seed)
    gen = torch.Generator().manual_seed(seed)
    opt = make_optimizer(model.parameters(), cfg)
    n = len(train_data)
    history: list[EpochRecord] = []
    best_loss = math.inf
    best_epoch = 0
    best_state = None
    stale = 0
    stopped_early = False

    for epoch in range(1, cfg.max_epochs + 1):
        model.train()
        if sample_weights is not None:
            order = torch.multinomial(torch.as_tensor(sample_weights, dtype=torch.float64), n, replacement=True, generator=gen)
        else:
            order = torch.randperm(n, generator=gen)
        running = 0.0
        correct = 0
        for idx in _batches(n, cfg.batch_size, order):
            inputs, y = _collate([train_data[i] for i in idx])
            logits = model(*inputs)
            if arity is None:
                arity = logits.shape[-1]
                if min(labels) < 0 or max(labels) >= arity:
                    raise ValidationError(f"labels must lie in [0, {arity}), got range [{min(labels)}, {max(labels)}]")
            loss = F.cross_entropy(logits, y)
            if not torch.isfinite(loss):
                raise DivergenceError(f"non-finite loss {loss.item()} at epoch {epoch}")
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            running += loss.item() * len(idx)
            correct += (logits.argmax(dim=-1) == y).sum().item()
        val_loss, val_acc = evaluate(model, val_data, cfg.batch_size)
        if not math.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        improved = val_loss < best_loss
        if improved:
            best_loss, best_epoch, stale = val_loss, epoch, 0
            if cfg.restore_best:
                best_state = copy.deepcopy(model.state_dict())
        else:
            stale += 1
        rec = EpochRecord(epoch, running / n, correct / n, val_loss, val_acc, improved)
        history.append(rec)
        log.debug("epoch %d: %s", epoch, rec)
        if cfg.early_stop_patience is not None and stale >= cfg.early_stop_patience:
            stopped_early = True
            log.info("early stop at epoch %d (best epoch %d, val loss %.4f)", epoch, best_epoch, best_loss)
            break

    if cfg.restore_best and best_state is not None:
        model.load_state_dict(best_state)
    return TrainResult(ParameterStore.from_module(model), history, best_epoch, stopped_early)


def _arity(model: nn.Module) -> int | None:
    cfg = getattr(model, "config", None)
    return getattr(cfg, "num_classes", None)


def write_epoch_log(records: Sequence[EpochRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(EpochRecord.__dataclass_fields__))
        w.writeheader()
        for r in records:
            w.writerow(asdict(r))
