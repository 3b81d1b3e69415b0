"""Shared training loop: config, SGD/Adam updates, loss primitives.

Both model families train through the same loop so that paired benchmark
runs differ only in the model, never in the optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

LOSS_KINDS = ("mse", "bce")
_BCE_EPS = 1e-7


class TrainingDivergence(RuntimeError):
    """Raised when training hits a non-finite loss or parameter vector."""

    def __init__(self, epoch: int, param_norm: float, detail: str = "non-finite loss"):
        self.epoch = epoch
        self.param_norm = param_norm
        super().__init__(f"{detail} at epoch {epoch} (parameter norm {param_norm:.6g})")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    learning_rate: float = 0.05
    optimizer: str = "adam"  # "adam" or "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: Optional[int] = None  # None = full batch
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def loss_and_output_grad(kind: str, pred: np.ndarray, target: np.ndarray):
    """Mean loss over the batch and its gradient w.r.t. the predictions."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    n = pred.shape[0]
    if kind == "mse":
        diff = pred - target
        with np.errstate(over="ignore"):  # divergence surfaces as inf, caught by fit()
            return float(np.mean(diff ** 2)), 2.0 * diff / n
    if kind == "bce":
        p = np.clip(pred, _BCE_EPS, 1.0 - _BCE_EPS)
        loss = -np.mean(target * np.log(p) + (1.0 - target) * np.log1p(-p))
        return float(loss), (p - target) / (p * (1.0 - p)) / n
    raise ValueError(f"unknown loss kind {kind!r}")


class _Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return params - self.lr * grad


class _Adam:
    def __init__(self, lr: float, beta1: float, beta2: float, eps: float, n_params: int):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad ** 2
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(cfg: TrainConfig, n_params: int):
    if cfg.optimizer == "sgd":
        return _Sgd(cfg.learning_rate)
    return _Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps, n_params)


def fit(
    model,
    X: np.ndarray,
    y: np.ndarray,
    loss: str,
    cfg: TrainConfig,
    on_epoch: Optional[Callable[[int, object, float], None]] = None,
) -> List[float]:
    """Train a model in place; returns the per-epoch loss history.

    The model exposes ``params`` (flat float vector, settable) and
    ``loss_and_grad(X, y, loss)`` evaluated at its current params.  Each
    epoch is one full pass; history records the mean pre-update batch
    loss.  Mini-batch order reshuffles per epoch from the config seed.
    """
    if loss not in LOSS_KINDS:
        raise ValueError(f"unknown loss kind {loss!r}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("empty dataset")
    if len(X) != len(y):
        raise ValueError("feature/label length mismatch")
    n = len(X)
    bs = n if cfg.batch_size is None else min(cfg.batch_size, n)
    opt = make_optimizer(cfg, model.params.size)
    rng = np.random.default_rng(cfg.seed)
    history: List[float] = []
    for epoch in range(cfg.epochs):
        order = np.arange(n) if bs == n else rng.permutation(n)
        batch_losses = []
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            value, grad = model.loss_and_grad(X[idx], y[idx], loss)
            if not np.isfinite(value):
                raise TrainingDivergence(epoch, float(np.linalg.norm(model.params)))
            batch_losses.append(value)
            new_params = opt.step(model.params, grad)
            if not np.all(np.isfinite(new_params)):
                raise TrainingDivergence(
                    epoch, float(np.linalg.norm(model.params)), "non-finite parameters"
                )
            model.params = new_params
        epoch_loss = float(np.mean(batch_losses))
        history.append(epoch_loss)
        if on_epoch is not None:
            on_epoch(epoch + 1, model, epoch_loss)
    return history
