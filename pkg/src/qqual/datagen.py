"""Deterministic synthetic dataset factories for the classification and
regression benchmarks.

Regression curves sample a named target function on a uniform grid with
additive Gaussian noise.  Classification sets place two classes on a
shared smooth generator, separated by a constant per-feature offset, so
that the noiseless problem stays provably nearest-centroid separable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

# Named in rough order of increasing wiggliness/spectral content.
REGRESSION_FUNCTIONS: Dict[str, callable] = {
    "quad": lambda x: x ** 2 / 4.0 - 1.0,
    "tanh3x": lambda x: np.tanh(3.0 * x),
    "sin2x_quad": lambda x: np.sin(2.0 * x) + 0.3 * x ** 2,
    "cos4x": lambda x: np.cos(4.0 * x),
    "damped_cos4x": lambda x: np.cos(4.0 * x) * np.exp(-x ** 2 / 4.0),
    "two_tone": lambda x: np.sin(5.0 * x) + np.cos(2.0 * x),
}

# Classification generator: three base frequencies, none of whose first or
# second harmonics is a multiple of 8 or 16, so the per-sample feature sum
# vanishes identically for equally spaced phases (keeps the noiseless
# nearest-centroid margin exact).
_CLASS_FREQS = (1, 3, 5)
_CLASS_OFFSET = 1.0


def _class_generator(k: int, t: np.ndarray) -> np.ndarray:
    w = _CLASS_FREQS[k]
    return np.sin(w * t) + 0.2 * np.cos(2 * w * t)


@dataclass
class Curve:
    xs: np.ndarray
    ys_true: np.ndarray
    ys_noisy: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=np.float64)
        self.ys_true = np.asarray(self.ys_true, dtype=np.float64)
        self.ys_noisy = np.asarray(self.ys_noisy, dtype=np.float64)
        if not (len(self.xs) == len(self.ys_true) == len(self.ys_noisy)):
            raise ValueError("curve arrays must share one length")
        if len(self.xs) >= 2:
            steps = np.diff(self.xs)
            if np.any(steps <= 0):
                raise ValueError("xs must be strictly increasing")
            if np.max(np.abs(steps - steps[0])) > 1e-12:
                raise ValueError("xs must be uniformly spaced")


@dataclass
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y)
        if self.X.ndim != 2 or len(self.X) == 0:
            raise ValueError("X must be a nonempty (n, F) matrix")
        if len(self.X) != len(self.y):
            raise ValueError("feature/label count mismatch")
        if not np.all(np.isin(self.y, (0, 1))):
            raise ValueError("labels must be 0/1")

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


def gen_regression_curve(function_id: str, n_points: int = 100,
                         x_range: Tuple[float, float] = (-2.0, 4.0),
                         sigma: float = 0.1, seed: int = 0) -> Curve:
    """Sample a target function on a uniform grid, endpoints included."""
    if function_id not in REGRESSION_FUNCTIONS:
        raise ValueError(f"unknown function_id {function_id!r}; "
                         f"known: {sorted(REGRESSION_FUNCTIONS)}")
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    xs = np.linspace(x_range[0], x_range[1], n_points)
    ys_true = REGRESSION_FUNCTIONS[function_id](xs)
    rng = np.random.default_rng(seed)
    noise = sigma * rng.standard_normal(n_points) if sigma > 0 else np.zeros(n_points)
    return Curve(xs, ys_true, ys_true + noise,
                 meta={"function_id": function_id, "sigma": sigma, "seed": seed})


def gen_classification_set(kind: str = "3func", n_pairs: int = 250, n_features: int = 8,
                           noise_level: float = 0.05, seed: int = 0,
                           delta: float = _CLASS_OFFSET) -> LabeledDataset:
    """Two-class set: X_j = g_k(t + phi_j) + class * delta + noise.

    Latent t is uniform per sample; phases phi_j are equally spaced with a
    seeded global shift; ``1func`` uses one generator, ``3func`` draws k
    per sample from three.  Noise is Gaussian with per-feature standard
    deviation noise_level * std(noiseless feature).  Classes balanced
    within one sample.
    """
    if kind not in ("1func", "3func"):
        raise ValueError(f"kind must be '1func' or '3func', got {kind!r}")
    if n_pairs < 2:
        raise ValueError("n_pairs must be >= 2")
    if n_features < 1:
        raise ValueError("n_features must be >= 1")
    if noise_level < 0:
        raise ValueError("noise_level must be >= 0")
    rng = np.random.default_rng(seed)
    n = n_pairs
    phases = 2.0 * np.pi * np.arange(n_features) / n_features + rng.uniform(0, 2 * np.pi)
    t = rng.uniform(0, 2 * np.pi, size=n)
    ks = np.zeros(n, dtype=int) if kind == "1func" else rng.integers(0, 3, size=n)
    labels = np.zeros(n, dtype=int)
    labels[: n // 2] = 1
    labels = labels[rng.permutation(n)]
    clean = np.empty((n, n_features))
    for k in range(3):
        sel = ks == k
        if np.any(sel):
            clean[sel] = _class_generator(k, t[sel, None] + phases[None, :])
    clean = clean + labels[:, None] * delta
    if noise_level > 0:
        sd = clean.std(axis=0)
        X = clean + rng.standard_normal(clean.shape) * (noise_level * sd)
    else:
        X = clean
    return LabeledDataset(X, labels, meta={
        "kind": kind, "n_features": n_features, "noise_level": noise_level,
        "seed": seed, "delta": delta})


def split(dataset: LabeledDataset, train_fraction: float, seed: int = 0
          ) -> Tuple[LabeledDataset, LabeledDataset]:
    """Stratified, seeded, disjoint and exhaustive train/test split."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(dataset.y == cls)
        idx = idx[rng.permutation(len(idx))]
        k = int(round(train_fraction * len(idx)))
        train_idx.extend(idx[:k])
        test_idx.extend(idx[k:])
    if not train_idx or not test_idx:
        raise ValueError("degenerate split: one side is empty")
    train_idx = np.sort(np.asarray(train_idx))
    test_idx = np.sort(np.asarray(test_idx))
    meta = dict(dataset.meta)
    return (LabeledDataset(dataset.X[train_idx], dataset.y[train_idx], {**meta, "split": "train"}),
            LabeledDataset(dataset.X[test_idx], dataset.y[test_idx], {**meta, "split": "test"}))


def dataset_to_csv(dataset: LabeledDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(dataset.n_features)] + ["label"])
        for row, label in zip(dataset.X, dataset.y):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def dataset_from_csv(path) -> LabeledDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[-1] != "label":
            raise ValueError("expected feature columns then a 'label' column")
        rows, labels = [], []
        for rec in reader:
            rows.append([float(v) for v in rec[:-1]])
            labels.append(int(rec[-1]))
    return LabeledDataset(np.asarray(rows), np.asarray(labels))


def curve_to_csv(curve: Curve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y_true", "y_noisy"])
        for x, yt, yn in zip(curve.xs, curve.ys_true, curve.ys_noisy):
            writer.writerow([repr(float(x)), repr(float(yt)), repr(float(yn))])


def curve_from_csv(path) -> Curve:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["x", "y_true", "y_noisy"]:
            raise ValueError("expected header x,y_true,y_noisy")
        cols = list(zip(*[[float(v) for v in rec] for rec in reader]))
    return Curve(np.asarray(cols[0]), np.asarray(cols[1]), np.asarray(cols[2]))
