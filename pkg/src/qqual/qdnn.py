"""Quantum network model: angle-encoded inputs, stacked trainable
rotation layers with CNOT-ring entanglers, Pauli-Z expectation readout,
and an affine output map.  Gradients of circuit angles use the exact
two-point shift rule; the output map trains by the chain rule."""

from __future__ import annotations

import json
from typing import List, Optional, Tuple

import numpy as np

from . import optim, qsim

READOUTS = ("single_z", "mean_z")


class QdnnModel:
    """Circuit plus readout and affine output map.

    ``trainable_map=True`` appends (scale, offset) to the trainable
    vector; a frozen map keeps them fixed, as in the classification
    squash p = (1 - <Z_0>)/2.
    """

    def __init__(self, circuit: qsim.CircuitSpec, theta: np.ndarray, readout: str,
                 scale: float = 1.0, offset: float = 0.0, trainable_map: bool = True,
                 readout_qubit: int = 0):
        if readout not in READOUTS:
            raise ValueError(f"unknown readout {readout!r}")
        if readout == "single_z" and not 0 <= readout_qubit < circuit.n_qubits:
            raise ValueError("readout qubit out of range")
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (circuit.n_params,):
            raise ValueError(f"expected {circuit.n_params} circuit params, got {theta.shape}")
        self.circuit = circuit
        self.theta = theta.copy()
        self.readout = readout
        self.readout_qubit = readout_qubit
        self.scale = float(scale)
        self.offset = float(offset)
        self.trainable_map = trainable_map

    @property
    def n_features(self) -> int:
        return self.circuit.n_features

    @property
    def params(self) -> np.ndarray:
        if self.trainable_map:
            return np.concatenate([self.theta, [self.scale, self.offset]])
        return self.theta.copy()

    @params.setter
    def params(self, flat: np.ndarray):
        flat = np.asarray(flat, dtype=np.float64)
        p = self.circuit.n_params
        expected = p + 2 if self.trainable_map else p
        if flat.shape != (expected,):
            raise ValueError(f"expected {expected} params, got {flat.shape}")
        self.theta = flat[:p].copy()
        if self.trainable_map:
            self.scale = float(flat[p])
            self.offset = float(flat[p + 1])

    def _readout_values(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        _, vals = qsim.run_circuit(self.circuit, theta, X)
        if self.readout == "mean_z":
            return vals.mean(axis=1)
        return vals[:, self.readout_qubit]

    def readout_expectations(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self._readout_values(self.theta, X)

    def forward(self, X: np.ndarray) -> np.ndarray:
        return self.scale * self.readout_expectations(X) + self.offset

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.forward(X)

    def loss_and_grad(self, X: np.ndarray, y: np.ndarray, loss: str) -> Tuple[float, np.ndarray]:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64)
        e = self._readout_values(self.theta, X)
        pred = self.scale * e + self.offset
        value, dpred = optim.loss_and_output_grad(loss, pred, y)
        grad_theta = np.zeros(self.circuit.n_params)
        shifted = self.theta.copy()
        for k in range(self.circuit.n_params):
            t = self.theta[k]
            shifted[k] = t + np.pi / 2
            plus = self._readout_values(shifted, X)
            shifted[k] = t - np.pi / 2
            minus = self._readout_values(shifted, X)
            shifted[k] = t
            de = 0.5 * (plus - minus)
            grad_theta[k] = self.scale * float(dpred @ de)
        if not self.trainable_map:
            return value, grad_theta
        d_scale = float(dpred @ e)
        d_offset = float(dpred.sum())
        return value, np.concatenate([grad_theta, [d_scale, d_offset]])


def _ring_layers(n_qubits: int, n_layers: int) -> List[List[qsim.Gate]]:
    layers: List[List[qsim.Gate]] = []
    p = 0
    for _ in range(n_layers):
        block: List[qsim.Gate] = []
        for q in range(n_qubits):
            block.append(qsim.ry(q, param=p))
            p += 1
        for q in range(n_qubits):
            block.append(qsim.rz(q, param=p))
            p += 1
        if n_qubits > 1:
            for q in range(n_qubits):
                block.append(qsim.cnot(q, (q + 1) % n_qubits))
        layers.append(block)
    return layers


def _observables(n_qubits: int, readout: str, readout_qubit: int):
    if readout == "single_z":
        return ((readout_qubit, "z"),)
    return tuple((q, "z") for q in range(n_qubits))


def _finish_build(n_qubits, embed, n_layers, task, seed, readout_qubit) -> QdnnModel:
    if task == "classification":
        readout, scale, offset, trainable = "single_z", -0.5, 0.5, False
    elif task == "regression":
        readout, scale, offset, trainable = "mean_z", 1.0, 0.0, True
    else:
        raise ValueError(f"unknown task {task!r}")
    layers = [embed] + _ring_layers(n_qubits, n_layers)
    circuit = qsim.CircuitSpec(n_qubits, layers, _observables(n_qubits, readout, readout_qubit))
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-np.pi / 10, np.pi / 10, size=circuit.n_params)
    return QdnnModel(circuit, theta, readout, scale, offset, trainable, readout_qubit)


def build_default_qdnn(n_features: int, n_layers: int = 2, task: str = "regression",
                       seed: int = 0) -> QdnnModel:
    """One qubit per feature: RX(x_i) embedding on qubit i, then n_layers
    of [RY, RZ on every qubit, CNOT ring]."""
    if not 1 <= n_features <= qsim.MAX_QUBITS:
        raise ValueError(f"n_features must be in 1..{qsim.MAX_QUBITS}")
    embed = [qsim.rx(q, feature=q) for q in range(n_features)]
    return _finish_build(n_features, embed, n_layers, task, seed, 0)


def build_paired_feature_qdnn(n_features: int, n_layers: int = 2, task: str = "regression",
                              seed: int = 0) -> QdnnModel:
    """Two features per qubit (RX then RZ), for feature counts past the
    qubit cap; qubit i encodes features i and q+i."""
    n_qubits = (n_features + 1) // 2
    if not 1 <= n_qubits <= qsim.MAX_QUBITS:
        raise ValueError(f"{n_features} features need {n_qubits} qubits, cap is {qsim.MAX_QUBITS}")
    embed = [qsim.rx(q, feature=q) for q in range(n_qubits)]
    embed += [qsim.rz(i - n_qubits, feature=i) for i in range(n_qubits, n_features)]
    return _finish_build(n_qubits, embed, n_layers, task, seed, 0)


def rescale_features(X: np.ndarray, lo: float = 0.0, hi: float = np.pi) -> np.ndarray:
    """Optional embedding preprocessing: min-max map each feature column
    onto [lo, hi] before the angles enter the circuit.  Off by default
    throughout; constant columns land on lo."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a 2-D feature matrix")
    col_lo = X.min(axis=0)
    span = X.max(axis=0) - col_lo
    span = np.where(span == 0.0, 1.0, span)
    return lo + (hi - lo) * (X - col_lo) / span


def qdnn_forward(model: QdnnModel, features) -> float:
    """Forward pass on one feature vector."""
    feats = np.asarray(features, dtype=np.float64).reshape(1, -1)
    if feats.shape[1] < model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {feats.shape[1]}")
    return float(model.forward(feats)[0])


def train_qdnn(model: QdnnModel, X, y, cfg: optim.TrainConfig, loss: str = "mse",
               on_epoch=None) -> Tuple[QdnnModel, List[float]]:
    """Train in place for cfg.epochs full passes; returns (model, history)."""
    history = optim.fit(model, X, y, loss, cfg, on_epoch=on_epoch)
    return model, history


def _gate_doc(gate: qsim.Gate) -> dict:
    return {k: v for k, v in (("kind", gate.kind), ("target", gate.target),
                              ("control", gate.control), ("angle", gate.angle),
                              ("feature", gate.feature), ("param", gate.param))
            if v is not None}


def save_checkpoint(model: QdnnModel, path, cfg: Optional[optim.TrainConfig] = None,
                    seed: Optional[int] = None) -> None:
    doc = {
        "family": "qdnn",
        "n_qubits": model.circuit.n_qubits,
        "layers": [[_gate_doc(g) for g in layer] for layer in model.circuit.layers],
        "observables": [list(o) for o in model.circuit.observables],
        "theta": model.theta.tolist(),
        "readout": model.readout,
        "readout_qubit": model.readout_qubit,
        "output_map": {"scale": model.scale, "offset": model.offset,
                       "trainable": model.trainable_map},
        "config": None if cfg is None else cfg.__dict__,
        "seed": seed,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path) -> QdnnModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("family") != "qdnn":
        raise ValueError("not a qdnn checkpoint")
    layers = [[qsim.Gate(**g) for g in layer] for layer in doc["layers"]]
    circuit = qsim.CircuitSpec(doc["n_qubits"], layers,
                               tuple((q, ax) for q, ax in doc["observables"]))
    om = doc["output_map"]
    return QdnnModel(circuit, np.asarray(doc["theta"]), doc["readout"],
                     om["scale"], om["offset"], om["trainable"], doc["readout_qubit"])
