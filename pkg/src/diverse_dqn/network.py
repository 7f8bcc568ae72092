"""Fully connected ReLU networks on top of the autodiff tensors."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import autodiff as ad


def layer_rng(seed: int, member: int, layer: int, identical_layers: bool = False) -> np.random.Generator:
    """Generator used to initialise one layer.

    With ``identical_layers`` every layer of every member draws from a fresh
    stream on the same fixed seed, so members start out identical.
    """
    if identical_layers:
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence([seed, member, layer]))


class MLP:
    """ReLU MLP. Weights are stored (fan_in, fan_out); biases (1, fan_out).

    Initialisation is uniform in +-1/sqrt(fan_in) for weights and biases
    alike (the usual Kaiming-uniform default of dense layers).
    """

    def __init__(self, sizes: Sequence[int], seed: int = 0, member: int = 0,
                 identical_layers: bool = False):
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least input and output sizes")
        self.sizes = list(sizes)
        self.params: list[ad.Tensor] = []
        for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            rng = layer_rng(seed, member, k, identical_layers)
            bound = 1.0 / np.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            b = rng.uniform(-bound, bound, size=(1, fan_out))
            self.params.append(ad.Tensor(w, requires_grad=True, name=f"W{k + 1}"))
            self.params.append(ad.Tensor(b, requires_grad=True, name=f"b{k + 1}"))

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def layer_labels(self) -> list[str]:
        labels = []
        for k in range(1, self.n_layers):
            labels += [f"pre{k}", f"post{k}"]
        return labels + ["out"]

    def forward(self, x: ad.Tensor) -> ad.Tensor:
        h = x
        for k in range(self.n_layers):
            w, b = self.params[2 * k], self.params[2 * k + 1]
            h = ad.add(ad.matmul(h, w), b)
            if k < self.n_layers - 1:
                h = ad.relu(h)
        return h

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Tape-free forward pass on a plain array (batch, features)."""
        h = np.atleast_2d(np.asarray(x, dtype=np.float64))
        last = self.n_layers - 1
        for k in range(self.n_layers):
            h = h @ self.params[2 * k].data + self.params[2 * k + 1].data
            if k < last:
                h = np.maximum(h, 0.0)
        return h

    def activations(self, x: np.ndarray) -> list[np.ndarray]:
        """Pre- and post-ReLU activations of each hidden layer, then the output."""
        h = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = []
        for k in range(self.n_layers):
            h = h @ self.params[2 * k].data + self.params[2 * k + 1].data
            out.append(h)
            if k < self.n_layers - 1:
                h = np.maximum(h, 0.0)
                out.append(h)
        return out

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.data.ravel() for p in self.params])

    def copy_from(self, other: "MLP") -> None:
        for mine, theirs in zip(self.params, other.params):
            mine.data[...] = theirs.data

    def clone(self) -> "MLP":
        twin = MLP.__new__(MLP)
        twin.sizes = list(self.sizes)
        twin.params = [ad.Tensor(p.data.copy(), requires_grad=True, name=p.name) for p in self.params]
        return twin

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def squared_norm(self) -> float:
        return float(sum(np.dot(p.data.ravel(), p.data.ravel()) for p in self.params))
