"""Linear-kernel HSIC and CKA between layer activations."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

DEGENERATE_TOL = 1e-12


class UndefinedSimilarityError(ValueError):
    """CKA is undefined when either representation is constant across examples."""


def linear_gram(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ValueError("need at least two examples")
    return x @ x.T


def centering(n: int) -> np.ndarray:
    return np.eye(n) - np.full((n, n), 1.0 / n)


def hsic(k, l) -> float:
    """Empirical HSIC, tr(K H L H) / (n - 1)^2."""
    k = np.asarray(k, dtype=np.float64)
    l = np.asarray(l, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape != l.shape:
        raise ValueError(f"HSIC needs two square Gram matrices of equal size, got {k.shape} and {l.shape}")
    n = k.shape[0]
    if n < 2:
        raise ValueError("need at least two examples")
    h = centering(n)
    return float(np.trace(k @ h @ l @ h) / (n - 1) ** 2)


def cka(x, y) -> float:
    """Linear CKA via the Gram-matrix form."""
    k, l = linear_gram(x), linear_gram(y)
    if k.shape != l.shape:
        raise ValueError("activation matrices must share the number of examples")
    # center once; tr(KHLH) == sum(Kc * Lc) for symmetric centred Grams
    h = centering(k.shape[0])
    kc, lc = h @ k @ h, h @ l @ h
    kk, ll = float(np.sum(kc * kc)), float(np.sum(lc * lc))
    if kk < DEGENERATE_TOL or ll < DEGENERATE_TOL:
        raise UndefinedSimilarityError("constant representation; CKA is undefined")
    return float(np.sum(kc * lc) / np.sqrt(kk * ll))


@dataclass
class ActivationMatrix:
    values: np.ndarray
    layer: str
    network: str = ""


def capture_activations(network, probe, tag: str = "") -> list[ActivationMatrix]:
    """Pre-/post-ReLU activations of each hidden layer, then the output."""
    labels = network.layer_labels()
    return [ActivationMatrix(a, label, tag) for a, label in zip(network.activations(probe), labels)]


@dataclass
class SimilarityHeatmap:
    """CKA between every layer of network A (rows) and network B (columns).

    Cells that are undefined (a constant layer) hold NaN.
    """

    values: np.ndarray
    row_labels: list[str]
    col_labels: list[str]

    def transpose(self) -> "SimilarityHeatmap":
        return SimilarityHeatmap(self.values.T.copy(), list(self.col_labels), list(self.row_labels))

    def corresponding(self) -> np.ndarray:
        """CKA of same-named layers (the anti-diagonal of the usual plot)."""
        shared = [l for l in self.row_labels if l in self.col_labels]
        return np.array([self.values[self.row_labels.index(l), self.col_labels.index(l)] for l in shared])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["", *self.col_labels])
        for label, row in zip(self.row_labels, self.values):
            w.writerow([label, *("" if np.isnan(v) else repr(float(v)) for v in row)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SimilarityHeatmap":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty heatmap CSV")
        cols = rows[0][1:]
        labels, values = [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != len(cols) + 1:
                raise ValueError(f"heatmap CSV row {lineno} has {len(row) - 1} cells, expected {len(cols)}")
            labels.append(row[0])
            try:
                values.append([float(v) if v != "" else np.nan for v in row[1:]])
            except ValueError:
                raise ValueError(f"heatmap CSV row {lineno} has a non-numeric cell") from None
        return cls(np.array(values, dtype=np.float64).reshape(len(labels), len(cols)), labels, cols)


def heatmap(net_a, net_b, probe) -> SimilarityHeatmap:
    acts_a = capture_activations(net_a, probe)
    acts_b = capture_activations(net_b, probe)
    values = np.full((len(acts_a), len(acts_b)), np.nan)
    for r, a in enumerate(acts_a):
        for c, b in enumerate(acts_b):
            try:
                values[r, c] = cka(a.values, b.values)
            except UndefinedSimilarityError:
                pass
    return SimilarityHeatmap(values, [a.layer for a in acts_a], [b.layer for b in acts_b])
