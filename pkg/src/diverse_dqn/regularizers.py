"""Inequality measures over the list of per-member squared parameter norms.

Each measure comes with its analytic partial derivative with respect to the
norm of the member being updated. The mean norm depends on that member too,
so the derivatives include the 1/N path through the mean.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("none", "atkinson", "gini", "theil", "vol", "meanvector")
FLOOR = 1e-12


def _norms(norms) -> np.ndarray:
    arr = np.asarray(norms, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("a norm list needs at least two members")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("norms must be finite and non-negative")
    return np.maximum(arr, FLOOR)


def _check_index(i: int, n: int) -> None:
    if not 0 <= i < n:
        raise IndexError(f"member index {i} out of range for {n} members")


def atkinson(norms, epsilon: float = 0.5, literal_unit_branch: bool = False) -> float:
    """Atkinson index with inequality aversion ``epsilon``.

    At ``epsilon == 1`` the geometric-mean form is used. Setting
    ``literal_unit_branch`` puts an extra 1/N inside the product instead,
    which does not match the epsilon -> 1 limit of the general branch.
    """
    if epsilon < 0:
        raise ValueError("Atkinson epsilon must be >= 0")
    x = _norms(norms)
    n = x.size
    mean = x.mean()
    if epsilon == 1:
        g = np.exp(np.log(x).mean())
        if literal_unit_branch:
            g *= n ** (-1.0 / n)
        return float(1.0 - g / mean)
    s = np.mean(x ** (1.0 - epsilon))
    return float(1.0 - s ** (1.0 / (1.0 - epsilon)) / mean)


def gini(norms) -> float:
    x = _norms(norms)
    n = x.size
    return float(np.abs(x[:, None] - x[None, :]).sum() / (2 * n * n * x.mean()))


def theil(norms) -> float:
    x = _norms(norms)
    r = x / x.mean()
    return float(np.mean(r * np.log(r)))


def variance_of_logarithms(norms) -> float:
    logs = np.log(_norms(norms))
    return float(np.mean((logs - logs.mean()) ** 2))


def mean_vector(norms, i: int) -> float:
    x = _norms(norms)
    _check_index(i, x.size)
    return float((x.mean() - x[i]) ** 2)


def atkinson_grad(norms, i: int, epsilon: float = 0.5, literal_unit_branch: bool = False) -> float:
    if epsilon < 0:
        raise ValueError("Atkinson epsilon must be >= 0")
    x = _norms(norms)
    n = x.size
    _check_index(i, n)
    mean = x.mean()
    if epsilon == 1:
        g = np.exp(np.log(x).mean())
        if literal_unit_branch:
            g *= n ** (-1.0 / n)
        return float(-g / (n * x[i] * mean) + g / (n * mean * mean))
    s = np.mean(x ** (1.0 - epsilon))
    p = s ** (1.0 / (1.0 - epsilon))
    dp = s ** (epsilon / (1.0 - epsilon)) * x[i] ** (-epsilon) / n
    return float(-dp / mean + p / (n * mean * mean))


def gini_grad(norms, i: int) -> float:
    x = _norms(norms)
    n = x.size
    _check_index(i, n)
    mean = x.mean()
    total = np.abs(x[:, None] - x[None, :]).sum()
    # np.sign(0) == 0 picks the symmetric subgradient at ties
    d_total = 2.0 * np.sign(x[i] - x).sum()
    return float(d_total / (2 * n * n * mean) - total / (2 * n * n * mean * mean * n))


def theil_grad(norms, i: int) -> float:
    x = _norms(norms)
    n = x.size
    _check_index(i, n)
    mean = x.mean()
    return float((np.log(x[i]) - np.dot(x, np.log(x)) / (n * mean)) / (n * mean))


def variance_of_logarithms_grad(norms, i: int) -> float:
    x = _norms(norms)
    n = x.size
    _check_index(i, n)
    logs = np.log(x)
    return float(2.0 * (logs[i] - logs.mean()) / (n * x[i]))


def mean_vector_grad(norms, i: int) -> float:
    x = _norms(norms)
    n = x.size
    _check_index(i, n)
    return float(2.0 * (x.mean() - x[i]) * (1.0 / n - 1.0))


@dataclass(frozen=True)
class Regularizer:
    """A measure I(l_i, l) selected by name, as used in the ensemble loss."""

    kind: str = "none"
    epsilon: float = 0.5
    literal_unit_branch: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regularizer {self.kind!r}; expected one of {KINDS}")
        if self.kind == "atkinson" and self.epsilon < 0:
            raise ValueError("Atkinson epsilon must be >= 0")

    @property
    def active(self) -> bool:
        return self.kind != "none"

    def value(self, norms, i: int) -> float:
        if self.kind == "atkinson":
            return atkinson(norms, self.epsilon, self.literal_unit_branch)
        if self.kind == "gini":
            return gini(norms)
        if self.kind == "theil":
            return theil(norms)
        if self.kind == "vol":
            return variance_of_logarithms(norms)
        if self.kind == "meanvector":
            return mean_vector(norms, i)
        return 0.0

    def grad(self, norms, i: int) -> float:
        if self.kind == "atkinson":
            return atkinson_grad(norms, i, self.epsilon, self.literal_unit_branch)
        if self.kind == "gini":
            return gini_grad(norms, i)
        if self.kind == "theil":
            return theil_grad(norms, i)
        if self.kind == "vol":
            return variance_of_logarithms_grad(norms, i)
        if self.kind == "meanvector":
            return mean_vector_grad(norms, i)
        return 0.0


def regularizer_grad(kind: str, norms, i: int, epsilon: float = 0.5) -> float:
    return Regularizer(kind, epsilon).grad(norms, i)
