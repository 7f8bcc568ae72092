"""Pooled z-scores and Welch's t-test, with a self-contained Student-t CDF."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class DegeneratePopulationError(ValueError):
    pass


def _betacf(a: float, b: float, x: float, max_iter: int = 500, tol: float = 1e-15) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError("betainc needs 0 <= x <= 1")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, dof: float) -> float:
    """CDF of Student's t distribution with ``dof`` degrees of freedom."""
    if dof <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0:
        return 0.5
    tail = 0.5 * betainc(dof / 2.0, 0.5, dof / (dof + t * t))
    return 1.0 - tail if t > 0 else tail


def t_sf_two_sided(t: float, dof: float) -> float:
    return betainc(dof / 2.0, 0.5, dof / (dof + t * t)) if t != 0 else 1.0


@dataclass(frozen=True)
class TTestResult:
    t: float
    dof: float
    p_value: float


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Two-sided Welch t-test (unequal variances)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("Welch's t-test needs at least two samples per group")
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    se2 = va + vb
    diff = a.mean() - b.mean()
    if se2 == 0:
        # both groups constant: identical means give no evidence, else infinite t
        if diff == 0:
            return TTestResult(0.0, float(a.size + b.size - 2), 1.0)
        return TTestResult(math.copysign(math.inf, diff), float(a.size + b.size - 2), 0.0)
    t = float(diff / math.sqrt(se2))
    dof = float(se2 ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1)))
    return TTestResult(t, dof, min(1.0, t_sf_two_sided(t, dof)))


@dataclass(frozen=True)
class Score:
    method: str
    seed: int
    value: float


def z_scores(population: Iterable[Score]) -> tuple[list[float], dict[str, float]]:
    """Standardise a pooled population (population std) and average per method.

    Returns the per-sample z-scores in input order and the per-method means.
    """
    pop = list(population)
    if len(pop) < 2:
        raise DegeneratePopulationError("a population needs at least two samples")
    values = np.array([s.value for s in pop], dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("population values must be finite")
    sigma = values.std()
    if sigma == 0:
        raise DegeneratePopulationError("all samples are equal; z-scores are undefined")
    z = (values - values.mean()) / sigma
    grouped: dict[str, list[float]] = defaultdict(list)
    for s, zi in zip(pop, z):
        grouped[s.method].append(float(zi))
    return [float(v) for v in z], {m: float(np.mean(v)) for m, v in grouped.items()}


def method_z(population: Sequence[Score]) -> dict[str, list[float]]:
    """Per-method lists of sample z-scores (for the Welch comparison)."""
    z, _ = z_scores(population)
    out: dict[str, list[float]] = defaultdict(list)
    for s, zi in zip(population, z):
        out[s.method].append(zi)
    return dict(out)


def compare_to_baseline(population: Sequence[Score], baseline: str) -> dict[str, tuple[float, TTestResult]]:
    """Mean z-score of each method and its Welch test against ``baseline``."""
    per = method_z(population)
    if baseline not in per:
        raise KeyError(f"baseline {baseline!r} missing from population")
    out = {}
    for method, zs in per.items():
        if method == baseline:
            continue
        out[method] = (float(np.mean(zs)), welch_t_test(zs, per[baseline]))
    return out


def sign_test_p(successes: int, trials: int) -> float:
    """One-sided binomial sign-test p-value for ``successes`` out of ``trials`` at p=1/2."""
    if not 0 <= successes <= trials:
        raise ValueError("need 0 <= successes <= trials")
    total = sum(math.comb(trials, k) for k in range(successes, trials + 1))
    return total / 2.0 ** trials
