"""Numeric diagnostics for generalization-bound quantities.

Empirical Rademacher complexity of a finite hypothesis class represented
extensionally as a per-hypothesis, per-sample loss matrix: Monte Carlo
expectation over random sign vectors of the supremum correlation, with
exact enumeration over all 2^n sign vectors when n <= 12. A bound-term
decomposition splits a weighted multi-source bound into average empirical
loss, average complexity, a weight/loss covariance term and the confidence
term. The independence demo estimates mutual information between two
synthetic base-learner channels as their coupling is dialed up.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .featsel import copula_entropy
from .rng import make_rng

__all__ = [
    "RademacherEstimate",
    "empirical_rademacher",
    "BoundTerms",
    "bound_terms",
    "IndependencePoint",
    "independence_demo",
    "independence_grid",
    "linear_threshold_losses",
]


@dataclass
class RademacherEstimate:
    value: float              # Monte Carlo estimate
    mc_draws: int
    std_error: float
    exact: float | None       # enumeration over all 2^n signs when n <= 12

    def within(self, k_std: float = 3.0) -> bool:
        if self.exact is None:
            return True
        return abs(self.value - self.exact) <= k_std * self.std_error


def _sup_means(losses: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """sup over hypotheses of (1/n)·sigma·loss for each sign column."""
    n = losses.shape[1]
    return (losses @ sigmas).max(axis=0) / n


def empirical_rademacher(losses, mc_draws: int = 100_000,
                         seed: int = 0, exact_limit: int = 12) -> RademacherEstimate:
    """Estimate E_sigma[sup_f (1/n) sum_i sigma_i l_{f,i}] for losses in [0,1].

    The exact enumeration pairs each sign vector with its global negation,
    so singleton classes come out exactly 0.0.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 2 or losses.shape[0] < 1 or losses.shape[1] < 1:
        raise ValueError(f"losses must be [|H| >= 1, n >= 1], got {losses.shape}")
    if losses.min() < 0.0 or losses.max() > 1.0:
        raise ValueError("losses must lie in [0, 1]")
    n = losses.shape[1]
    rng = make_rng(seed)
    sigmas = rng.integers(0, 2, size=(n, mc_draws)) * 2.0 - 1.0
    sups = _sup_means(losses, sigmas)
    value = float(sups.mean())
    std_error = float(sups.std(ddof=1) / np.sqrt(mc_draws)) if mc_draws > 1 else 0.0

    exact = None
    if n <= exact_limit:
        half = 1 << (n - 1)
        bits = (np.arange(half)[None, :] >> np.arange(n)[:, None]) & 1
        sig = bits * 2.0 - 1.0  # sign vectors with the last component fixed at -1
        pos = _sup_means(losses, sig)
        neg = _sup_means(losses, -sig)
        exact = float(np.sum(pos + neg) / (2.0 * half))
    return RademacherEstimate(value=value, mc_draws=mc_draws,
                              std_error=std_error, exact=exact)


def linear_threshold_losses(points: np.ndarray, thresholds: np.ndarray,
                            labels: np.ndarray) -> np.ndarray:
    """0/1 losses of 1-D threshold classifiers — a small demo class."""
    preds = (points[None, :] >= thresholds[:, None]).astype(np.float64)
    return np.abs(preds - labels[None, :])


@dataclass
class BoundTerms:
    term_l: float         # weighted average empirical loss
    term_c: float         # weighted average complexity
    term_cov: float       # sum of per-source weight/loss covariances
    confidence_term: float
    m_sources: int

    def total(self) -> float:
        return self.term_l + self.term_c + self.term_cov + self.confidence_term


def _population_cov(a: np.ndarray, b: np.ndarray) -> float:
    if np.all(a == a[0]):
        return 0.0  # covariance with a constant is exactly zero
    return float(np.mean((a - a.mean()) * (b - b.mean())))


def bound_terms(base_losses, weights, complexities, delta: float = 0.05) -> BoundTerms:
    """Decompose the weighted multi-source bound.

    ``base_losses`` is [M, N]; ``weights`` is [M, N] or a length-M vector of
    constants; per-sample weights must form a convex combination.
    """
    losses = np.asarray(base_losses, dtype=np.float64)
    if losses.ndim != 2:
        raise ValueError(f"base_losses must be [M, N], got {losses.shape}")
    m, n = losses.shape
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim == 1:
        if len(w) != m:
            raise ValueError(f"constant weights must have length {m}")
        w = np.repeat(w[:, None], n, axis=1)
    if w.shape != losses.shape:
        raise ValueError(f"weights shape {w.shape} != losses shape {losses.shape}")
    if w.min() < 0.0 or np.max(np.abs(w.sum(axis=0) - 1.0)) > 1e-9:
        raise ValueError("weights must be a convex combination per sample "
                         "(nonnegative, summing to 1)")
    comp = np.asarray(complexities, dtype=np.float64)
    if comp.shape != (m,):
        raise ValueError(f"complexities must have shape ({m},), got {comp.shape}")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")

    term_l = float(sum(w[i].mean() * losses[i].mean() for i in range(m)))
    term_c = float(sum(w[i].mean() * comp[i] for i in range(m)))
    term_cov = float(sum(_population_cov(w[i], losses[i]) for i in range(m)))
    confidence = m * np.sqrt(np.log(1.0 / delta) / (2.0 * n))
    return BoundTerms(term_l=term_l, term_c=term_c, term_cov=term_cov,
                      confidence_term=float(confidence), m_sources=m)


@dataclass
class IndependencePoint:
    mixing: float
    mi_estimate: float
    n: int


def independence_demo(n: int, mixing: float, seed: int = 0) -> IndependencePoint:
    """Two synthetic base-learner channels with dependence dialed by
    ``mixing``: 0 gives independent channels, 1 identical ones. Reports
    the estimated mutual information between them."""
    if n < 200:
        raise ValueError("need n >= 200 for a stable estimate")
    if not 0.0 <= mixing <= 1.0:
        raise ValueError("mixing must be in [0, 1]")
    rng = make_rng(seed)
    base1 = rng.standard_normal(n)
    base2 = rng.standard_normal(n)
    h1 = base1
    h2 = mixing * base1 + (1.0 - mixing) * base2
    return IndependencePoint(mixing=mixing, mi_estimate=copula_entropy(h1, h2), n=n)


def independence_grid(n: int, mixings=(0.0, 0.25, 0.5, 0.75, 1.0),
                      seeds=(0, 1, 2, 3, 4)) -> list:
    """Median MI estimate per mixing level across seeds."""
    out = []
    for mix in mixings:
        vals = [independence_demo(n, mix, seed=s).mi_estimate for s in seeds]
        out.append(IndependencePoint(mixing=mix,
                                     mi_estimate=float(np.median(vals)), n=n))
    return out
