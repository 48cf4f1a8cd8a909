"""Data-driven input screening: correlation triplet, copula entropy,
Granger causality.

Per candidate feature the screen computes Pearson/Spearman/Kendall
coefficients against the load target, a copula-entropy dependence score
(rank transform + Kraskov kNN mutual information, in nats), and a
Granger F-test p-value from nested lag regressions. A feature is retained
when it passes the Granger test at level alpha AND its dependence score
reaches the ce threshold (default: 75th percentile across candidates).

The F-distribution tail is computed with a hand-rolled Lentz
continued-fraction regularized incomplete beta; scipy's betainc is used
only as a test oracle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

__all__ = [
    "ScreenError",
    "ZeroVarianceError",
    "RankDeficientError",
    "rank_average",
    "pearson",
    "spearman",
    "kendall",
    "copula_entropy",
    "betainc_regularized",
    "f_sf",
    "GrangerResult",
    "granger_test",
    "FeatureScreen",
    "ScreenReport",
    "screen",
]


class ScreenError(ValueError):
    """Screening statistic cannot be computed on this input."""


class ZeroVarianceError(ScreenError):
    """A correlation needs both series to vary."""


class RankDeficientError(ScreenError):
    """Granger design matrix is rank deficient (e.g. a constant regressor)."""


def _validate_pair(x, y, min_n: int = 3) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or len(x) != len(y):
        raise ScreenError(f"need equal-length 1-D series, got {x.shape} and {y.shape}")
    if len(x) < min_n:
        raise ScreenError(f"need at least {min_n} samples, got {len(x)}")
    return x, y


def rank_average(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned their group average."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def pearson(x, y) -> float:
    """Sample covariance over the product of standard deviations."""
    x, y = _validate_pair(x, y)
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt((xc * xc).mean())
    sy = np.sqrt((yc * yc).mean())
    if sx == 0.0 or sy == 0.0:
        raise ZeroVarianceError("pearson needs nonzero variance in both series")
    return float((xc * yc).mean() / (sx * sy))


def spearman(x, y) -> float:
    """Pearson correlation of the average ranks."""
    x, y = _validate_pair(x, y)
    return pearson(rank_average(x), rank_average(y))


def kendall(x, y, chunk: int = 256) -> float:
    """Tau-b: tie-corrected concordance, O(n^2) in memory-bounded chunks."""
    x, y = _validate_pair(x, y)
    n = len(x)
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ZeroVarianceError("kendall needs nonzero variance in both series")
    s = 0.0
    for start in range(0, n, chunk):
        xi = x[start:start + chunk, None]
        yi = y[start:start + chunk, None]
        s += float(np.sum(np.sign(xi - x[None, :]) * np.sign(yi - y[None, :])))
    s *= 0.5  # each unordered pair counted twice

    def tie_pairs(v):
        _, counts = np.unique(v, return_counts=True)
        return float((counts * (counts - 1) // 2).sum())

    n0 = n * (n - 1) / 2.0
    tx, ty = tie_pairs(x), tie_pairs(y)
    return float(s / math.sqrt((n0 - tx) * (n0 - ty)))


def copula_entropy(x, y, k: int = 3) -> float:
    """Dependence score in nats: mutual information of the empirical copula
    estimated with the Kraskov kNN estimator. Zero for independent pairs,
    invariant to strictly monotone transforms by construction (ranks only).
    The raw signed copula entropy is the negative of this value."""
    x, y = _validate_pair(x, y, min_n=50)
    n = len(x)
    if k >= n:
        raise ScreenError(f"neighbor count k={k} must be < n={n}")
    u = rank_average(x) / (n + 1)
    v = rank_average(y) / (n + 1)
    pts = np.column_stack([u, v])
    joint = cKDTree(pts)
    dist, _ = joint.query(pts, k=k + 1, p=np.inf)
    eps = dist[:, -1]
    # strictly-inside counts in each marginal, excluding the point itself
    shrink = eps - 1e-12
    nx = cKDTree(u[:, None]).query_ball_point(
        u[:, None], shrink, p=np.inf, return_length=True) - 1
    ny = cKDTree(v[:, None]).query_ball_point(
        v[:, None], shrink, p=np.inf, return_length=True) - 1
    mi = digamma(k) + digamma(n) - float(np.mean(digamma(nx + 1) + digamma(ny + 1)))
    return float(mi)


# -- F-distribution tail ---------------------------------------------------------


def _betacf(a: float, b: float, x: float, max_iter: int = 300,
            eps: float = 1e-15) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ScreenError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) via Lentz continued fraction."""
    if not 0.0 <= x <= 1.0:
        raise ScreenError(f"x must be in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return float(x)
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_sf(f_stat: float, d1: float, d2: float) -> float:
    """Right-tail probability of the F(d1, d2) distribution."""
    if f_stat <= 0.0:
        return 1.0
    x = d2 / (d2 + d1 * f_stat)
    return betainc_regularized(d2 / 2.0, d1 / 2.0, x)


# -- Granger causality --------------------------------------------------------------


@dataclass
class GrangerResult:
    lag: int
    rss_restricted: float
    rss_unrestricted: float
    f_stat: float
    p_value: float
    n_effective: int


def _lag_matrix(series: np.ndarray, p: int) -> np.ndarray:
    """Columns [s_{t-1}, ..., s_{t-p}] for t = p..n-1."""
    n = len(series)
    return np.column_stack([series[p - j:n - j] for j in range(1, p + 1)])


def _ols_rss(design: np.ndarray, target: np.ndarray) -> float:
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        raise RankDeficientError(
            f"design matrix rank {rank} < {design.shape[1]} columns")
    beta, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    resid = target - design @ beta
    return float(resid @ resid)


def granger_test(x, y, p: int = 4) -> GrangerResult:
    """Does x Granger-cause y? Nested OLS: y on its own p lags (restricted)
    vs adding p lags of x (unrestricted); F-test on the RSS reduction."""
    x, y = _validate_pair(x, y)
    n = len(y)
    if p < 1:
        raise ScreenError("lag order must be >= 1")
    if n <= 3 * p + 3:
        raise ScreenError(f"need n > {3 * p + 3} for lag {p}, got {n}")
    target = y[p:]
    n_eff = len(target)
    ones = np.ones((n_eff, 1))
    y_lags = _lag_matrix(y, p)
    x_lags = _lag_matrix(x, p)
    rss_r = _ols_rss(np.hstack([ones, y_lags]), target)
    rss_u = _ols_rss(np.hstack([ones, y_lags, x_lags]), target)

    df2 = n_eff - 2 * p - 1
    if rss_u == 0.0:
        warnings.warn("unrestricted model fits perfectly; p-value set to 0")
        return GrangerResult(p, rss_r, rss_u, math.inf, 0.0, n_eff)
    f_stat = max(0.0, (rss_r - rss_u) / p) / (rss_u / df2)
    return GrangerResult(p, rss_r, rss_u, float(f_stat),
                         float(f_sf(f_stat, p, df2)), n_eff)


# -- the screen ------------------------------------------------------------------------


@dataclass
class FeatureScreen:
    feature_id: int
    name: str
    pearson: float
    spearman: float
    kendall: float
    ce_score: float
    granger_f: float
    granger_p: float
    retained: bool

    @property
    def ce_signed(self) -> float:
        return -self.ce_score


@dataclass
class ScreenReport:
    rows: list
    alpha: float
    ce_min: float
    lag: int
    knn_k: int
    target: str
    target_differenced: bool
    warnings: list = field(default_factory=list)

    def retained_features(self) -> list:
        return [r.name for r in self.rows if r.retained]

    def to_csv(self, path) -> None:
        def fmt(v):
            return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(v)

        lines = ["id,name,pearson,spearman,kendall,ce_score,granger_F,granger_p,retained"]
        for r in self.rows:
            lines.append(",".join([
                str(r.feature_id), r.name, fmt(r.pearson), fmt(r.spearman),
                fmt(r.kendall), fmt(r.ce_score), fmt(r.granger_f),
                fmt(r.granger_p), str(int(r.retained)),
            ]))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _thin(series: np.ndarray, max_n: int) -> np.ndarray:
    if len(series) <= max_n:
        return series
    idx = np.linspace(0, len(series) - 1, max_n).astype(int)
    return series[idx]


def screen(df, target: str = "load_kw", alpha: float = 0.05,
           ce_min: float | None = None, lag: int = 4, knn_k: int = 3,
           ce_max_n: int = 4000) -> ScreenReport:
    """Screen every numeric column of ``df`` against ``target``.

    Retained = (granger_p < alpha) AND (ce_score >= ce_min), with ce_min
    defaulting to the 75th percentile of the candidates' scores. If the
    target's lag-1 autocorrelation exceeds 0.99 both series are differenced
    once for the Granger regression (recorded in the report). Per-feature
    failures become warnings, not a global failure.
    """
    if target not in df.columns:
        raise ScreenError(f"target column {target!r} not in table")
    y = df[target].to_numpy(dtype=np.float64)
    candidates = [c for c in df.columns
                  if c != target and c != "timestamp"
                  and np.issubdtype(df[c].dtype, np.number)]

    acf1 = pearson(y[1:], y[:-1]) if np.std(y) > 0 else 0.0
    differenced = bool(acf1 > 0.99)
    y_granger = np.diff(y) if differenced else y
    y_ce = _thin(y, ce_max_n)

    raw: dict[str, dict] = {}
    notes: list[str] = []
    for name in candidates:
        x = df[name].to_numpy(dtype=np.float64)
        stats = {"pearson": math.nan, "spearman": math.nan, "kendall": math.nan,
                 "ce_score": math.nan, "granger_f": math.nan, "granger_p": math.nan}
        try:
            stats["pearson"] = pearson(x, y)
            stats["spearman"] = spearman(x, y)
            stats["kendall"] = kendall(x, y)
            stats["ce_score"] = copula_entropy(_thin(x, ce_max_n), y_ce, k=knn_k)
            x_granger = np.diff(x) if differenced else x
            g = granger_test(x_granger, y_granger, p=lag)
            stats["granger_f"] = g.f_stat
            stats["granger_p"] = g.p_value
        except ScreenError as exc:
            notes.append(f"{name}: {exc}")
            warnings.warn(f"feature {name!r} skipped: {exc}")
        raw[name] = stats

    finite_ce = [s["ce_score"] for s in raw.values() if math.isfinite(s["ce_score"])]
    if ce_min is None:
        if not finite_ce:
            raise ScreenError("no feature produced a copula-entropy score")
        ce_min = float(np.percentile(finite_ce, 75.0))

    rows = []
    for i, name in enumerate(candidates, start=1):
        s = raw[name]
        retained = (math.isfinite(s["granger_p"]) and s["granger_p"] < alpha
                    and math.isfinite(s["ce_score"]) and s["ce_score"] >= ce_min)
        rows.append(FeatureScreen(
            feature_id=i, name=name, pearson=s["pearson"], spearman=s["spearman"],
            kendall=s["kendall"], ce_score=s["ce_score"], granger_f=s["granger_f"],
            granger_p=s["granger_p"], retained=bool(retained)))
    return ScreenReport(rows=rows, alpha=alpha, ce_min=ce_min, lag=lag,
                        knn_k=knn_k, target=target,
                        target_differenced=differenced, warnings=notes)
