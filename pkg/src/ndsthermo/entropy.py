"""Topological entropy estimators on finite grids and exact symbolic oracles.

Entropy is estimated as the exponential growth rate of grid-relative
separated (or spanning) counts: a least-squares slope of log count against n
over a window, the default window being the upper half of the n range.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ParameterError
from .metrics import CandidateGrid, closeness, default_grid, _greedy_cover, _greedy_separated
from .systems import NdsSpec, Point, check_transition_matrix

CHAOS_THRESHOLD = 0.05


@dataclass
class CountSeries:
    """Per-n values (n strictly increasing) at a fixed scale."""

    ns: list
    values: list
    eps: float
    mode: str
    k: int
    grids: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.ns) != len(self.values):
            raise ParameterError("ns and values differ in length")
        if any(b <= a for a, b in zip(self.ns, self.ns[1:])):
            raise ParameterError("n values must be strictly increasing")

    def pairs(self):
        return list(zip(self.ns, self.values))

    def log_pairs(self):
        return [(n, math.log(v)) for n, v in zip(self.ns, self.values)]

    def to_dict(self) -> dict:
        return {"k": self.k, "epsilon": self.eps, "mode": self.mode, "n": list(self.ns),
                "values": list(self.values), "grids": self.grids}

    def csv_rows(self):
        return [(self.k, n, self.eps, self.mode, v) for n, v in zip(self.ns, self.values)]


CSV_HEADER = ["k", "n", "epsilon", "mode", "count"]


@dataclass
class GrowthFit:
    slope: float
    limsup_proxy: float
    residual: float
    window: list


@dataclass
class EntropyReport:
    estimate: float
    slope: float
    limsup_proxy: float
    residual: float
    window: list
    eps: float
    k: int
    mode: str
    cross_check: float | None = None
    series: CountSeries | None = None
    cross_series: CountSeries | None = None

    def to_dict(self) -> dict:
        out = {
            "estimate": self.estimate,
            "slope": self.slope,
            "limsup_proxy": self.limsup_proxy,
            "residual": self.residual,
            "window": self.window,
            "epsilon": self.eps,
            "k": self.k,
            "mode": self.mode,
            "cross_check": self.cross_check,
        }
        if self.series is not None:
            out["series"] = self.series.to_dict()
        if self.cross_series is not None:
            out["cross_series"] = self.cross_series.to_dict()
        return out


def default_window(ns) -> list:
    ns = list(ns)
    return ns[len(ns) // 2:]


def line_fit(x, y):
    """Closed-form least squares; a constant series gives a slope of exactly 0."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    dx, dy = x - x.mean(), y - y.mean()
    slope = float(dx @ dy / (dx @ dx))
    intercept = float(y.mean() - slope * x.mean())
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return slope, intercept, resid


def growth_fit(series: CountSeries, window=None) -> GrowthFit:
    """Slope of log(value) over the window, plus max (1/n) log value and the fit residual."""
    window = default_window(series.ns) if window is None else list(window)
    lookup = dict(zip(series.ns, series.values))
    missing = [n for n in window if n not in lookup]
    if missing:
        raise ParameterError(f"window points {missing} are outside the series")
    if len(window) < 3:
        raise ParameterError("growth window needs at least 3 points")
    vals = [lookup[n] for n in window]
    if any(v <= 0 for v in vals):
        raise ParameterError("growth rate needs positive values")
    x = np.array(window, dtype=float)
    y = np.array([math.log(v) for v in vals])
    slope, _, resid = line_fit(x, y)
    proxy = max((yi / xi for xi, yi in zip(x, y) if xi > 0), default=0.0)
    return GrowthFit(slope, float(proxy), resid, window)


def growth_rate(series: CountSeries, window=None) -> float:
    """Least-squares slope of log(value) against n over the window."""
    return growth_fit(series, window).slope


def _grid_for(spec, k, n, eps, grid):
    if grid is None:
        return default_grid(spec, k, n, eps)
    if callable(grid):
        return grid(n)
    return grid


def _counts_at(spec, k, eps, n, grid):
    g = _grid_for(spec, k, n, eps, grid)
    if len(g) == 0:
        raise ParameterError("empty candidate grid")
    close = closeness(spec, k, n, eps, g)
    sep = len(_greedy_separated(close))
    if close.labels is not None:
        span = sep
    else:
        span = min(sep, len(_greedy_cover(close)))
    return sep, span, g.describe()


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def _both_series(spec, k, eps, n_range, grid, workers):
    if eps <= 0:
        raise ParameterError("eps must be positive")
    ns = sorted(n_range)
    if not ns:
        raise ParameterError("n_range is empty")
    res = _map(lambda n: _counts_at(spec, k, eps, n, grid), ns, workers)
    grids = [r[2] for r in res]
    sep = CountSeries(ns, [r[0] for r in res], eps, "separated", k, grids)
    span = CountSeries(ns, [r[1] for r in res], eps, "spanning", k, grids)
    return sep, span


def count_series(spec: NdsSpec, k: int, eps: float, n_range, mode: str = "separated",
                 grid=None, workers: int = 1) -> CountSeries:
    """Grid-relative separated or spanning counts for every n in n_range.

    ``grid`` is a CandidateGrid used for every n, a callable n -> grid, or
    None for the default per-n policy.
    """
    if mode not in ("separated", "spanning"):
        raise ParameterError(f"unknown count mode {mode!r}")
    sep, span = _both_series(spec, k, eps, n_range, grid, workers)
    return sep if mode == "separated" else span


def _report(series, cross, window):
    fit = growth_fit(series, window)
    cross_fit = growth_fit(cross, window) if cross is not None else None
    return EntropyReport(
        estimate=max(0.0, fit.slope),
        slope=fit.slope,
        limsup_proxy=fit.limsup_proxy,
        residual=fit.residual,
        window=fit.window,
        eps=series.eps,
        k=series.k,
        mode=series.mode,
        cross_check=None if cross_fit is None else max(0.0, cross_fit.slope),
        series=series,
        cross_series=cross,
    )


def entropy_estimate(spec: NdsSpec, k: int, eps: float, n_range, grid=None, window=None,
                     workers: int = 1) -> EntropyReport:
    """Separated-count growth rate, with the spanning-count rate as cross-check."""
    sep, span = _both_series(spec, k, eps, n_range, grid, workers)
    return _report(sep, span, window)


@dataclass
class AsymptoticReport:
    value: float
    profile: list
    k_list: list
    chaotic: bool
    threshold: float
    reports: list

    def to_dict(self) -> dict:
        return {"value": self.value, "profile": self.profile, "k": self.k_list,
                "chaotic": self.chaotic, "threshold": self.threshold,
                "reports": [r.to_dict() for r in self.reports]}


def asymptotic_entropy_estimate(spec: NdsSpec, eps: float, k_list, n_range, grid=None,
                                threshold: float = CHAOS_THRESHOLD, workers: int = 1) -> AsymptoticReport:
    """Entropy estimates of the shifted sequences f_{k,inf} for each k.

    The last value stands in for the limit over k; the sequence counts as
    topologically chaotic when it exceeds ``threshold``.
    """
    ks = list(k_list)
    if not ks or any(b <= a for a, b in zip(ks, ks[1:])):
        raise ParameterError("k_list must be nonempty and increasing")
    reports = [entropy_estimate(spec, k, eps, n_range, grid, workers=workers) for k in ks]
    profile = [r.estimate for r in reports]
    value = profile[-1]
    return AsymptoticReport(value, profile, ks, value > threshold, threshold, reports)


def entropy_point_probe(spec: NdsSpec, x0: Point, radius: float, eps: float, n_range, grid=None,
                        workers: int = 1):
    """Entropy seeded from the closed ball around x0 versus the whole space.

    The local estimate restricts the same per-n grid used for the global
    estimate to the closed ball of the given radius.
    """
    if radius <= 0:
        raise ParameterError("radius must be positive")
    x0 = spec.space.point(x0)

    def local_grid(n):
        return _grid_for(spec, 1, n, eps, grid).restrict(x0, radius)

    local = entropy_estimate(spec, 1, eps, n_range, local_grid, workers=workers)
    glob = entropy_estimate(spec, 1, eps, n_range, grid, workers=workers)
    return local, glob


# ---------------------------------------------------------------------------
# exact symbolic oracles
# ---------------------------------------------------------------------------


def _int_matrix(A):
    check_transition_matrix(A)
    return [[int(v) for v in row] for row in np.asarray(A).tolist()]


def _matmul(X, Y):
    n = len(X)
    return [[sum(X[i][t] * Y[t][j] for t in range(n)) for j in range(n)] for i in range(n)]


def sft_word_count(A, L: int) -> int:
    """Number of admissible words of length L (sum of the entries of A^(L-1)).

    Python integers are arbitrary precision, so there is no overflow.
    """
    M = _int_matrix(A)
    if L < 1:
        raise ParameterError("word length must be >= 1")
    v = [1] * len(M)
    for _ in range(L - 1):
        v = [sum(M[i][j] * v[j] for j in range(len(M))) for i in range(len(M))]
    return sum(v)


def _perron_root(M, tol, max_iter):
    # irreducible block: iterate on M + I (primitive) until Collatz-Wielandt bounds meet
    B = M + np.eye(len(M))
    v = np.ones(len(M))
    lo = hi = 0.0
    for _ in range(max_iter):
        w = B @ v
        ratios = w / v
        lo, hi = ratios.min(), ratios.max()
        v = w / w.max()
        if hi - lo <= tol * max(hi, 1.0):
            break
    else:
        warnings.warn("power iteration did not reach tolerance", RuntimeWarning)
    return float(0.5 * (lo + hi) - 1.0)


def spectral_radius(M, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Perron root of a nonnegative matrix by power iteration.

    The matrix is split into strongly connected components; the radius is the
    largest Perron root over the irreducible diagonal blocks, each found by
    power iteration to relative tolerance ``tol``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ParameterError("matrix must be square")
    if (M < 0).any():
        raise ParameterError("matrix must be nonnegative")
    ncomp, labels = connected_components(csr_matrix(M > 0), directed=True, connection="strong")
    best = 0.0
    for c in range(ncomp):
        idx = np.flatnonzero(labels == c)
        block = M[np.ix_(idx, idx)]
        if len(idx) == 1:
            best = max(best, float(block[0, 0]))
        else:
            best = max(best, _perron_root(block, tol, max_iter))
    return best
