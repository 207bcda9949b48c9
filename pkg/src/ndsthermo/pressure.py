"""Birkhoff sums, pressure partition functions and pressure-function checks."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .entropy import _grid_for, _map, default_window, line_fit, spectral_radius
from .errors import ParameterError, UnsupportedOperation
from .expanding import _pull_rows
from .metrics import closeness, _greedy_cover, _greedy_separated
from .reporting import Report
from .systems import NdsSpec, Point, Space, check_transition_matrix, distance_batch, orbit_batch, wrap_unit

# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------


class Potential:
    """Continuous real function on a space, evaluated on batches of points."""

    def evaluate(self, space: Space, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, space: Space, x: Point) -> float:
        return float(self.evaluate(space, space.to_batch([space.point(x)]))[0])

    def sup_norm(self, space: Space) -> float:
        """An upper bound for max |psi| over the space (exact for the built-in variants)."""
        raise NotImplementedError

    def holder(self):
        """(K, alpha) Hölder data, or None."""
        return None

    def to_dict(self) -> dict:
        raise UnsupportedOperation(f"{type(self).__name__} is not serialisable")

    # algebra used by the property checks
    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Constant(float(other))
        return Combination(((1.0, self), (1.0, other)))

    def __rmul__(self, t):
        return Combination(((float(t), self),))

    def __abs__(self):
        return Absolute(self)


def _first_coordinate(space, X):
    if space.kind == "symbolic":
        raise UnsupportedOperation("this potential needs a continuous space")
    return X[:, 0]


@dataclass(frozen=True)
class Constant(Potential):
    c: float

    def evaluate(self, space, X):
        return np.full(len(X), float(self.c))

    def sup_norm(self, space):
        return abs(self.c)

    def holder(self):
        return (0.0, 1.0)

    def to_dict(self):
        return {"type": "constant", "c": self.c}


@dataclass(frozen=True)
class SmoothCircle(Potential):
    """a cos(2 pi x) of the first coordinate."""

    a: float

    def evaluate(self, space, X):
        return self.a * np.cos(2 * np.pi * _first_coordinate(space, X))

    def sup_norm(self, space):
        return abs(self.a)

    def holder(self):
        # Lipschitz for the circle metric: |d/dx a cos 2 pi x| <= 2 pi |a|
        return (2 * np.pi * abs(self.a), 1.0)

    def to_dict(self):
        return {"type": "smooth_circle", "a": self.a}


@dataclass(frozen=True)
class DistanceToPoint(Potential):
    """K d(x, p)."""

    p: object
    K: float = 1.0

    def evaluate(self, space, X):
        P = np.repeat(space.to_batch([space.point(self.p)]), len(X), axis=0)
        return self.K * distance_batch(space, X, P)

    def sup_norm(self, space):
        return abs(self.K) * space.diameter

    def holder(self):
        return (abs(self.K), 1.0)

    def to_dict(self):
        return {"type": "distance_to_point", "p": self.p, "K": self.K}


@dataclass(frozen=True)
class HolderPower(Potential):
    """K d(x, center)^alpha, a (K, alpha)-Hölder function."""

    K: float
    alpha: float
    center: object = 0.0

    def __post_init__(self):
        if not (0 < self.alpha <= 1):
            raise ParameterError("Hölder exponent must lie in (0, 1]")

    def evaluate(self, space, X):
        C = np.repeat(space.to_batch([space.point(self.center)]), len(X), axis=0)
        return self.K * distance_batch(space, X, C) ** self.alpha

    def sup_norm(self, space):
        return abs(self.K) * space.diameter ** self.alpha

    def holder(self):
        return (abs(self.K), self.alpha)

    def to_dict(self):
        return {"type": "holder_power", "K": self.K, "alpha": self.alpha, "center": self.center}


@dataclass(frozen=True)
class SymbolLetter(Potential):
    """Value depending on the first letter of a word."""

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def evaluate(self, space, X):
        if space.kind != "symbolic":
            raise UnsupportedOperation("letter potentials need a symbolic space")
        if len(self.values) != space.alphabet:
            raise ParameterError("one value per letter is required")
        return np.asarray(self.values)[X[:, 0]]

    def sup_norm(self, space):
        return max(abs(v) for v in self.values)

    def holder(self):
        # locally constant: |psi(x) - psi(y)| <= (max - min) * 2 d(x, y)
        return (2.0 * (max(self.values) - min(self.values)), 1.0)

    def to_dict(self):
        return {"type": "symbol_letter", "values": list(self.values)}


@dataclass(frozen=True)
class Combination(Potential):
    terms: tuple

    def evaluate(self, space, X):
        out = np.zeros(len(X))
        for t, p in self.terms:
            out = out + t * p.evaluate(space, X)
        return out

    def sup_norm(self, space):
        return sum(abs(t) * p.sup_norm(space) for t, p in self.terms)


@dataclass(frozen=True)
class Absolute(Potential):
    inner: Potential

    def evaluate(self, space, X):
        return np.abs(self.inner.evaluate(space, X))

    def sup_norm(self, space):
        return self.inner.sup_norm(space)


@dataclass(frozen=True)
class Minimum(Potential):
    left: Potential
    right: Potential

    def evaluate(self, space, X):
        return np.minimum(self.left.evaluate(space, X), self.right.evaluate(space, X))

    def sup_norm(self, space):
        return max(self.left.sup_norm(space), self.right.sup_norm(space))


POTENTIALS = {
    "constant": (Constant, ("c",)),
    "smooth_circle": (SmoothCircle, ("a",)),
    "distance_to_point": (DistanceToPoint, ("p", "K")),
    "holder_power": (HolderPower, ("K", "alpha", "center")),
    "symbol_letter": (SymbolLetter, ("values",)),
}


def potential_from_dict(data: dict) -> Potential:
    data = dict(data)
    kind = data.pop("type", None)
    if kind not in POTENTIALS:
        raise ParameterError(f"unknown potential type {kind!r}")
    cls, fields = POTENTIALS[kind]
    unknown = set(data) - set(fields)
    if unknown:
        raise ParameterError(f"unknown fields for {kind}: {sorted(unknown)}")
    if isinstance(data.get("p"), list):
        data["p"] = tuple(data["p"])
    if isinstance(data.get("center"), list):
        data["center"] = tuple(data["center"])
    return cls(**data)


# ---------------------------------------------------------------------------
# Birkhoff sums and log-sum-exp
# ---------------------------------------------------------------------------


def birkhoff_batch(spec: NdsSpec, psi: Potential, i: int, n: int, X: np.ndarray) -> np.ndarray:
    """S_{i,n} psi on every row: sum of psi(f_i^j x) for 0 <= j < n."""
    if n < 1:
        raise ParameterError("Birkhoff sums need n >= 1")
    space = spec.space
    total = np.zeros(len(X))
    for j in range(n):
        total = total + psi.evaluate(space, X)
        if j < n - 1:
            X = spec.map_at(i + j).apply(space, X)
    return total


def birkhoff_sum(spec: NdsSpec, psi: Potential, i: int, n: int, x: Point) -> float:
    space = spec.space
    return float(birkhoff_batch(spec, psi, i, n, space.to_batch([space.point(x)]))[0])


def log_sum_exp(a) -> float:
    """log sum exp(a_i), shifted by the maximum; equal entries give a_0 + log(len) exactly."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        raise ParameterError("empty partition sum")
    m = float(a.max())
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.exp(a - m).sum()))


# ---------------------------------------------------------------------------
# partition functions
# ---------------------------------------------------------------------------

MODES = ("separated", "spanning", "cover_inf", "cover_sup", "ubv_cover")
COVER_SAMPLES = 32


@dataclass
class PartitionData:
    value: float
    mode: str
    n: int
    eps: float
    size: int
    grid: dict


def _class_members(close):
    return close.neighbor_lists()


def _element_samples(members, centre, limit=COVER_SAMPLES):
    members = np.asarray(members, dtype=np.int64)
    members = members[members != centre]
    if len(members) > limit:
        members = members[np.linspace(0, len(members) - 1, limit).round().astype(np.int64)]
    return np.concatenate([[centre], members]).astype(np.int64)


def partition_data(spec: NdsSpec, psi: Potential, eps: float, n: int, mode: str, grid=None) -> PartitionData:
    """Log partition sum at (n, eps) over grid-relative separated sets, spanning sets or covers.

    Cover modes use closed Bowen balls around greedy spanning centres as
    cover elements, sampling each element at up to 32 member grid points plus
    its centre. ``cover_inf``/``cover_sup`` use radius eps; ``ubv_cover`` uses
    radius eps/2, so every element has Bowen diameter at most eps.
    """
    if mode not in MODES:
        raise ParameterError(f"unknown pressure mode {mode!r}")
    if eps <= 0:
        raise ParameterError("eps must be positive")
    if n < 1:
        raise ParameterError("pressure partitions need n >= 1")
    scale = eps / 2 if mode == "ubv_cover" else eps
    g = _grid_for(spec, 1, n, scale, grid)
    if len(g) == 0:
        raise ParameterError("empty candidate grid")
    close = closeness(spec, 1, n, scale, g)
    sep = _greedy_separated(close)
    if mode == "separated":
        S = birkhoff_batch(spec, psi, 1, n, g.points[sep])
        return PartitionData(log_sum_exp(S), mode, n, eps, len(sep), g.describe())
    if close.labels is not None:
        span = sep
    else:
        cover = _greedy_cover(close)
        span = cover if len(cover) <= len(sep) else sep
    if mode == "spanning":
        S = birkhoff_batch(spec, psi, 1, n, g.points[span])
        return PartitionData(log_sum_exp(S), mode, n, eps, len(span), g.describe())
    members = _class_members(close)
    groups = [_element_samples(members[c], c) for c in span]
    flat = np.concatenate(groups)
    S_all = birkhoff_batch(spec, psi, 1, n, g.points[flat])
    bounds = np.cumsum([0] + [len(x) for x in groups])
    pick = np.min if mode == "cover_inf" else np.max
    S = np.array([pick(S_all[bounds[i]:bounds[i + 1]]) for i in range(len(groups))])
    return PartitionData(log_sum_exp(S), mode, n, eps, len(span), g.describe())


def pressure_partition(spec: NdsSpec, psi: Potential, eps: float, n: int, mode: str = "separated",
                       grid=None) -> float:
    """Logarithm of the partition sum selected by ``mode``."""
    return partition_data(spec, psi, eps, n, mode, grid).value


@dataclass
class PressureReport:
    eps: float
    mode: str
    ns: list
    values: list
    estimate: float
    limsup_proxy: float
    residual: float
    window: list
    grids: list = field(default_factory=list)

    def to_dict(self):
        return {"epsilon": self.eps, "mode": self.mode, "n": self.ns, "values": self.values,
                "estimate": self.estimate, "limsup_proxy": self.limsup_proxy,
                "residual": self.residual, "window": self.window, "grids": self.grids}

    def csv_rows(self, t=0.0):
        return [(self.mode, self.eps, n, t, v) for n, v in zip(self.ns, self.values)]


CSV_HEADER = ["mode", "epsilon", "n", "t", "value"]


def _fit(ns, values, window):
    window = default_window(ns) if window is None else list(window)
    if len(window) < 3:
        raise ParameterError("growth window needs at least 3 points")
    lookup = dict(zip(ns, values))
    if any(n not in lookup for n in window):
        raise ParameterError("window outside the n range")
    x = np.array(window, dtype=float)
    y = np.array([lookup[n] for n in window])
    slope, _, resid = line_fit(x, y)
    proxy = float(max(yi / xi for xi, yi in zip(x, y)))
    return slope, proxy, resid, window


def pressure_estimate(spec: NdsSpec, psi: Potential, eps: float, n_range, mode: str = "separated",
                      grid=None, window=None, workers: int = 1) -> PressureReport:
    """Slope of the log partition sums against n over the window."""
    ns = sorted(n_range)
    if not ns:
        raise ParameterError("n_range is empty")
    data = _map(lambda n: partition_data(spec, psi, eps, n, mode, grid), ns, workers)
    values = [d.value for d in data]
    slope, proxy, resid, window = _fit(ns, values, window)
    return PressureReport(eps, mode, ns, values, slope, proxy, resid, window, [d.grid for d in data])


# ---------------------------------------------------------------------------
# variation
# ---------------------------------------------------------------------------


def holder_variation_bound(K: float, alpha: float, sigma: float, eps: float) -> float:
    """K eps^alpha / (1 - sigma^-alpha)."""
    if sigma <= 1:
        raise ParameterError("need sigma > 1")
    return K * eps ** alpha / (1.0 - sigma ** (-alpha))


@dataclass
class VariationReport:
    eps: float
    ns: list
    variations: list
    bound: float | None
    within_bound: bool | None
    plateau: bool

    def to_dict(self):
        return {"epsilon": self.eps, "n": self.ns, "variations": self.variations, "bound": self.bound,
                "within_bound": self.within_bound, "plateau": self.plateau}


def _dynamical_ball_pairs(spec, n, eps, samples, rng):
    """Pairs (x, y) with d_{1,n}(x, y) < eps, as orbit arrays (times 1..n+1)."""
    space = spec.space
    if not spec.expanding or eps > spec.rho:
        raise ParameterError("pair generation needs an expanding spec and eps <= rho")
    if space.kind == "symbolic":
        raise UnsupportedOperation("variation sampling is implemented for continuous spaces")
    X = rng.random((samples, space.dim))
    ox = orbit_batch(spec, 1, n, X)
    # endpoints spread over the open eps-ball, many near its boundary
    r = eps * np.sqrt(rng.random((samples, 1))) * (1 - 1e-9)
    U = rng.uniform(-1, 1, (samples, space.dim))
    U /= np.abs(U).max(axis=1, keepdims=True)
    W = ox[-1] + r * U
    W = wrap_unit(W) if space.periodic else np.clip(W, 0, 1)
    Z, _ = _pull_rows(spec, 1, ox[:-1], W, spec.rho)
    return ox, Z


def variation_estimate(spec: NdsSpec, psi: Potential, eps: float, n: int, samples: int = 500,
                       seed: int = 0, pairs=None) -> float:
    """Max |S_{1,n} psi(x) - S_{1,n} psi(y)| over sampled pairs with d_{1,n}(x, y) < eps.

    Without explicit pairs, y is the pull-back of a random point of the
    eps-ball around f_1^n x, which lies in the dynamical ball of x. Birkhoff
    sums of y are taken along the backward chain.
    """
    space = spec.space
    if pairs is not None:
        X = space.to_batch([space.point(p[0]) for p in pairs])
        Y = space.to_batch([space.point(p[1]) for p in pairs])
        ox, oy = orbit_batch(spec, 1, n, X), orbit_batch(spec, 1, n, Y)
    else:
        ox, oy = _dynamical_ball_pairs(spec, n, eps, samples, np.random.default_rng(seed))
    bowen = np.max([distance_batch(space, a, b) for a, b in zip(ox, oy)], axis=0)
    keep = bowen < eps
    if not keep.any():
        raise ParameterError("no sampled pair lies in a dynamical eps-ball")
    Sx = sum(psi.evaluate(space, a) for a in ox[:n])
    Sy = sum(psi.evaluate(space, b) for b in oy[:n])
    return float(np.abs(Sx - Sy)[keep].max())


def variation_profile(spec: NdsSpec, psi: Potential, eps: float, ns, samples: int = 500,
                      seed: int = 0) -> VariationReport:
    """Variation at each n, with the Hölder bound when psi declares Hölder data.

    ``plateau`` is true when the maximum over the second half of the profile
    is within 10% of the maximum over the first half, a finite-data sign of
    bounded variation.
    """
    ns = sorted(ns)
    vals = [variation_estimate(spec, psi, eps, n, samples, seed + n) for n in ns]
    bound = within = None
    hd = psi.holder()
    if hd is not None and spec.sigma is not None:
        bound = holder_variation_bound(hd[0], hd[1], spec.sigma, eps)
        within = all(v <= bound + 1e-12 for v in vals)
    first, second = vals[: len(vals) // 2], vals[len(vals) // 2:]
    plateau = (not first) or max(second) <= 1.1 * max(first) + 1e-12
    return VariationReport(eps, ns, vals, bound, within, plateau)


# ---------------------------------------------------------------------------
# property suite
# ---------------------------------------------------------------------------

ROUNDING = 1e-9


def _approx_le(a, b, scale=1.0):
    return a <= b + ROUNDING * max(1.0, abs(scale))


def pressure_property_suite(spec: NdsSpec, psi: Potential, phi: Potential, eps: float, n: int,
                            t_grid=(-2, -1, -0.5, 0, 0.5, 1, 2), c: float = 0.5, grid=None) -> Report:
    """Pressure-function properties at one (eps, n), over one greedy separated set E.

    With p(f) = log sum_{x in E} exp(S_{1,n} f(x)) and m = |E|:
    (a) p(0) = log m; (b) min(phi, psi) <= psi gives p(min) <= p(psi);
    (c) |p(psi) - p(phi)| <= n max|psi - phi| on the orbit points of E;
    (d) p(psi + c) = p(psi) + n c; (e) t -> p(t psi) convex on t_grid;
    (f) p(psi + phi) <= p(psi) + p(phi); (g) |p(psi) - log m| <= p(|psi|) - log m;
    (h) p(t psi) <= t p(psi) for t >= 1 and >= for t <= 1.
    Float comparisons allow 1e-9 relative rounding. Raw and count-normalised
    margins are both reported; the form asserted is the one that holds for
    every finite set.
    """
    space = spec.space
    g = _grid_for(spec, 1, n, eps, grid)
    close = closeness(spec, 1, n, eps, g)
    E = g.points[_greedy_separated(close)]
    m = len(E)
    logm = math.log(m)
    orbE = orbit_batch(spec, 1, n - 1, E)

    def S(f):
        return sum(f.evaluate(space, Xj) for Xj in orbE)

    def p(f):
        return log_sum_exp(S(f))

    Spsi, Sphi = S(psi), S(phi)
    ppsi, pphi = log_sum_exp(Spsi), log_sum_exp(Sphi)
    rep = Report("pressure_properties")
    margins = {}

    pa = p(Constant(0.0))
    margins["a"] = pa - logm
    if pa != logm:
        rep.fail(f"(a) p(0)={pa} differs from log m={logm}")

    pmin = log_sum_exp(np.minimum(Spsi, Sphi))
    margins["b"] = ppsi - pmin
    if not _approx_le(pmin, ppsi, ppsi):
        rep.fail(f"(b) monotonicity violated: {pmin} > {ppsi}")

    diffnorm = max(float(np.abs(psi.evaluate(space, Xj) - phi.evaluate(space, Xj)).max()) for Xj in orbE)
    margins["c"] = n * diffnorm - abs(ppsi - pphi)
    if not _approx_le(abs(ppsi - pphi), n * diffnorm, ppsi):
        rep.fail(f"(c) Lipschitz bound violated: |{ppsi}-{pphi}| > {n}*{diffnorm}")

    pc = p(psi + c)
    margins["d"] = pc - (ppsi + n * c)
    if abs(margins["d"]) > ROUNDING * max(1.0, abs(pc)):
        rep.fail(f"(d) p(psi+c)={pc} != p(psi)+n c={ppsi + n * c}")

    ts = sorted(t_grid)
    curve = [log_sum_exp(t * Spsi) for t in ts]
    worst = 0.0
    for i in range(1, len(ts) - 1):
        t0, t1, t2 = ts[i - 1], ts[i], ts[i + 1]
        w = (t2 - t1) / (t2 - t0)
        excess = curve[i] - (w * curve[i - 1] + (1 - w) * curve[i + 1])
        worst = max(worst, excess)
        if not _approx_le(curve[i], w * curve[i - 1] + (1 - w) * curve[i + 1], curve[i]):
            rep.fail(f"(e) convexity violated at t={t1} by {excess}")
    margins["e"] = -worst

    psum = log_sum_exp(Spsi + Sphi)
    margins["f_raw"] = ppsi + pphi - psum
    margins["f_normalised"] = (ppsi - logm) + (pphi - logm) - (psum - logm)
    if not _approx_le(psum, ppsi + pphi, psum):
        rep.fail(f"(f) subadditivity violated: {psum} > {ppsi} + {pphi}")

    pabs = p(abs(psi))
    margins["g_raw"] = pabs - abs(ppsi)
    margins["g_normalised"] = (pabs - logm) - abs(ppsi - logm)
    if not _approx_le(abs(ppsi - logm), pabs - logm, pabs):
        rep.fail(f"(g) |p(psi)-log m| > p(|psi|)-log m")

    scale_margin = math.inf
    for t in ts:
        pt = log_sum_exp(t * Spsi)
        gap = (t * ppsi - pt) if t >= 1 else (pt - t * ppsi)
        scale_margin = min(scale_margin, gap)
        if gap < -ROUNDING * max(1.0, abs(pt)):
            rep.fail(f"(h) scaling inequality violated at t={t} by {-gap}")
    margins["h"] = scale_margin

    rep.details = {"n": n, "epsilon": eps, "separated_size": m, "margins": margins,
                   "p_psi": ppsi, "p_phi": pphi, "t_grid": ts, "curve": curve}
    return rep


def partition_lipschitz_check(spec: NdsSpec, pairs, eps: float, n: int, grid=None) -> Report:
    """|p_n(psi) - p_n(phi)| <= n max|psi - phi| for each potential pair, on one separated set."""
    space = spec.space
    g = _grid_for(spec, 1, n, eps, grid)
    E = g.points[_greedy_separated(closeness(spec, 1, n, eps, g))]
    orbE = orbit_batch(spec, 1, n - 1, E)
    rep = Report("partition_lipschitz")
    worst = math.inf
    for idx, (psi, phi) in enumerate(pairs):
        a = sum(psi.evaluate(space, X) for X in orbE)
        b = sum(phi.evaluate(space, X) for X in orbE)
        norm = max(float(np.abs(psi.evaluate(space, X) - phi.evaluate(space, X)).max()) for X in orbE)
        lhs = abs(log_sum_exp(a) - log_sum_exp(b))
        worst = min(worst, n * norm - lhs)
        if not _approx_le(lhs, n * norm, lhs):
            rep.fail(f"pair {idx}: {lhs} > {n * norm}")
    rep.value = worst
    rep.details = {"pairs": len(pairs), "n": n, "epsilon": eps, "worst_margin": worst}
    return rep


# ---------------------------------------------------------------------------
# curves and scale stability
# ---------------------------------------------------------------------------

CURVE_TOL = 0.02


def pressure_curve(spec: NdsSpec, psi: Potential, t_grid, eps: float, n_range, mode: str = "separated",
                   grid=None, tol: float = CURVE_TOL, workers: int = 1) -> Report:
    """Pressure estimates along t -> t psi, checked for Lipschitz, slope and convexity bounds."""
    ts = sorted(t_grid)
    if len(ts) < 5:
        raise ParameterError("pressure curves need at least 5 values of t")
    norm = psi.sup_norm(spec.space)
    ests = [pressure_estimate(spec, t * psi, eps, n_range, mode, grid, workers=workers) for t in ts]
    P = [e.estimate for e in ests]
    rep = Report("pressure_curve", tolerance=tol)
    slopes = [(P[i + 1] - P[i]) / (ts[i + 1] - ts[i]) for i in range(len(ts) - 1)]
    for i, s in enumerate(slopes):
        if abs(s) > norm + tol:
            rep.fail(f"slope {s} on [{ts[i]}, {ts[i + 1]}] exceeds {norm} + {tol}")
    for i in range(len(ts)):
        for j in range(i + 1, len(ts)):
            if abs(P[i] - P[j]) > abs(ts[i] - ts[j]) * norm + tol:
                rep.fail(f"Lipschitz bound fails between t={ts[i]} and t={ts[j]}")
    convex_violations = 0
    for i in range(1, len(ts) - 1):
        w = (ts[i + 1] - ts[i]) / (ts[i + 1] - ts[i - 1])
        if P[i] > w * P[i - 1] + (1 - w) * P[i + 1] + tol:
            convex_violations += 1
            rep.fail(f"convexity fails at t={ts[i]}")
    rep.value = P
    rep.details = {"t": ts, "estimates": P, "slopes": slopes, "sup_norm": norm,
                   "convexity_violations": convex_violations, "reports": [e.to_dict() for e in ests]}
    return rep


def scale_stability_check(spec: NdsSpec, psi: Potential, eps_list, n_range, tol: float = 0.05,
                          grid=None, workers: int = 1) -> Report:
    """Pressure estimates at several scales below rho should agree pairwise within tol."""
    if not spec.expanding:
        raise ParameterError("scale stability needs a uniformly expanding spec (declared sigma, rho)")
    for e in eps_list:
        if not (0 < e < spec.rho):
            raise ParameterError(f"every eps must lie in (0, rho={spec.rho}); got {e}")
    ests = [pressure_estimate(spec, psi, e, n_range, "separated", grid, workers=workers) for e in eps_list]
    rep = Report("scale_stability", tolerance=tol)
    vals = [r.estimate for r in ests]
    spread = max(vals) - min(vals)
    if spread > tol:
        rep.fail(f"estimates {vals} spread by {spread} > {tol}")
    rep.value = vals
    rep.details = {"epsilon": list(eps_list), "estimates": vals, "spread": spread,
                   "reports": [r.to_dict() for r in ests]}
    return rep


# ---------------------------------------------------------------------------
# transfer-matrix oracle
# ---------------------------------------------------------------------------


def weighted_matrix(A, letter_values) -> np.ndarray:
    check_transition_matrix(A)
    A = np.asarray(A, dtype=float)
    v = np.asarray(letter_values, dtype=float)
    if v.shape != (len(A),):
        raise ParameterError("one value per letter is required")
    return A * np.exp(v)[:, None]


def _irreducible(A) -> bool:
    ncomp, _ = connected_components(csr_matrix(np.asarray(A) > 0), directed=True, connection="strong")
    return ncomp == 1


def sft_transfer_pressure(A, letter_values) -> float:
    """log of the spectral radius of A_ij exp(v(i)), by power iteration."""
    M = weighted_matrix(A, letter_values)
    if not _irreducible(A):
        warnings.warn("transition matrix is reducible; pressure is the largest block's", RuntimeWarning)
    return math.log(spectral_radius(M))


def sft_weighted_word_sum(A, letter_values, n: int) -> float:
    """log of the sum over admissible words of length n of exp(sum of letter values)."""
    M = weighted_matrix(A, letter_values)
    v = np.exp(np.asarray(letter_values, dtype=float))
    logs = 0.0
    for _ in range(n - 1):
        v = M @ v
        s = v.sum()
        logs += math.log(s)
        v = v / s
    return logs + math.log(v.sum())
