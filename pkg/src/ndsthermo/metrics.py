"""Bowen metrics, dynamical balls and greedy separated / spanning sets on grids.

Close pairs (``d_{k,n} <= eps``) are found by a sorted sweep over the first
coordinate. The sweep window is ``eps`` in general; for specs that declare a
uniform expansion factor sigma and injectivity radius rho with ``eps < rho``
it shrinks to ``eps * sigma**-n``, because inverse branches contract Bowen
balls by that factor. Symbolic grids use exact prefix classes instead.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ParameterError
from .systems import (
    NdsSpec,
    Point,
    Space,
    distance,
    distance_batch,
    orbit,
    orbit_batch,
    total_shift,
    wrap_unit,
)

# symbolic word grids above this size are refused
MAX_WORDS = 5_000_000


def bowen_distance(spec: NdsSpec, k: int, n: int, x: Point, y: Point) -> float:
    """d_{k,n}(x, y) = max_{0<=i<=n} d(f_k^i x, f_k^i y)."""
    ox = orbit(spec, k, n, x)
    oy = orbit(spec, k, n, y)
    return max(distance(spec.space, a, b) for a, b in zip(ox, oy))


def bowen_distance_batch(spec: NdsSpec, k: int, n: int, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    out = distance_batch(spec.space, X, Y)
    for t in range(k, k + n):
        d = spec.map_at(t)
        X = d.apply(spec.space, X)
        Y = d.apply(spec.space, Y)
        np.maximum(out, distance_batch(spec.space, X, Y), out=out)
    return out


def dynamical_ball_membership(spec: NdsSpec, center: Point, k: int, n: int, eps: float, y: Point) -> bool:
    """True iff y lies in the open dynamical ball B(center, k, n, eps)."""
    if eps <= 0:
        raise ParameterError("radius must be positive")
    return bowen_distance(spec, k, n, center, y) < eps


# ---------------------------------------------------------------------------
# candidate grids
# ---------------------------------------------------------------------------


def _lexsort_rows(P: np.ndarray) -> np.ndarray:
    if len(P) == 0:
        return P
    order = np.lexsort(P.T[::-1])
    return P[order]


@dataclass(frozen=True)
class CandidateGrid:
    """A finite, lexicographically ordered set of candidate points."""

    space: Space
    points: np.ndarray
    h: float | None = None
    depth: int | None = None
    kind: str = "explicit"
    restriction: tuple | None = None

    def __len__(self):
        return len(self.points)

    def describe(self) -> dict:
        out = {"kind": self.kind, "size": len(self)}
        if self.h is not None:
            out["h"] = self.h
        if self.depth is not None:
            out["depth"] = self.depth
        if self.restriction is not None:
            c, r = self.restriction
            out["restriction"] = {"center": c, "radius": r}
        return out

    @classmethod
    def explicit(cls, space: Space, points) -> "CandidateGrid":
        pts = [space.point(p) for p in points]
        return cls(space, _lexsort_rows(space.to_batch(pts)), kind="explicit")

    @classmethod
    def uniform(cls, space: Space, h: float) -> "CandidateGrid":
        """Lattice of spacing ~h (exactly 1/round(1/h)) on a continuous space."""
        if space.kind == "symbolic":
            raise ParameterError("use CandidateGrid.words for symbolic spaces")
        if h <= 0:
            raise ParameterError("grid spacing must be positive")
        m = max(1, int(round(1.0 / h)))
        if space.kind == "interval":
            axis = np.arange(m + 1) / m
        else:
            axis = np.arange(m) / m
        if space.kind == "torus":
            mesh = np.meshgrid(*([axis] * space.dim), indexing="ij")
            pts = np.stack([g.ravel() for g in mesh], axis=1)
        else:
            pts = axis[:, None]
        return cls(space, pts, h=1.0 / m, kind="uniform")

    @classmethod
    def words(cls, space: Space, depth: int) -> "CandidateGrid":
        """All admissible words of length ``depth``, in lexicographic order."""
        if space.kind != "symbolic":
            raise ParameterError("word grids need a symbolic space")
        if depth < 1:
            raise ParameterError("word depth must be >= 1")
        A = space.transition_array().astype(bool)
        W = np.arange(space.alphabet, dtype=np.int64)[:, None]
        for _ in range(depth - 1):
            parts = []
            for b in range(space.alphabet):
                ok = A[W[:, -1], b]
                sub = W[ok]
                parts.append(np.hstack([sub, np.full((len(sub), 1), b, dtype=np.int64)]))
            W = np.concatenate(parts, axis=0)
            if len(W) > MAX_WORDS:
                raise ParameterError(f"word grid of depth {depth} exceeds {MAX_WORDS} words")
        return cls(space, _lexsort_rows(W), depth=depth, kind="words")

    @classmethod
    def pullback(cls, spec: NdsSpec, k: int, n: int, h: float) -> "CandidateGrid":
        """Pull a uniform grid of spacing h at time k+n back to time k through all branches."""
        base = cls.uniform(spec.space, h)
        P = base.points
        for t in range(k + n - 1, k - 1, -1):
            P = spec.map_at(t).preimages_batch(spec.space, P)
            P = wrap_unit(P) if spec.space.periodic else P
        P = np.unique(P, axis=0)
        return cls(spec.space, _lexsort_rows(P), h=base.h, kind=f"pullback(n={n})")

    def restrict(self, center: Point, radius: float) -> "CandidateGrid":
        """Grid points in the closed ball of the given radius."""
        c = self.space.point(center)
        C = np.repeat(self.space.to_batch([c]), len(self.points), axis=0) if self.space.kind != "symbolic" else None
        if self.space.kind == "symbolic":
            d = np.array([distance(self.space, c, self.space.from_row(r)) for r in self.points])
        else:
            d = distance_batch(self.space, self.points, C)
        keep = self.points[d <= radius]
        if len(keep) == 0:
            raise ParameterError(f"no grid point within {radius} of {center}")
        return CandidateGrid(self.space, keep, self.h, self.depth, self.kind, (c, radius))


def symbolic_letters_needed(eps: float) -> int:
    """Number c of leading letters two words must share to be within eps."""
    if eps >= 0.5:
        return 0
    # d = 2^-N <= eps  <=>  N >= log2(1/eps)
    return max(0, math.ceil(-math.log2(eps) - 1e-12) - 1)


def default_grid(spec: NdsSpec, k: int, n: int, eps: float) -> CandidateGrid:
    """Grid policy shared by all estimators.

    * symbolic: every admissible word long enough to resolve eps at step n;
    * expanding specs whose maps enumerate preimages: a uniform eps/4 grid at
      time k+n pulled back to time k, so every Bowen ball is resolved;
    * otherwise: a uniform grid of spacing eps/16.
    """
    if spec.space.kind == "symbolic":
        return CandidateGrid.words(spec.space, max(1, total_shift(spec, k, n) + symbolic_letters_needed(eps)))
    if spec.expanding:
        try:
            return CandidateGrid.pullback(spec, k, n, eps / 4)
        except Exception:  # no preimage enumeration along the segment
            pass
    return CandidateGrid.uniform(spec.space, eps / 16)


# ---------------------------------------------------------------------------
# closeness structure
# ---------------------------------------------------------------------------


@dataclass
class Closeness:
    """Who is within closed Bowen distance eps of whom, over a grid.

    Either a CSR adjacency (continuous spaces) or class labels (symbolic).
    """

    size: int
    indptr: np.ndarray | None = None
    indices: np.ndarray | None = None
    labels: np.ndarray | None = None
    _lists: list | None = field(default=None, repr=False)

    def neighbor_lists(self) -> list:
        if self._lists is None:
            if self.labels is not None:
                groups = {}
                for i, lab in enumerate(self.labels.tolist()):
                    groups.setdefault(lab, []).append(i)
                self._lists = [groups[lab] for lab in self.labels.tolist()]
            else:
                self._lists = np.split(self.indices, self.indptr[1:-1])
        return self._lists


def _sweep_window(spec: NdsSpec, n: int, eps: float) -> float:
    if spec.expanding and eps < spec.rho:
        return eps * spec.sigma ** (-n) * (1.0 + 1e-9) + 1e-15
    return eps * (1.0 + 1e-9) + 1e-15


PAIR_CHUNK = 2_000_000


def _bowen_filter(spec, k, n, eps, X, lo, hi):
    # iterate only the candidate rows, dropping pairs as soon as they separate
    A, B = X[lo], X[hi]
    keep = np.nonzero(distance_batch(spec.space, A, B) <= eps)[0]
    A, B = A[keep], B[keep]
    for t in range(k, k + n):
        if len(keep) == 0:
            break
        d = spec.map_at(t)
        A, B = d.apply(spec.space, A), d.apply(spec.space, B)
        ok = distance_batch(spec.space, A, B) <= eps
        keep, A, B = keep[ok], A[ok], B[ok]
    return lo[keep], hi[keep]


def close_pairs(spec: NdsSpec, k: int, n: int, eps: float, X: np.ndarray, window: float | None = None):
    """Index pairs (i < j) of rows of a first-coordinate-sorted batch with d_{k,n} <= eps.

    Candidates come from a sweep over the first coordinate and are filtered
    by the exact Bowen distance in chunks, so memory follows the survivors.
    """
    G = len(X)
    w = _sweep_window(spec, n, eps) if window is None else window
    x0 = X[:, 0]
    periodic = spec.space.periodic
    out_lo, out_hi = [], []
    pend_lo, pend_hi, pending = [], [], 0

    def flush():
        nonlocal pend_lo, pend_hi, pending
        if pending:
            lo, hi = np.concatenate(pend_lo), np.concatenate(pend_hi)
            a, b = _bowen_filter(spec, k, n, eps, X, lo, hi)
            out_lo.append(a)
            out_hi.append(b)
        pend_lo, pend_hi, pending = [], [], 0

    j = 1
    while j < G:
        if periodic:
            gap = (np.roll(x0, -j) - x0) % 1.0
            idx = np.nonzero(gap <= w)[0]
            partner = (idx + j) % G
        else:
            gap = x0[j:] - x0[:-j]
            idx = np.nonzero(gap <= w)[0]
            partner = idx + j
        if len(idx) == 0:
            break
        pend_lo.append(np.minimum(idx, partner))
        pend_hi.append(np.maximum(idx, partner))
        pending += len(idx)
        if pending >= PAIR_CHUNK:
            flush()
        j += 1
    flush()
    if not out_lo:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    lo, hi = np.concatenate(out_lo), np.concatenate(out_hi)
    if periodic and j >= G // 2:
        # offsets j and G - j describe the same pair on a wrapped sweep
        code = np.unique(lo.astype(np.int64) * G + hi)
        lo, hi = code // G, code % G
    return lo, hi


def closeness(spec: NdsSpec, k: int, n: int, eps: float, grid: CandidateGrid) -> Closeness:
    X = grid.points
    G = len(X)
    if spec.space.kind == "symbolic":
        c = symbolic_letters_needed(eps)
        cols = []
        for Xt in orbit_batch(spec, k, n, X):
            cols.append(Xt[:, : min(c, Xt.shape[1])])
        keys = np.hstack(cols) if cols else np.zeros((G, 0), dtype=np.int64)
        if keys.shape[1] == 0:
            labels = np.zeros(G, dtype=np.int64)
        else:
            _, labels = np.unique(keys, axis=0, return_inverse=True)
        return Closeness(G, labels=np.asarray(labels).ravel())
    I, J = close_pairs(spec, k, n, eps, X)
    src = np.concatenate([I, J])
    dst = np.concatenate([J, I])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(G + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)
    return Closeness(G, indptr=indptr, indices=dst)


# ---------------------------------------------------------------------------
# greedy selections
# ---------------------------------------------------------------------------


@dataclass
class SeparationReport:
    """A grid-relative separated or spanning set at (k, n, eps)."""

    k: int
    n: int
    eps: float
    mode: str
    indices: np.ndarray
    points: np.ndarray
    grid: dict

    @property
    def cardinality(self) -> int:
        return len(self.indices)

    def to_dict(self, include_points: bool = True) -> dict:
        out = {
            "k": self.k,
            "n": self.n,
            "epsilon": self.eps,
            "mode": self.mode,
            "cardinality": self.cardinality,
            "grid": self.grid,
        }
        if include_points:
            out["points"] = self.points.tolist()
        return out

    def to_json(self, include_points: bool = True) -> str:
        return json.dumps(self.to_dict(include_points), sort_keys=True)

    def csv_row(self) -> list:
        return [self.k, self.n, repr(self.eps), self.mode, self.cardinality, repr(self.grid.get("h", ""))]


CSV_HEADER = ["k", "n", "epsilon", "mode", "cardinality", "grid_h"]


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


@numba.njit(cache=True, nogil=True)
def _greedy_separated_csr(indptr, indices):
    size = len(indptr) - 1
    blocked = np.zeros(size, dtype=np.bool_)
    chosen = np.empty(size, dtype=np.int64)
    m = 0
    for i in range(size):
        if blocked[i]:
            continue
        chosen[m] = i
        m += 1
        for p in range(indptr[i], indptr[i + 1]):
            blocked[indices[p]] = True
    return chosen[:m]


@numba.njit(cache=True, nogil=True)
def _greedy_cover_csr(indptr, indices):
    # first uncovered point u; among u and its neighbours take the centre that
    # covers the most uncovered points (lowest index on ties)
    size = len(indptr) - 1
    covered = np.zeros(size, dtype=np.bool_)
    chosen = np.empty(size, dtype=np.int64)
    m = 0
    for u in range(size):
        if covered[u]:
            continue
        best = -1
        best_gain = -1
        # candidates in ascending index order: neighbours are sorted, u inserted
        inserted = False
        p = indptr[u]
        while True:
            if p < indptr[u + 1] and (inserted or indices[p] < u):
                c = indices[p]
                p += 1
            elif not inserted:
                c = u
                inserted = True
            else:
                break
            gain = 0 if covered[c] else 1
            for q in range(indptr[c], indptr[c + 1]):
                if not covered[indices[q]]:
                    gain += 1
            if gain > best_gain:
                best, best_gain = c, gain
        chosen[m] = best
        m += 1
        covered[best] = True
        for q in range(indptr[best], indptr[best + 1]):
            covered[indices[q]] = True
    return np.sort(chosen[:m])


def _greedy_separated(close: Closeness) -> np.ndarray:
    if close.labels is not None:
        _, first = np.unique(close.labels, return_index=True)
        return np.sort(first)
    return _greedy_separated_csr(close.indptr, close.indices)


def _greedy_cover(close: Closeness) -> np.ndarray:
    return _greedy_cover_csr(close.indptr, close.indices)


def _report(spec, k, n, eps, mode, grid, idx) -> SeparationReport:
    return SeparationReport(k, n, eps, mode, idx, grid.points[idx], grid.describe())


def _check_args(eps, grid):
    if eps <= 0:
        raise ParameterError("eps must be positive")
    if len(grid) == 0:
        raise ParameterError("empty candidate grid")


def greedy_maximal_separated(spec: NdsSpec, k: int, n: int, eps: float, grid: CandidateGrid,
                             close: Closeness | None = None) -> SeparationReport:
    """Maximal (n, eps)-separated subset of the grid, greedy in grid order."""
    _check_args(eps, grid)
    close = close or closeness(spec, k, n, eps, grid)
    return _report(spec, k, n, eps, "separated", grid, _greedy_separated(close))


def greedy_spanning(spec: NdsSpec, k: int, n: int, eps: float, grid: CandidateGrid,
                    close: Closeness | None = None) -> SeparationReport:
    """A subset of the grid whose closed Bowen eps-balls cover the grid.

    Returns the smaller of a local max-coverage greedy cover and the greedy
    maximal separated set (which always spans).
    """
    _check_args(eps, grid)
    close = close or closeness(spec, k, n, eps, grid)
    sep = _greedy_separated(close)
    cover = sep if close.labels is not None else _greedy_cover(close)
    idx = cover if len(cover) <= len(sep) else sep
    return _report(spec, k, n, eps, "spanning", grid, idx)


# ---------------------------------------------------------------------------
# re-verification
# ---------------------------------------------------------------------------

EXHAUSTIVE_PAIR_LIMIT = 20_000_000


def _all_pairs(m: int):
    I, J = np.triu_indices(m, k=1)
    return I, J


def validate_separated(spec: NdsSpec, report: SeparationReport) -> bool:
    """Re-check that every pair of the report is at Bowen distance > eps.

    All pairs are compared when there are at most EXHAUSTIVE_PAIR_LIMIT of
    them; larger sets use the sorted-window sweep.
    """
    P = report.points
    m = len(P)
    if m < 2:
        return True
    if spec.space.kind == "symbolic" or m * (m - 1) // 2 <= EXHAUSTIVE_PAIR_LIMIT:
        I, J = _all_pairs(m)
        for start in range(0, len(I), 2_000_000):
            sl = slice(start, start + 2_000_000)
            d = bowen_distance_batch(spec, report.k, report.n, P[I[sl]], P[J[sl]])
            if (d <= report.eps).any():
                return False
        return True
    order = np.lexsort(P.T[::-1])
    I, _ = close_pairs(spec, report.k, report.n, report.eps, P[order])
    return len(I) == 0


def validate_spanning(spec: NdsSpec, report: SeparationReport, grid: CandidateGrid) -> bool:
    """Re-check that every grid point is within closed Bowen distance eps of a listed point."""
    F = report.points
    X = grid.points
    covered = np.zeros(len(X), dtype=bool)
    if spec.space.kind == "symbolic" or len(F) * len(X) <= EXHAUSTIVE_PAIR_LIMIT:
        for j in range(len(F)):
            Fj = np.repeat(F[j:j + 1], len(X), axis=0)
            covered |= bowen_distance_batch(spec, report.k, report.n, X, Fj) <= report.eps
        return bool(covered.all())
    tagged = np.concatenate([X, F], axis=0)
    order = np.lexsort(tagged.T[::-1])
    I, J = close_pairs(spec, report.k, report.n, report.eps, tagged[order])
    I, J = order[I], order[J]
    G = len(X)
    is_center = np.zeros(len(tagged), dtype=bool)
    is_center[G:] = True
    hit = np.concatenate([I[is_center[J] & (I < G)], J[is_center[I] & (J < G)]])
    covered[hit] = True
    # grid points that coincide with a centre
    centre_rows = {tuple(r) for r in F.tolist()}
    for i, r in enumerate(X.tolist()):
        if not covered[i] and tuple(r) in centre_rows:
            covered[i] = True
    return bool(covered.all())
