"""Phase spaces, map descriptors and non-autonomous map sequences.

Points are plain immutable values:

* circle / interval: ``float``
* torus: ``tuple`` of floats
* symbolic: ``tuple`` of ints (letters ``0 .. alphabet-1``), at most ``depth`` long

Batched code paths work on 2-D arrays: ``(G, dim)`` floats for the continuous
spaces and ``(G, D)`` integer words for the symbolic space.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import (
    DepthExhausted,
    NumericError,
    ParameterError,
    ScheduleExhausted,
    UnsupportedOperation,
)

Point = Union[float, tuple]

SPACE_KINDS = ("circle", "torus", "interval", "symbolic")


# ---------------------------------------------------------------------------
# spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Space:
    """A compact metric phase space.

    ``matrix`` and ``depth`` are only meaningful for ``kind="symbolic"``;
    ``dim`` only for ``kind="torus"``.
    """

    kind: str
    dim: int = 1
    matrix: tuple | None = None
    depth: int = 64

    def __post_init__(self):
        if self.kind not in SPACE_KINDS:
            raise ParameterError(f"unknown space kind {self.kind!r}")
        if self.kind == "torus" and self.dim < 1:
            raise ParameterError("torus dimension must be >= 1")
        if self.kind in ("circle", "interval") and self.dim != 1:
            raise ParameterError(f"{self.kind} has dimension 1")
        if self.kind == "symbolic":
            if self.matrix is None:
                raise ParameterError("symbolic space needs a transition matrix")
            object.__setattr__(self, "matrix", tuple(tuple(int(a) for a in row) for row in self.matrix))
            check_transition_matrix(self.matrix)
            if self.depth < 2:
                raise ParameterError("symbolic depth must be >= 2")

    @classmethod
    def circle(cls) -> "Space":
        return cls("circle")

    @classmethod
    def torus(cls, dim: int) -> "Space":
        return cls("torus", dim=dim)

    @classmethod
    def interval(cls) -> "Space":
        return cls("interval")

    @classmethod
    def symbolic(cls, matrix, depth: int = 64) -> "Space":
        return cls("symbolic", matrix=tuple(map(tuple, matrix)), depth=depth)

    @property
    def alphabet(self) -> int:
        return len(self.matrix) if self.matrix is not None else 0

    @property
    def periodic(self) -> bool:
        return self.kind in ("circle", "torus")

    @property
    def diameter(self) -> float:
        return 1.0 if self.kind == "interval" else 0.5

    def transition_array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=np.int64)

    # -- points ------------------------------------------------------------

    def point(self, value) -> Point:
        """Normalise ``value`` into a point of this space, checking membership."""
        if self.kind == "symbolic":
            word = tuple(int(a) for a in value)
            if not word:
                raise DepthExhausted("empty symbolic word")
            if len(word) > self.depth:
                word = word[: self.depth]
            if not is_admissible(self.matrix, word):
                raise ParameterError(f"word {word[:12]}... is not admissible")
            return word
        if self.kind == "torus":
            coords = tuple(float(c) for c in np.ravel(value))
            if len(coords) != self.dim:
                raise ParameterError(f"torus point needs {self.dim} coordinates")
            if any(not (0.0 <= c < 1.0) for c in coords):
                raise ParameterError(f"torus coordinates must lie in [0,1): {coords}")
            return coords
        x = float(np.ravel(value)[0]) if np.ndim(value) else float(value)
        hi_ok = x < 1.0 if self.kind == "circle" else x <= 1.0
        if not (0.0 <= x and hi_ok):
            raise ParameterError(f"{x} is not a point of the {self.kind}")
        return x

    def to_batch(self, points: Sequence[Point]) -> np.ndarray:
        if self.kind == "symbolic":
            lengths = {len(p) for p in points}
            if len(lengths) != 1:
                raise ParameterError("symbolic batch needs words of equal length")
            return np.array(points, dtype=np.int64).reshape(len(points), -1)
        return np.array(points, dtype=float).reshape(len(points), self.dim)

    def from_row(self, row) -> Point:
        if self.kind == "symbolic":
            return tuple(int(a) for a in row)
        if self.kind == "torus":
            return tuple(float(c) for c in row)
        return float(row[0])


def check_transition_matrix(matrix) -> None:
    """Raise unless ``matrix`` is a 0/1 square matrix with no zero row or column."""
    A = np.asarray(matrix)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 2:
        raise ParameterError("transition matrix must be square of size >= 2")
    if not np.isin(A, (0, 1)).all():
        raise ParameterError("transition matrix entries must be 0 or 1")
    if (A.sum(axis=1) < 1).any() or (A.sum(axis=0) < 1).any():
        raise ParameterError("transition matrix has an empty row or column")


def is_admissible(matrix, word) -> bool:
    return all(matrix[a][b] for a, b in zip(word, word[1:]))


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------


def wrap_unit(a):
    """Reduce mod 1 into [0, 1). A tiny negative would otherwise round up to exactly 1.0."""
    r = np.mod(a, 1.0)
    r = np.where(r >= 1.0, 0.0, r)
    return float(r) if r.ndim == 0 else r


def _circle_gap(d: np.ndarray) -> np.ndarray:
    d = np.abs(d) % 1.0
    return np.minimum(d, 1.0 - d)


def distance_batch(space: Space, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Row-wise distances between two equally shaped batches."""
    if space.kind == "symbolic":
        m = min(X.shape[1], Y.shape[1])
        diff = X[:, :m] != Y[:, :m]
        first = np.argmax(diff, axis=1)
        out = np.ldexp(1.0, -(first + 1))
        out[~diff.any(axis=1)] = 0.0
        return out
    if space.kind == "interval":
        return np.abs(X[:, 0] - Y[:, 0])
    return _circle_gap(X - Y).max(axis=1)


def distance(space: Space, x: Point, y: Point) -> float:
    """Metric of ``space``.

    Symbolic words are compared on their common prefix: two words that agree
    on every known letter are at distance 0 (the resolution limit of the
    truncation).
    """
    if space.kind == "symbolic":
        if not isinstance(x, tuple) or not isinstance(y, tuple):
            raise TypeError("symbolic distance needs two words")
        for i, (a, b) in enumerate(zip(x, y)):
            if a != b:
                return 2.0 ** -(i + 1)
        return 0.0
    if isinstance(x, tuple) != (space.kind == "torus") or isinstance(y, tuple) != (space.kind == "torus"):
        raise TypeError(f"points do not belong to a {space.kind}")
    if space.kind == "interval":
        return abs(x - y)
    if space.kind == "circle":
        d = abs(x - y) % 1.0
        return min(d, 1.0 - d)
    return max(min(abs(a - b) % 1.0, 1.0 - abs(a - b) % 1.0) for a, b in zip(x, y))


# ---------------------------------------------------------------------------
# map descriptors
# ---------------------------------------------------------------------------


class MapDescriptor:
    """Common interface of the map zoo.

    Subclasses are frozen dataclasses; ``apply`` works on batches.
    """

    kinds: tuple = ()
    type_name = ""

    def check_space(self, space: Space) -> None:
        if space.kind not in self.kinds:
            raise ParameterError(f"{self.type_name} does not act on a {space.kind}")

    def apply(self, space: Space, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def preimages(self, space: Space, y: Point) -> list:
        raise UnsupportedOperation(f"{self.type_name} has no preimage enumeration")

    def preimages_batch(self, space: Space, Y: np.ndarray) -> np.ndarray:
        """All preimages of every row of ``Y``, stacked (order unspecified)."""
        rows = [space.to_batch(self.preimages(space, space.from_row(y))) for y in Y]
        return np.concatenate(rows, axis=0)

    def lift(self, t: np.ndarray) -> np.ndarray:
        """Monotone lift on the real line (circle maps only)."""
        raise UnsupportedOperation(f"{self.type_name} has no continuous circle lift")

    def constants(self, space: Space):
        """Certified (expansion factor, injectivity radius) or ``None``."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Identity(MapDescriptor):
    kinds = SPACE_KINDS
    type_name = "identity"

    def check_space(self, space):
        pass

    def apply(self, space, X):
        return X

    def preimages(self, space, y):
        return [y]

    def preimages_batch(self, space, Y):
        return Y

    def lift(self, t):
        return np.asarray(t, dtype=float)

    def to_dict(self):
        return {"type": "identity"}


@dataclass(frozen=True)
class CircleAffine(MapDescriptor):
    """x -> degree * x (mod 1)."""

    degree: int
    kinds = ("circle",)
    type_name = "circle_affine"

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 2:
            raise ParameterError("CircleAffine degree must be an integer >= 2")

    def apply(self, space, X):
        return wrap_unit(self.degree * X)

    def preimages(self, space, y):
        return [wrap_unit((y + j) / self.degree) for j in range(self.degree)]

    def preimages_batch(self, space, Y):
        return np.concatenate([(Y + j) / self.degree for j in range(self.degree)], axis=0)

    def lift(self, t):
        return self.degree * np.asarray(t, dtype=float)

    def constants(self, space):
        return float(self.degree), 1.0 / (2 * self.degree)

    def to_dict(self):
        return {"type": self.type_name, "degree": self.degree}


@dataclass(frozen=True)
class TorusLinear(MapDescriptor):
    """x -> A x (mod 1) on the d-torus with the max-of-circle-distances metric."""

    matrix: tuple
    kinds = ("torus",)
    type_name = "torus_linear"

    def __post_init__(self):
        A = np.array(self.matrix)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ParameterError("TorusLinear matrix must be square")
        if not np.array_equal(A, np.round(A)):
            raise ParameterError("TorusLinear matrix must have integer entries")
        object.__setattr__(self, "matrix", tuple(tuple(int(a) for a in row) for row in A))
        det = self.det
        if abs(det) < 1:
            raise ParameterError("TorusLinear matrix must be invertible over Q")
        if np.min(np.abs(np.linalg.eigvals(A.astype(float)))) <= 1.0:
            raise ParameterError("TorusLinear needs all eigenvalue moduli > 1")
        if self.constants(None)[0] <= 1.0:
            raise ParameterError(
                "TorusLinear expansion under the max metric (1/||A^-1||_inf) must exceed 1"
            )

    @property
    def array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=np.int64)

    @property
    def det(self) -> int:
        return int(round(np.linalg.det(np.array(self.matrix, dtype=float))))

    def check_space(self, space):
        super().check_space(space)
        if space.dim != len(self.matrix):
            raise ParameterError("TorusLinear matrix size does not match torus dimension")

    def apply(self, space, X):
        return wrap_unit(X @ self.array.T.astype(float))

    def _coset_offsets(self) -> np.ndarray:
        # A^{-1} Z^d mod Z^d has |det| elements, all of the form adj(A) m / det
        # with m in [0, |det|)^d.
        A = np.array(self.matrix, dtype=float)
        d = len(self.matrix)
        D = abs(self.det)
        adj = np.round(np.linalg.inv(A) * self.det).astype(np.int64)
        sign = 1 if self.det > 0 else -1
        reps = set()
        for m in itertools.product(range(D), repeat=d):
            reps.add(tuple(int(v) for v in (sign * (adj @ np.array(m))) % D))
        return np.array(sorted(reps), dtype=float) / D

    def preimages(self, space, y):
        base = np.linalg.solve(np.array(self.matrix, dtype=float), np.array(y, dtype=float))
        pts = wrap_unit(base[None, :] + self._coset_offsets())
        pts[pts >= 1.0] = 0.0
        return [tuple(float(c) for c in row) for row in pts]

    def preimages_batch(self, space, Y):
        base = np.linalg.solve(np.array(self.matrix, dtype=float), Y.T).T
        pts = wrap_unit(base[None, :, :] + self._coset_offsets()[:, None, :])
        pts[pts >= 1.0] = 0.0
        return pts.reshape(-1, Y.shape[1])

    def constants(self, space):
        A = np.array(self.matrix, dtype=float)
        inv_norm = np.abs(np.linalg.inv(A)).sum(axis=1).max()
        fwd_norm = np.abs(A).sum(axis=1).max()
        return 1.0 / inv_norm, 1.0 / (2.0 * fwd_norm)

    def to_dict(self):
        return {"type": self.type_name, "matrix": [list(r) for r in self.matrix]}


@dataclass(frozen=True)
class ShiftPower(MapDescriptor):
    """The ``power``-th iterate of the one-sided shift."""

    power: int = 1
    kinds = ("symbolic",)
    type_name = "shift_power"

    def __post_init__(self):
        if int(self.power) != self.power or self.power < 1:
            raise ParameterError("ShiftPower power must be an integer >= 1")

    def apply(self, space, X):
        if X.shape[1] <= self.power:
            raise DepthExhausted(
                f"shift by {self.power} needs words longer than {X.shape[1]} letters"
            )
        return X[:, self.power:]

    def preimages(self, space, y):
        A = space.matrix
        prefixes = [(a,) for a in range(space.alphabet)]
        for _ in range(self.power - 1):
            prefixes = [p + (b,) for p in prefixes for b in range(space.alphabet) if A[p[-1]][b]]
        out = [p + tuple(y) for p in prefixes if A[p[-1]][y[0]]]
        return [w[: space.depth] for w in out]

    def constants(self, space):
        return 2.0 ** self.power, 2.0 ** -(self.power + 1)

    def to_dict(self):
        return {"type": self.type_name, "power": self.power}


@dataclass(frozen=True)
class PomeauManneville(MapDescriptor):
    """Circle map induced by x + 2^a x^(1+a) on [0,1/2], 2x-1 on (1/2,1]."""

    alpha: float
    beta: float
    kinds = ("circle",)
    type_name = "pomeau_manneville"

    def __post_init__(self):
        if not (0.0 < self.beta < self.alpha < 1.0):
            raise ParameterError("PomeauManneville needs 0 < beta < alpha < 1")

    def _left(self, x):
        return x + 2.0 ** self.alpha * x ** (1.0 + self.alpha)

    def apply(self, space, X):
        left = X <= 0.5
        out = np.where(left, self._left(np.where(left, X, 0.0)), 2.0 * X - 1.0)
        return wrap_unit(out)

    def lift(self, t):
        t = np.asarray(t, dtype=float)
        whole = np.floor(t)
        r = t - whole
        inner = np.where(r <= 0.5, self._left(np.minimum(r, 0.5)), 2.0 * r)
        return inner + 2.0 * whole

    def _solve_left(self, y: np.ndarray) -> np.ndarray:
        # the left branch is increasing from 0 to 1 on [0, 1/2]
        lo = np.zeros_like(y)
        hi = np.full_like(y, 0.5)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = self._left(mid) < y
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if (hi - lo).max(initial=0.0) < 1e-12:
                break
        x = 0.5 * (lo + hi)
        for _ in range(2):
            deriv = 1.0 + (1.0 + self.alpha) * 2.0 ** self.alpha * x ** self.alpha
            x = np.clip(x - (self._left(x) - y) / deriv, 0.0, 0.5)
        residual = np.abs(self._left(x) - y).max(initial=0.0)
        if residual > 1e-12:
            raise NumericError("branch inversion did not converge", residual)
        return x

    def preimages(self, space, y):
        return [float(self._solve_left(np.array([y]))[0]), (y + 1.0) / 2.0]

    def preimages_batch(self, space, Y):
        return np.concatenate([self._solve_left(Y), (Y + 1.0) / 2.0], axis=0)

    def to_dict(self):
        return {"type": self.type_name, "alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class CircleExponentFamily(MapDescriptor):
    """Lift t -> ((2n+1)/n) t taken mod 1; discontinuous at 0 unless n == 1."""

    n: int
    kinds = ("circle",)
    type_name = "circle_exponent"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError("CircleExponentFamily index must be >= 1")

    @property
    def factor(self) -> float:
        return (2 * self.n + 1) / self.n

    def apply(self, space, X):
        return (self.factor * X) % 1.0

    def to_dict(self):
        return {"type": self.type_name, "n": self.n}


def _tent3(u):
    return np.abs(1.0 - np.abs(3.0 * u - 1.0))


@dataclass(frozen=True)
class KolyadaSnoha(MapDescriptor):
    """Acts as the rescaled n-th iterate of g(x)=|1-|3x-1|| on [a,b], identity elsewhere."""

    index: int
    a: float
    b: float
    kinds = ("interval",)
    type_name = "kolyada_snoha"

    def __post_init__(self):
        if not (0.0 <= self.a < self.b <= 1.0) or self.index < 1:
            raise ParameterError("KolyadaSnoha needs index >= 1 and 0 <= a < b <= 1")

    @classmethod
    def default(cls, index: int) -> "KolyadaSnoha":
        return cls(index, 1.0 - 2.0 ** (1 - index), 1.0 - 2.0 ** (-index))

    def apply(self, space, X):
        inside = (X >= self.a) & (X <= self.b)
        if not inside.any():
            return X
        u = (X[inside] - self.a) / (self.b - self.a)
        for _ in range(self.index):
            u = _tent3(u)
        out = X.copy()
        out[inside] = self.a + (self.b - self.a) * u
        return out

    def to_dict(self):
        return {"type": self.type_name, "index": self.index, "a": self.a, "b": self.b}


DESCRIPTORS = {
    cls.type_name: cls
    for cls in (Identity, CircleAffine, TorusLinear, ShiftPower, PomeauManneville,
                CircleExponentFamily, KolyadaSnoha)
}

_DESCRIPTOR_FIELDS = {
    "identity": (),
    "circle_affine": ("degree",),
    "torus_linear": ("matrix",),
    "shift_power": ("power",),
    "pomeau_manneville": ("alpha", "beta"),
    "circle_exponent": ("n",),
    "kolyada_snoha": ("index", "a", "b"),
}


def descriptor_from_dict(data: dict) -> MapDescriptor:
    data = dict(data)
    kind = data.pop("type", None)
    if kind not in DESCRIPTORS:
        raise ParameterError(f"unknown map type {kind!r}")
    fields = _DESCRIPTOR_FIELDS[kind]
    unknown = set(data) - set(fields)
    if unknown:
        raise ParameterError(f"unknown field(s) for {kind}: {sorted(unknown)}")
    missing = [f for f in fields if f not in data]
    if missing:
        raise ParameterError(f"missing field(s) for {kind}: {missing}")
    if kind == "torus_linear":
        data["matrix"] = tuple(tuple(r) for r in data["matrix"])
    return DESCRIPTORS[kind](**data)


# ---------------------------------------------------------------------------
# schedules and specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    """Rule n -> descriptor.

    kind is one of ``constant``, ``periodic``, ``eventually_periodic``, ``table``
    or ``indexed`` (families whose n-th map depends on n).
    """

    kind: str
    maps: tuple = ()
    prefix: tuple = ()
    family: str | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "periodic", "eventually_periodic", "table", "indexed"):
            raise ParameterError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "indexed":
            if self.family not in ("kolyada_snoha", "circle_exponent"):
                raise ParameterError(f"unknown indexed family {self.family!r}")
        elif not self.maps:
            raise ParameterError("schedule needs at least one map")
        if self.kind == "constant" and len(self.maps) != 1:
            raise ParameterError("constant schedule takes exactly one map")

    @classmethod
    def constant(cls, desc):
        return cls("constant", maps=(desc,))

    @classmethod
    def periodic(cls, descs):
        return cls("periodic", maps=tuple(descs))

    @classmethod
    def eventually_periodic(cls, prefix, cycle):
        return cls("eventually_periodic", maps=tuple(cycle), prefix=tuple(prefix))

    @classmethod
    def table(cls, descs):
        return cls("table", maps=tuple(descs))

    @classmethod
    def indexed(cls, family):
        return cls("indexed", family=family)

    @property
    def horizon(self) -> float:
        return len(self.maps) if self.kind == "table" else math.inf

    def at(self, n: int) -> MapDescriptor:
        if n < 1:
            raise ParameterError(f"time index must be >= 1, got {n}")
        if self.kind == "constant":
            return self.maps[0]
        if self.kind == "periodic":
            return self.maps[(n - 1) % len(self.maps)]
        if self.kind == "eventually_periodic":
            if n <= len(self.prefix):
                return self.prefix[n - 1]
            return self.maps[(n - 1 - len(self.prefix)) % len(self.maps)]
        if self.kind == "table":
            if n > len(self.maps):
                raise ScheduleExhausted(f"table schedule ends at {len(self.maps)}, asked for {n}")
            return self.maps[n - 1]
        if self.family == "kolyada_snoha":
            return KolyadaSnoha.default(n)
        return CircleExponentFamily(n)

    def distinct(self) -> list:
        """All descriptors a finite schedule can produce (empty for indexed ones)."""
        seen = []
        for d in self.prefix + self.maps:
            if d not in seen:
                seen.append(d)
        return seen

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "map": self.maps[0].to_dict()}
        if self.kind in ("periodic", "table"):
            return {"kind": self.kind, "maps": [d.to_dict() for d in self.maps]}
        if self.kind == "eventually_periodic":
            return {"kind": self.kind, "prefix": [d.to_dict() for d in self.prefix],
                    "cycle": [d.to_dict() for d in self.maps]}
        return {"kind": "indexed", "family": self.family}


@dataclass(frozen=True)
class NdsSpec:
    """A non-autonomous system: a space plus a schedule of maps.

    ``sigma`` / ``rho`` are the declared uniform expansion factor and
    injectivity radius, when the schedule is uniformly expanding.
    """

    space: Space
    schedule: Schedule
    sigma: float | None = None
    rho: float | None = None

    def __post_init__(self):
        for d in self.schedule.distinct():
            d.check_space(self.space)
        if (self.sigma is None) != (self.rho is None):
            raise ParameterError("declare both sigma and rho or neither")
        if self.sigma is not None and (self.sigma <= 1.0 or self.rho <= 0.0):
            raise ParameterError("need sigma > 1 and rho > 0")

    @property
    def expanding(self) -> bool:
        return self.sigma is not None

    def map_at(self, n: int) -> MapDescriptor:
        d = self.schedule.at(n)
        if self.schedule.kind == "indexed" or self.schedule.kind == "table":
            d.check_space(self.space)
        return d

    def with_constants(self) -> "NdsSpec":
        """Copy with sigma/rho set to the minimum certified constants of the schedule."""
        sig, rho = certified_constants(self)
        return NdsSpec(self.space, self.schedule, sig, rho)

    def to_dict(self) -> dict:
        space = {"kind": self.space.kind}
        if self.space.kind == "torus":
            space["dim"] = self.space.dim
        if self.space.kind == "symbolic":
            space["matrix"] = [list(r) for r in self.space.matrix]
            space["depth"] = self.space.depth
        out = {"space": space, "schedule": self.schedule.to_dict()}
        if self.sigma is not None:
            out["sigma"] = self.sigma
            out["rho"] = self.rho
        return out


def certified_constants(spec: NdsSpec):
    descs = spec.schedule.distinct()
    if not descs:
        raise ParameterError("indexed schedules have no certified constants")
    consts = [d.constants(spec.space) for d in descs]
    if any(c is None for c in consts):
        raise ParameterError("schedule contains maps without certified expansion")
    return min(c[0] for c in consts), min(c[1] for c in consts)


def space_from_dict(data: dict) -> Space:
    data = dict(data)
    kind = data.pop("kind", None)
    allowed = {"circle": (), "interval": (), "torus": ("dim",), "symbolic": ("matrix", "depth")}
    if kind not in allowed:
        raise ParameterError(f"unknown space kind {kind!r}")
    unknown = set(data) - set(allowed[kind])
    if unknown:
        raise ParameterError(f"unknown field(s) for {kind} space: {sorted(unknown)}")
    if kind == "symbolic":
        return Space.symbolic(data["matrix"], data.get("depth", 64))
    if kind == "torus":
        return Space.torus(int(data["dim"]))
    return Space(kind)


def schedule_from_dict(data: dict) -> Schedule:
    data = dict(data)
    kind = data.pop("kind", None)
    allowed = {
        "constant": ("map",),
        "periodic": ("maps",),
        "table": ("maps",),
        "eventually_periodic": ("prefix", "cycle"),
        "indexed": ("family",),
    }
    if kind not in allowed:
        raise ParameterError(f"unknown schedule kind {kind!r}")
    unknown = set(data) - set(allowed[kind])
    missing = set(allowed[kind]) - set(data)
    if unknown or missing:
        raise ParameterError(
            f"schedule {kind}: unknown {sorted(unknown)}, missing {sorted(missing)}"
        )
    if kind == "constant":
        return Schedule.constant(descriptor_from_dict(data["map"]))
    if kind in ("periodic", "table"):
        return Schedule(kind, maps=tuple(descriptor_from_dict(d) for d in data["maps"]))
    if kind == "eventually_periodic":
        return Schedule.eventually_periodic(
            [descriptor_from_dict(d) for d in data["prefix"]],
            [descriptor_from_dict(d) for d in data["cycle"]],
        )
    return Schedule.indexed(data["family"])


def spec_from_dict(data: dict) -> NdsSpec:
    unknown = set(data) - {"space", "schedule", "sigma", "rho"}
    if unknown:
        raise ParameterError(f"unknown NdsSpec field(s): {sorted(unknown)}")
    for key in ("space", "schedule"):
        if key not in data:
            raise ParameterError(f"NdsSpec needs field {key!r}")
    return NdsSpec(
        space_from_dict(data["space"]),
        schedule_from_dict(data["schedule"]),
        data.get("sigma"),
        data.get("rho"),
    )


# ---------------------------------------------------------------------------
# dynamics
# ---------------------------------------------------------------------------


def _check_times(k: int, n: int) -> None:
    if k < 1:
        raise ParameterError(f"initial time must be >= 1, got {k}")
    if n < 0:
        raise ParameterError(f"step count must be >= 0, got {n}")


def apply_segment_batch(spec: NdsSpec, k: int, n: int, X: np.ndarray) -> np.ndarray:
    """f_k^n applied row-wise to a batch."""
    _check_times(k, n)
    for t in range(k, k + n):
        X = spec.map_at(t).apply(spec.space, X)
    return X


def orbit_batch(spec: NdsSpec, k: int, n: int, X: np.ndarray) -> list:
    """[X, f_k(X), ..., f_k^n(X)]."""
    _check_times(k, n)
    out = [X]
    for t in range(k, k + n):
        X = spec.map_at(t).apply(spec.space, X)
        out.append(X)
    return out


def apply_segment(spec: NdsSpec, k: int, n: int, x: Point) -> Point:
    """Return f_k^n(x) = f_{k+n-1} o ... o f_k (x); n = 0 is the identity."""
    x = spec.space.point(x)
    if n == 0:
        _check_times(k, n)
        return x
    X = spec.space.to_batch([x])
    return spec.space.from_row(apply_segment_batch(spec, k, n, X)[0])


def orbit(spec: NdsSpec, k: int, n: int, x: Point) -> list:
    x = spec.space.point(x)
    rows = orbit_batch(spec, k, n, spec.space.to_batch([x]))
    return [spec.space.from_row(r[0]) for r in rows]


def enumerate_preimages(spec: NdsSpec, n: int, y: Point) -> list:
    """All x with f_n(x) = y, in ascending branch order."""
    y = spec.space.point(y)
    return spec.map_at(n).preimages(spec.space, y)


def total_shift(spec: NdsSpec, k: int, n: int) -> int:
    """Number of letters f_k^n removes from a symbolic word."""
    s = 0
    for t in range(k, k + n):
        d = spec.map_at(t)
        s += d.power if isinstance(d, ShiftPower) else 0
    return s


# ---------------------------------------------------------------------------
# zoo
# ---------------------------------------------------------------------------

GOLDEN_MEAN = ((1, 1), (1, 0))


def doubling(degree: int = 2) -> NdsSpec:
    """Constant schedule of x -> degree*x mod 1."""
    d = CircleAffine(degree)
    sig, rho = d.constants(None)
    return NdsSpec(Space.circle(), Schedule.constant(d), sig, rho)


def circle_affine_schedule(degrees: Sequence[int], periodic: bool = True) -> NdsSpec:
    descs = [CircleAffine(k) for k in degrees]
    sched = Schedule.periodic(descs) if periodic else Schedule.table(descs)
    return NdsSpec(Space.circle(), sched).with_constants()


def torus_linear(matrix=((2, 0), (0, 3))) -> NdsSpec:
    d = TorusLinear(tuple(map(tuple, matrix)))
    sig, rho = d.constants(None)
    return NdsSpec(Space.torus(len(d.matrix)), Schedule.constant(d), sig, rho)


def shift_system(matrix=GOLDEN_MEAN, powers: Sequence[int] = (1,), depth: int = 64) -> NdsSpec:
    """Schedule cycling through shift powers on the SFT of ``matrix``."""
    space = Space.symbolic(matrix, depth)
    descs = [ShiftPower(m) for m in powers]
    sched = Schedule.constant(descs[0]) if len(descs) == 1 else Schedule.periodic(descs)
    return NdsSpec(space, sched).with_constants()


def golden_mean_shift(depth: int = 64) -> NdsSpec:
    return shift_system(GOLDEN_MEAN, (1,), depth)


def pomeau_manneville_schedule(alphas: Sequence[float] = (0.3, 0.5, 0.7), beta: float = 0.2) -> NdsSpec:
    return NdsSpec(Space.circle(), Schedule.periodic([PomeauManneville(a, beta) for a in alphas]))


def kolyada_snoha() -> NdsSpec:
    return NdsSpec(Space.interval(), Schedule.indexed("kolyada_snoha"))


def circle_exponent() -> NdsSpec:
    return NdsSpec(Space.circle(), Schedule.indexed("circle_exponent"))


def identity_system(space: Space | None = None) -> NdsSpec:
    return NdsSpec(space or Space.circle(), Schedule.constant(Identity()))
