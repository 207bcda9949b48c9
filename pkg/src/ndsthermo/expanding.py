"""Inverse-branch machinery for uniformly expanding map sequences.

Pull-backs pick, at every step, the preimage closest to a reference point
(the base orbit, or a pseudo-orbit). For a uniformly expanding sequence with
injectivity radius rho this is the local inverse branch, so the chain
contracts by 1/sigma per step.

Chains are evaluated backwards. Forward iteration of an expanding map loses
one bit per step in floating point, so long reconstructed orbits are reported
as the backward chain itself, together with the per-step residual
``max_i d(f(z_i), z_{i+1})``.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BranchDomainError, ConstructionError, ParameterError, UnsupportedOperation
from .metrics import CandidateGrid, SeparationReport, symbolic_letters_needed, validate_separated
from .reporting import Report
from .systems import (
    CircleAffine,
    Identity,
    NdsSpec,
    Point,
    PomeauManneville,
    ShiftPower,
    TorusLinear,
    apply_segment,
    distance,
    distance_batch,
    orbit,
    orbit_batch,
    total_shift,
    wrap_unit,
)

# ---------------------------------------------------------------------------
# expansion estimates
# ---------------------------------------------------------------------------


@dataclass
class ExpansionEstimate:
    sigma_hat: float
    expanding: bool
    pairs_used: int
    margin: float

    def to_dict(self):
        return {"sigma_hat": self.sigma_hat, "expanding": self.expanding,
                "pairs_used": self.pairs_used, "margin": self.margin}


def sample_pairs(spec: NdsSpec, rho: float, count: int, rng: np.random.Generator, centers=None):
    """Random pairs (X, Y) with Y in the open rho-ball around X (continuous spaces)."""
    space = spec.space
    if space.kind == "symbolic":
        raise UnsupportedOperation("use explicit word pairs on symbolic spaces")
    if centers is None:
        X = rng.random((count, space.dim))
    else:
        X = np.asarray(centers, dtype=float).reshape(-1, space.dim)
    U = rng.uniform(-1.0, 1.0, X.shape) * rho * 0.999
    Y = X + U
    if space.periodic:
        Y %= 1.0
    else:
        Y = np.clip(Y, 0.0, 1.0)
    return X, Y


def estimate_expansion(spec: NdsSpec, n: int, rho: float, pairs=None, samples: int = 1000,
                       seed: int = 0, margin: float = 1e-3) -> ExpansionEstimate:
    """Infimum of d(f_n x, f_n y) / d(x, y) over sampled pairs within rho.

    The map counts as expanding when the estimate exceeds ``1 + margin``;
    the margin keeps ratios that merely tend to 1 from passing.
    """
    space = spec.space
    if pairs is None:
        X, Y = sample_pairs(spec, rho, samples, np.random.default_rng(seed))
    else:
        X = space.to_batch([space.point(p[0]) for p in pairs])
        Y = space.to_batch([space.point(p[1]) for p in pairs])
    d0 = distance_batch(space, X, Y)
    keep = d0 > 0
    if not keep.any():
        raise ParameterError("all sampled pairs coincide")
    desc = spec.map_at(n)
    d1 = distance_batch(space, desc.apply(space, X[keep]), desc.apply(space, Y[keep]))
    sig = float((d1 / d0[keep]).min())
    return ExpansionEstimate(sig, sig > 1.0 + margin, int(keep.sum()), margin)


# ---------------------------------------------------------------------------
# inverse-branch chains
# ---------------------------------------------------------------------------


def _branch_stack(spec: NdsSpec, t: int, Y: np.ndarray) -> np.ndarray:
    P = spec.map_at(t).preimages_batch(spec.space, Y)
    if spec.space.periodic:
        P = wrap_unit(P)
    return P.reshape(len(P) // len(Y), len(Y), -1)


def _pull_rows(spec: NdsSpec, k: int, anchors: list, Y: np.ndarray, rho: float):
    """Backward chain for a batch on a continuous space.

    ``anchors[i]`` is the batch the preimage at time k+i must be closest to.
    Returns (Z, D) with Z[i] the chain at time k+i (Z[n] = Y) and D[i] the
    distances to the anchors.
    """
    n = len(anchors)
    Z = [None] * (n + 1)
    D = [None] * n
    Z[n] = Y
    space = spec.space
    for i in range(n - 1, -1, -1):
        cand = _branch_stack(spec, k + i, Z[i + 1])
        A = anchors[i]
        dist = np.stack([distance_batch(space, c, A) for c in cand])
        best = dist.argmin(axis=0)
        cols = np.arange(len(A))
        Z[i] = cand[best, cols]
        D[i] = dist[best, cols]
        if (D[i] >= rho).any():
            raise BranchDomainError(
                f"no preimage within rho={rho} of the reference point at step {i} (time {k + i})", step=i
            )
    return Z, D


def _pull_word(spec: NdsSpec, k: int, anchors: list, y, rho: float):
    n = len(anchors)
    Z = [None] * (n + 1)
    D = [0.0] * n
    Z[n] = y
    for i in range(n - 1, -1, -1):
        cands = spec.map_at(k + i).preimages(spec.space, Z[i + 1])
        if not cands:
            raise BranchDomainError(f"no preimage at step {i}", step=i)
        dists = [distance(spec.space, c, anchors[i]) for c in cands]
        j = int(np.argmin(dists))
        if dists[j] >= rho:
            raise BranchDomainError(
                f"no preimage within rho={rho} of the reference point at step {i} (time {k + i})", step=i
            )
        Z[i], D[i] = cands[j], dists[j]
    return Z, D


def _pull_points(spec, k, anchors, y, rho):
    """Single-point chain; anchors and y are points."""
    space = spec.space
    if space.kind == "symbolic":
        return _pull_word(spec, k, anchors, y, rho)
    A = [space.to_batch([a]) for a in anchors]
    Z, D = _pull_rows(spec, k, A, space.to_batch([y]), rho)
    return [space.from_row(z[0]) for z in Z], [float(d[0]) for d in D]


def _step_residual(spec, k, Z) -> float:
    space = spec.space
    worst = 0.0
    for i in range(len(Z) - 1):
        img = spec.map_at(k + i).apply(space, space.to_batch([Z[i]]))
        worst = max(worst, distance(space, space.from_row(img[0]), Z[i + 1]))
    return worst


@dataclass
class BranchChain:
    """z_n = y, z_i = preimage of z_{i+1} under f_{k+i} closest to f_k^i(x)."""

    k: int
    n: int
    base: list
    target: Point
    chain: list
    step_distances: list
    sigma: float | None
    rho: float
    step_residual: float
    certificate_ok: bool | None
    certificate_slack: float | None

    @property
    def result(self) -> Point:
        return self.chain[0]

    def to_dict(self):
        return {
            "k": self.k, "n": self.n, "base": self.base, "target": self.target, "chain": self.chain,
            "step_distances": self.step_distances, "sigma": self.sigma, "rho": self.rho,
            "step_residual": self.step_residual, "certificate_ok": self.certificate_ok,
            "certificate_slack": self.certificate_slack,
        }


def _require_rho(spec, rho):
    rho = spec.rho if rho is None else rho
    if rho is None or rho <= 0:
        raise ParameterError("an injectivity radius rho > 0 is required")
    return rho


def pull_back(spec: NdsSpec, k: int, x: Point, n: int, y: Point, rho: float | None = None) -> BranchChain:
    """Apply the inverse branch of f_k^n through x to y.

    The contraction certificate d(z_j, f_k^j x) <= sigma^(j-n) d(y, f_k^n x)
    is evaluated on the chain when sigma is declared.
    """
    rho = _require_rho(spec, rho)
    space = spec.space
    x = space.point(x)
    y = space.point(y)
    base = orbit(spec, k, n, x)
    gap = distance(space, y, base[-1])
    if gap >= rho:
        raise BranchDomainError(f"target is {gap} from f_k^n(x), not within rho={rho}", step=n)
    Z, D = _pull_points(spec, k, base[:-1], y, rho)
    ok = slack = None
    if spec.sigma is not None:
        slack = min(spec.sigma ** (j - n) * gap + 1e-10 - distance(space, Z[j], base[j]) for j in range(n + 1))
        ok = slack >= 0
    return BranchChain(k, n, base, y, Z, D, spec.sigma, rho, _step_residual(spec, k, Z), ok, slack)


def pull_back_batch(spec: NdsSpec, k: int, x: Point, n: int, Y: np.ndarray, rho: float | None = None):
    """Chains for many targets sharing one base orbit (continuous spaces); returns Z list."""
    rho = _require_rho(spec, rho)
    space = spec.space
    base = orbit(spec, k, n, space.point(x))
    anchors = [np.repeat(space.to_batch([b]), len(Y), axis=0) for b in base[:-1]]
    return _pull_rows(spec, k, anchors, Y, rho)[0]


# ---------------------------------------------------------------------------
# dynamical-ball image identity
# ---------------------------------------------------------------------------


def _ball_samples(space, center, radius, count, rng):
    C = np.repeat(space.to_batch([center]), count, axis=0)
    U = rng.uniform(-1.0, 1.0, C.shape) * radius
    Y = C + U
    return wrap_unit(Y) if space.periodic else np.clip(Y, 0.0, 1.0)


def ball_image_check(spec: NdsSpec, x: Point, k: int, n: int, eps: float, samples: int = 1000,
                     seed: int = 0) -> Report:
    """Sampled check of f_k^n(B(x,k,n,eps)) = B(f_k^n x, eps) in both directions."""
    if not spec.expanding:
        raise ParameterError("ball image identity needs declared sigma and rho")
    if not (0 < eps <= spec.rho):
        raise ParameterError(f"need 0 < eps <= rho = {spec.rho}")
    space = spec.space
    if space.kind == "symbolic":
        raise UnsupportedOperation("sampled ball check is implemented for continuous spaces")
    rng = np.random.default_rng(seed)
    x = space.point(x)
    fx = apply_segment(spec, k, n, x)
    rep = Report("ball_image", tolerance=eps)
    # forward: members of the dynamical ball land in the eps-ball
    width = eps * spec.sigma ** (-n) * 1.5
    Y = _ball_samples(space, x, width, samples, rng)
    X = np.repeat(space.to_batch([x]), samples, axis=0)
    orbY = orbit_batch(spec, k, n, Y)
    orbX = orbit_batch(spec, k, n, X)
    bowen = np.max([distance_batch(space, a, b) for a, b in zip(orbX, orbY)], axis=0)
    members = bowen < eps
    fwd_bad = members & ~(distance_batch(space, orbY[-1], orbX[-1]) < eps)
    # backward: pull-backs of eps-ball points are members of the dynamical ball
    W = _ball_samples(space, fx, eps * (1 - 1e-12), samples, rng)
    W = W[distance_batch(space, W, np.repeat(space.to_batch([fx]), len(W), axis=0)) < eps]
    Z = pull_back_batch(spec, k, x, n, W)
    back_bowen = np.max([distance_batch(space, z, np.repeat(space.to_batch([o]), len(W), axis=0))
                         for z, o in zip(Z, orbit(spec, k, n, x))], axis=0)
    back_bad = ~(back_bowen < eps)
    for i in np.nonzero(fwd_bad)[0][:20]:
        rep.fail(f"forward: member {space.from_row(Y[i])} maps outside the eps-ball")
    for i in np.nonzero(back_bad)[0][:20]:
        rep.fail(f"backward: pull-back of {space.from_row(W[i])} leaves the dynamical ball")
    rep.value = int(fwd_bad.sum() + back_bad.sum())
    rep.details = {"forward_members": int(members.sum()), "backward_samples": int(len(W)),
                   "forward_failures": int(fwd_bad.sum()), "backward_failures": int(back_bad.sum()),
                   "x": x, "k": k, "n": n, "eps": eps}
    return rep


# ---------------------------------------------------------------------------
# exactness
# ---------------------------------------------------------------------------


def _lift_supported(spec, k, horizon):
    try:
        for t in range(k, k + horizon):
            d = spec.map_at(t)
            if isinstance(d, Identity) or not isinstance(d, (CircleAffine, PomeauManneville)):
                return False
    except Exception:
        return False
    return True


# a delta given as a double (1/6, 0.1, ...) sits within an ulp of the intended
# value, so image lengths are compared with this slack
LENGTH_SLACK = 1e-12


def _lift_cover_time(spec, k, delta, centers, horizon):
    """First n with F(x+delta) - F(x-delta) >= 1 for every center, via lifts."""
    L = np.asarray(centers, dtype=float) - delta
    R = np.asarray(centers, dtype=float) + delta
    if (R - L >= 1.0 - LENGTH_SLACK).all():
        return 0
    for n in range(1, horizon + 1):
        d = spec.map_at(k + n - 1)
        shift = np.floor(L)
        L, R = d.lift(L - shift), d.lift(R - shift)
        if (R - L >= 1.0 - LENGTH_SLACK).all():
            return n
    return None


def _torus_cover_time(spec, k, delta, horizon):
    # closed sup-ball of radius delta maps onto a set containing the sup-ball
    # of radius delta / ||M^-1||_inf around the image centre (M the product
    # matrix); this is sharp for diagonal matrices and sufficient in general
    dim = spec.space.dim
    if delta >= 0.5:
        return 0
    M = np.eye(dim)
    for n in range(1, horizon + 1):
        M = spec.map_at(k + n - 1).array.astype(float) @ M
        inner = delta / np.abs(np.linalg.inv(M)).sum(axis=1).max()
        if inner >= 0.5 - LENGTH_SLACK:
            return n
    return None


def _primitive_power(A, limit=256):
    A = np.asarray(A, dtype=np.int64)
    P = np.eye(len(A), dtype=np.int64)
    for p in range(1, limit + 1):
        P = np.minimum(P @ A, 1)
        if (P > 0).all():
            return p
    return None


def _symbolic_cover_time(spec, k, delta, horizon):
    # the closed delta-ball is a cylinder of c letters; after shifting s >= c
    # letters its image is every word whose first letter is reachable from the
    # cylinder's last letter in s - c + 1 steps
    c = symbolic_letters_needed(delta)
    if c == 0:
        return 0
    p = _primitive_power(spec.space.matrix)
    if p is None:
        return None
    for n in range(1, horizon + 1):
        if total_shift(spec, k, n) - c + 1 >= p:
            return n
    return None


def _sampled_cover_time(spec, k, delta, centers, horizon, coverage):
    space = spec.space
    m = 4096
    for n in range(0, horizon + 1):
        ok = True
        for x in centers:
            B = _ball_samples(space, x, delta, m, np.random.default_rng(0))
            B[:m // 2] = wrap_unit((x + np.linspace(-delta, delta, m // 2))[:, None]) if space.periodic else \
                np.clip(x + np.linspace(-delta, delta, m // 2), 0, 1)[:, None]
            img = np.sort(orbit_batch(spec, k, n, B)[-1][:, 0])
            gaps = np.diff(img)
            lo, hi = img[0], img[-1]
            if space.periodic:
                worst = max(gaps.max(initial=0.0), lo + 1.0 - hi)
            else:
                worst = max(gaps.max(initial=0.0), lo, 1.0 - hi)
            if worst > coverage:
                ok = False
                break
        if ok:
            return n
    return None


def _start_times(spec, K):
    if K is not None:
        return list(range(1, K + 1))
    sch = spec.schedule
    if sch.kind == "constant":
        return [1]
    if sch.kind == "periodic":
        return list(range(1, len(sch.maps) + 1))
    if sch.kind == "eventually_periodic":
        return list(range(1, len(sch.prefix) + len(sch.maps) + 1))
    return list(range(1, 9))


def exactness_constant(spec: NdsSpec, delta: float, horizon: int = 64, K: int | None = None,
                       centers=None, coverage: float | None = None):
    """Smallest N such that f_k^n maps every closed delta-ball onto X for n >= N.

    Uses exact lift-endpoint arithmetic on circle lifts, the product-matrix
    bound on tori, the primitivity exponent on subshifts, and otherwise a
    sampled image with gaps below ``coverage``. Returns None when nothing is
    found within ``horizon``. ``K`` bounds the start times (default: one full
    period of the schedule).
    """
    if delta <= 0:
        raise ParameterError("delta must be positive")
    space = spec.space
    if centers is None:
        if space.kind in ("circle", "interval"):
            centers = list(np.arange(64) / 64) + [1e-9, 0.5 + 1e-9]
        else:
            centers = []
    worst = 0
    for k in _start_times(spec, K):
        if space.kind == "torus":
            n = _torus_cover_time(spec, k, delta, horizon)
        elif space.kind == "symbolic":
            n = _symbolic_cover_time(spec, k, delta, horizon)
        elif space.kind == "circle" and _lift_supported(spec, k, horizon):
            n = _lift_cover_time(spec, k, delta, centers, horizon)
        else:
            n = _sampled_cover_time(spec, k, delta, centers, horizon, coverage or delta / 64)
        if n is None:
            return None
        worst = max(worst, n)
    return worst


def specification_constant(spec: NdsSpec, eps: float, **kw):
    """Gap length that lets specification_point shadow at tolerance eps.

    Equals the exactness constant at min(eps, rho)/2.
    """
    if not spec.expanding:
        raise ParameterError("specification constant needs declared sigma and rho")
    return exactness_constant(spec, min(eps, spec.rho) / 2, **kw)


# ---------------------------------------------------------------------------
# shadowing
# ---------------------------------------------------------------------------


@dataclass
class PseudoOrbit:
    points: list
    delta: float

    def gaps(self, spec: NdsSpec) -> list:
        space = spec.space
        X = space.to_batch(self.points)
        out = []
        for i in range(len(X) - 1):
            img = spec.map_at(i + 1).apply(space, X[i:i + 1])
            out.append(distance(space, space.from_row(img[0]), self.points[i + 1]))
        return out

    def is_valid(self, spec: NdsSpec) -> bool:
        return all(g < self.delta for g in self.gaps(spec))

    def to_dict(self):
        return {"points": self.points, "delta": self.delta}


def random_pseudo_orbit(spec: NdsSpec, x1: Point, length: int, delta: float, seed: int = 0) -> PseudoOrbit:
    """Orbit of x1 with a uniform kick of size < delta after every step."""
    space = spec.space
    if space.kind == "symbolic":
        raise UnsupportedOperation("random pseudo-orbits are generated on continuous spaces")
    rng = np.random.default_rng(seed)
    pts = [space.point(x1)]
    row = space.to_batch(pts)
    for i in range(1, length):
        row = spec.map_at(i).apply(space, row) + rng.uniform(-1, 1, row.shape) * delta * 0.999
        row = wrap_unit(row) if space.periodic else np.clip(row, 0.0, 1.0)
        pts.append(space.from_row(row[0]))
    return PseudoOrbit(pts, delta)


@dataclass
class ShadowResult:
    point: Point
    max_error: float
    orbit: list
    errors: list
    step_residual: float
    bound: float

    def to_dict(self):
        return {"point": self.point, "max_error": self.max_error, "bound": self.bound,
                "step_residual": self.step_residual, "errors": self.errors}

    def trace_rows(self, spec, pseudo):
        gaps = [None] + pseudo.gaps(spec)
        return [(i + 1, pseudo.points[i], gaps[i], self.errors[i]) for i in range(len(self.errors))]


def shadow(spec: NdsSpec, pseudo: PseudoOrbit, eps: float, sigma: float | None = None,
           rho: float | None = None, terminal: Point | None = None) -> ShadowResult:
    """Shadow a finite delta-pseudo-orbit x_1..x_n by a true orbit.

    Starts from ``terminal`` (default x_n) and pulls back along the branches
    through x_{n-1}, ..., x_1. Any terminal within eps of x_n gives an
    orbit within sigma^-1 eps of the pseudo-orbit at every step.
    """
    sigma = spec.sigma if sigma is None else sigma
    rho = spec.rho if rho is None else rho
    if sigma is None or rho is None or sigma <= 1:
        raise ParameterError("shadowing needs sigma > 1 and rho")
    delta = pseudo.delta
    if not (sigma ** -1 * eps + delta < eps):
        raise ParameterError(
            f"precondition sigma^-1*eps + delta < eps violated: {sigma ** -1 * eps} + {delta} >= {eps}"
        )
    if not eps < rho:
        raise ParameterError(f"precondition eps < rho violated: {eps} >= {rho}")
    if not pseudo.is_valid(spec):
        raise ParameterError("points do not form a delta-pseudo-orbit")
    space = spec.space
    pts = [space.point(p) for p in pseudo.points]
    y = pts[-1] if terminal is None else space.point(terminal)
    if distance(space, y, pts[-1]) > eps:
        raise ParameterError("terminal point must be within eps of the last pseudo-orbit point")
    Z, D = _pull_points(spec, 1, pts[:-1], y, rho)
    errs = [float(d) for d in D] + [distance(space, y, pts[-1])]
    return ShadowResult(Z[0], max(errs), Z, errs, _step_residual(spec, 1, Z), eps / sigma)


# ---------------------------------------------------------------------------
# expansivity
# ---------------------------------------------------------------------------


def expansivity_check(spec: NdsSpec, rho: float | None = None, pairs=None, horizon: int | None = None,
                      samples: int = 1000, seed: int = 0) -> Report:
    """Every sampled distinct pair should separate beyond rho within the horizon."""
    rho = spec.rho if rho is None else rho
    if rho is None:
        raise ParameterError("expansivity check needs rho")
    space = spec.space
    if pairs is None:
        rng = np.random.default_rng(seed)
        X = rng.random((samples, space.dim))
        Y = rng.random((samples, space.dim))
    else:
        X = space.to_batch([space.point(p[0]) for p in pairs])
        Y = space.to_batch([space.point(p[1]) for p in pairs])
    d0 = distance_batch(space, X, Y)
    keep = d0 > 0
    X, Y, d0 = X[keep], Y[keep], d0[keep]
    if horizon is None:
        if spec.sigma is None:
            raise ParameterError("give a horizon for specs without sigma")
        hint = np.ceil(np.log(rho / d0) / np.log(spec.sigma)).clip(min=0)
        horizon = int(hint.max(initial=0)) + 8
    first = np.full(len(X), -1)
    d = d0.copy()
    first[d > rho] = 0
    for n in range(1, horizon + 1):
        if (first >= 0).all():
            break
        t = spec.map_at(n)
        X, Y = t.apply(space, X), t.apply(space, Y)
        d = distance_batch(space, X, Y)
        first[(first < 0) & (d > rho)] = n
    rep = Report("expansivity", tolerance=rho)
    bad = np.nonzero(first < 0)[0]
    for i in bad[:20]:
        rep.fail(f"pair {int(i)} at distance {d0[i]:.3g} never exceeded rho within {horizon} steps")
    if len(bad) > 20:
        rep.fail(f"... and {len(bad) - 20} more pairs")
    rep.value = int(len(bad))
    rep.details = {"pairs": int(len(first)), "skipped_coincident": int((~keep).sum()),
                   "horizon": horizon, "separation_times": first.tolist()}
    return rep


def star_expansivity_k0(sigma: float, rho: float, gamma: float) -> int:
    """Smallest k0 >= 1 with sigma^-k0 * rho < gamma."""
    if sigma <= 1 or rho <= 0 or gamma <= 0:
        raise ParameterError("need sigma > 1, rho > 0, gamma > 0")
    k0 = 1
    while sigma ** -k0 * rho >= gamma:
        k0 += 1
    return k0


def star_expansivity_check(spec: NdsSpec, gamma: float, samples: int = 500, start_times=(1, 2, 3),
                           extra: int = 3, seed: int = 0) -> Report:
    """Pairs at distance >= gamma have Bowen distance d_{i,n} > rho for every n >= k0."""
    if not spec.expanding:
        raise ParameterError("needs declared sigma and rho")
    k0 = star_expansivity_k0(spec.sigma, spec.rho, gamma)
    space = spec.space
    rng = np.random.default_rng(seed)
    X = rng.random((samples, space.dim))
    Y = rng.random((samples, space.dim))
    keep = distance_batch(space, X, Y) >= gamma
    X, Y = X[keep], Y[keep]
    rep = Report("star_expansivity", value=k0, tolerance=spec.rho)
    for i in start_times:
        for n in range(k0, k0 + extra + 1):
            ox, oy = orbit_batch(spec, i, n, X), orbit_batch(spec, i, n, Y)
            bowen = np.max([distance_batch(space, a, b) for a, b in zip(ox, oy)], axis=0)
            bad = int((bowen <= spec.rho).sum())
            if bad:
                rep.fail(f"start {i}, n={n}: {bad} pairs stayed within rho")
    rep.details = {"k0": k0, "pairs": int(len(X)), "gamma": gamma}
    return rep


# ---------------------------------------------------------------------------
# specification
# ---------------------------------------------------------------------------


@dataclass
class SpecSegments:
    """Orbit segments (x_m, j_m, k_m) with 1 <= j_1 <= k_1 < j_2 <= k_2 < ...

    With ``base_time == "start"`` each x_m is a point at time j_m and segment m
    asks d(f_1^{j_m+i-1} x, f_{j_m}^i x_m) <= eps for 0 <= i <= k_m - j_m.
    With ``base_time == "one"`` each x_m is a time-1 point and segment m asks
    d(f_1^i x, f_1^i x_m) <= eps for j_m - 1 <= i <= k_m - 1.
    """

    points: list
    starts: list
    ends: list
    base_time: str = "start"

    def __post_init__(self):
        if not (len(self.points) == len(self.starts) == len(self.ends)) or not self.points:
            raise ParameterError("segments need matching, nonempty point/start/end lists")
        if self.base_time not in ("start", "one"):
            raise ParameterError("base_time must be 'start' or 'one'")
        if self.starts[0] < 1:
            raise ParameterError("segments start at time >= 1")
        for m in range(len(self.points)):
            if self.ends[m] < self.starts[m]:
                raise ParameterError(f"segment {m} ends before it starts")
            if m and self.starts[m] <= self.ends[m - 1]:
                raise ParameterError(f"segment {m} overlaps its predecessor")

    def gaps(self) -> list:
        return [self.starts[m] - self.ends[m - 1] for m in range(1, len(self.points))]

    def start_points(self, spec: NdsSpec) -> list:
        """Each segment's base point moved to its own start time."""
        pts = [spec.space.point(p) for p in self.points]
        if self.base_time == "start":
            return pts
        return [apply_segment(spec, 1, j - 1, p) for p, j in zip(pts, self.starts)]

    def to_dict(self):
        return {"points": self.points, "starts": self.starts, "ends": self.ends, "base_time": self.base_time}


@dataclass
class SpecCheck:
    passed: bool
    margin: float
    margin_form11: float
    margin_form12: float | None

    def to_dict(self):
        return {"passed": self.passed, "margin": self.margin, "margin_form11": self.margin_form11,
                "margin_form12": self.margin_form12}


def specification_check(spec: NdsSpec, x: Point, segments: SpecSegments, eps: float) -> SpecCheck:
    """Evaluate the shadowing inequalities; margin is eps minus the worst distance.

    The segment form is always checked. When segments are given as time-1
    points the form comparing f_1^i x with f_1^i x_m is checked as well.
    """
    space = spec.space
    x = space.point(x)
    horizon = max(segments.ends)
    ox = orbit(spec, 1, horizon - 1, x)
    worst11 = 0.0
    for c, j, k in zip(segments.start_points(spec), segments.starts, segments.ends):
        oc = orbit(spec, j, k - j, c)
        for i in range(k - j + 1):
            worst11 = max(worst11, distance(space, ox[j + i - 1], oc[i]))
    m11 = eps - worst11
    m12 = None
    if segments.base_time == "one":
        worst12 = 0.0
        for p, j, k in zip(segments.points, segments.starts, segments.ends):
            op = orbit(spec, 1, k - 1, space.point(p))
            for i in range(j - 1, k):
                worst12 = max(worst12, distance(space, ox[i], op[i]))
        m12 = eps - worst12
    margin = m11 if m12 is None else min(m11, m12)
    return SpecCheck(margin >= 0, margin, m11, m12)


def _preimage_tree(spec, t0, steps, z):
    """All chains of ``steps`` preimages ending at z at time t0 + steps (branch order ascending)."""
    space = spec.space
    layer = [z]
    for t in range(t0 + steps - 1, t0 - 1, -1):
        nxt = []
        for w in layer:
            nxt.extend(spec.map_at(t).preimages(space, w))
        layer = nxt
    return layer


def specification_point(spec: NdsSpec, segments: SpecSegments, eps: float, N: int | None = None) -> Point:
    """A time-1 point whose orbit eps-shadows every segment.

    Backward induction: start at the last segment's base point; across each
    gap pull back with any branch until N steps remain, then search all
    N-step preimage chains for one landing within eps' = min(eps, rho)/2 of the
    previous segment's end point, and pull that back along the segment.
    The result is re-verified with specification_check.
    """
    if not spec.expanding:
        raise ParameterError("specification construction needs declared sigma and rho")
    space = spec.space
    eps_p = min(eps, spec.rho) / 2
    need = exactness_constant(spec, eps_p)
    if need is None:
        raise ConstructionError(f"no exactness constant found for delta={eps_p}")
    if N is None:
        N = need
    if N < need:
        raise ParameterError(f"gap bound N={N} is below the exactness constant {need} at {eps_p}")
    gaps = segments.gaps()
    for g_i, g in enumerate(gaps):
        if g < N:
            raise ParameterError(f"gap {g_i + 1} has length {g} < N={N}")
    starts = segments.start_points(spec)
    s = len(starts)
    z = starts[-1]
    for m in range(s - 2, -1, -1):
        j, k = segments.starts[m], segments.ends[m]
        c = starts[m]
        end = apply_segment(spec, j, k - j, c)
        g = segments.starts[m + 1] - k
        # free part of the gap: any branch
        for t in range(segments.starts[m + 1] - 1, k + N - 1, -1):
            z = spec.map_at(t).preimages(space, z)[0]
        cands = _preimage_tree(spec, k, N, z)
        dists = [distance(space, w, end) for w in cands]
        best = int(np.argmin(dists))
        if dists[best] > eps_p + 1e-12:
            raise ConstructionError(
                f"gap {m + 1}: no {N}-step preimage chain within {eps_p} of the segment end "
                f"(closest {dists[best]})", gap=m + 1)
        w = cands[best]
        z = pull_back(spec, j, c, k - j, w, rho=spec.rho).result if k > j else w
    for t in range(segments.starts[0] - 1, 0, -1):
        z = spec.map_at(t).preimages(space, z)[0]
    chk = specification_check(spec, z, segments, eps)
    if not chk.passed:
        raise ConstructionError(f"constructed point fails the re-check (margin {chk.margin})")
    return z


@dataclass
class FamilyReport:
    separation: SeparationReport
    N: int
    lower_bound: float
    validated: bool

    def to_dict(self):
        return {"N": self.N, "lower_bound": self.lower_bound, "validated": self.validated,
                "separation": self.separation.to_dict()}


def doubling_separated_family(spec: NdsSpec, x1: Point, y1: Point, eps: float, d: int,
                              N: int | None = None, workers: int = 1) -> FamilyReport:
    """2^(d+1) points that are (dN, eps)-separated, N the specification constant at eps/2.

    For each word over {x1, y1} of length d+1, a point whose orbit passes within
    eps/2 of the word's i-th letter at time iN + 1.
    """
    space = spec.space
    x1, y1 = space.point(x1), space.point(y1)
    if distance(space, x1, y1) <= 2 * eps:
        raise ParameterError("need d(x1, y1) > 2 eps")
    if d < 0:
        raise ParameterError("depth must be >= 0")
    if N is None:
        N = specification_constant(spec, eps / 2)
        if N is None:
            raise ConstructionError("no specification constant found")
    N = max(N, 1)
    times = [i * N + 1 for i in range(d + 1)]
    words = list(itertools.product((x1, y1), repeat=d + 1))

    def build(word):
        return specification_point(spec, SpecSegments(list(word), times, times, "start"), eps / 2, N)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            pts = list(ex.map(build, words))
    else:
        pts = [build(w) for w in words]
    P = space.to_batch(pts)
    rep = SeparationReport(1, d * N, eps, "separated", np.arange(len(pts)), P,
                           {"kind": "specification_family", "size": len(pts), "N": N, "d": d})
    ok = validate_separated(spec, rep)
    return FamilyReport(rep, N, math.log(2) / N, ok)


def mixing_specification_check(spec: NdsSpec, segments: SpecSegments, eps: float) -> Report:
    """Empirical check that a mixing sequence has specification.

    Only runs where an exactness constant is available; otherwise reports the
    check as unsupported.
    """
    rep = Report("mixing_specification", tolerance=eps)
    try:
        x = specification_point(spec, segments, eps)
    except (UnsupportedOperation, ParameterError) as exc:
        rep.notes.append(f"unsupported: {exc}")
        return rep
    except ConstructionError as exc:
        rep.fail(str(exc))
        return rep
    rep.value = specification_check(spec, x, segments, eps).margin
    return rep
