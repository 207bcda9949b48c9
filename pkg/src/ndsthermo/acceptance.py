"""Desk-scale acceptance checks against exact oracles.

Each criterion returns a Report; ``run_all`` evaluates a selection in order.
"""

from __future__ import annotations

import math

import numpy as np

from . import entropy as ent
from . import expanding as exp
from . import pressure as pr
from .reporting import Report, dumps
from .systems import (
    GOLDEN_MEAN,
    doubling,
    golden_mean_shift,
    kolyada_snoha,
    pomeau_manneville_schedule,
    torus_linear,
    wrap_unit,
)

LOG2 = math.log(2.0)
LOG_PHI = math.log((1 + math.sqrt(5)) / 2)


def _check(rep: Report, ok: bool, message: str):
    if not ok:
        rep.fail(message)


def crit_doubling_entropy(workers: int = 1, seed: int = 0) -> Report:
    eps = 2.0 ** -5
    r = ent.entropy_estimate(doubling(), 1, eps, range(4, 15), workers=workers)
    rep = Report("doubling entropy", value=r.estimate, tolerance=0.05)
    _check(rep, abs(r.estimate - LOG2) <= 0.05, f"estimate {r.estimate} not within 0.05 of log 2")
    # exact separated count on the circle: 2^(n+5) - 1; grid counts must not exceed it
    for n, c in zip(r.series.ns, r.series.values):
        _check(rep, c <= 2 ** (n + 5) - 1, f"grid count {c} exceeds the exact count at n={n}")
    rep.details = r.to_dict()
    return rep


def crit_golden_mean_words(workers: int = 1, seed: int = 0) -> Report:
    L = 64
    count = ent.sft_word_count(GOLDEN_MEAN, L)
    rate = math.log(count) / L
    rep = Report("golden-mean word counts", value=rate, tolerance=1e-3)
    _check(rep, abs(rate - LOG_PHI) <= 1e-3,
           f"(1/{L}) log count = {rate} differs from log phi = {LOG_PHI} by {abs(rate - LOG_PHI):.3g} > 1e-3")
    rep.details = {"L": L, "count": str(count), "rate": rate, "log_phi": LOG_PHI,
                   "ratio_rate": math.log(ent.sft_word_count(GOLDEN_MEAN, L + 1) / count),
                   "spectral_radius_log": math.log(ent.spectral_radius(GOLDEN_MEAN))}
    rep.notes.append("count(L) = F(L+2) ~ 1.17 phi^L, so (1/L) log count carries log(1.17)/L ~ 2.5e-3 at L = 64")
    return rep


def crit_pressure_identities(workers: int = 1, seed: int = 0) -> Report:
    spec, eps, ns, c = doubling(), 1 / 16, range(4, 13), 0.5
    e = ent.entropy_estimate(spec, 1, eps, ns, workers=workers)
    p0 = pr.pressure_estimate(spec, pr.Constant(0.0), eps, ns, workers=workers)
    pc = pr.pressure_estimate(spec, pr.Constant(c), eps, ns, workers=workers)
    rep = Report("pressure identities", value=[p0.estimate, pc.estimate - p0.estimate], tolerance=0.0)
    _check(rep, p0.estimate == e.slope, f"P(0) estimate {p0.estimate} != entropy estimate {e.slope}")
    part_dev = max(abs((b - a) - n * c) for n, a, b in zip(ns, p0.values, pc.values))
    est_dev = abs((pc.estimate - p0.estimate) - c)
    _check(rep, part_dev <= 1e-9, f"p_n(c) - p_n(0) deviates from n c by {part_dev}")
    _check(rep, est_dev <= 1e-9, f"P(c) - P(0) deviates from c by {est_dev}")
    rep.details = {"entropy": e.slope, "p0": p0.estimate, "pc": pc.estimate, "c": c,
                   "partition_deviation": part_dev, "estimate_deviation": est_dev}
    rep.notes.append("identities compared up to double rounding (1e-9)")
    return rep


def crit_sft_pressure(workers: int = 1, seed: int = 0) -> Report:
    v = (0.3, -0.2)
    r = pr.pressure_estimate(golden_mean_shift(), pr.SymbolLetter(v), 2.0 ** -3, range(1, 17), workers=workers)
    oracle = pr.sft_transfer_pressure(GOLDEN_MEAN, v)
    rep = Report("SFT pressure vs transfer matrix", value=r.estimate, tolerance=0.02)
    _check(rep, abs(r.estimate - oracle) <= 0.02, f"estimate {r.estimate} vs oracle {oracle}")
    rep.details = {"estimate": r.estimate, "oracle": oracle, "report": r.to_dict()}
    return rep


def crit_shadowing(workers: int = 1, seed: int = 0) -> Report:
    spec = doubling()
    pseudo = exp.random_pseudo_orbit(spec, 0.3, 1000, 0.04, seed=seed)
    eps = 0.1
    a = exp.shadow(spec, pseudo, eps)
    b = exp.shadow(spec, pseudo, eps, terminal=wrap_unit(pseudo.points[-1] + 0.07))
    bound = eps / spec.sigma
    rep = Report("shadowing bound", value=a.max_error, tolerance=bound)
    _check(rep, all(e <= bound for e in a.errors), f"max error {a.max_error} exceeds {bound}")
    diff = abs(a.point - b.point)
    _check(rep, diff <= 1e-10, f"reconstructions differ by {diff}")
    rep.details = {"max_error": a.max_error, "bound": bound, "uniqueness_gap": diff,
                   "step_residual": a.step_residual, "point": a.point}
    return rep


def crit_ball_image(workers: int = 1, seed: int = 0) -> Report:
    rep = Report("dynamical-ball image identity", tolerance=0)
    runs = {
        "doubling": exp.ball_image_check(doubling(), 0.1, 1, 2, 0.1, samples=10_000, seed=seed),
        "torus": exp.ball_image_check(torus_linear(), (0.2, 0.3), 1, 3, 0.1, samples=10_000, seed=seed),
    }
    total = 0
    for name, r in runs.items():
        total += r.value
        for f in r.failures:
            rep.fail(f"{name}: {f}")
    rep.value = total
    rep.details = {k: r.details for k, r in runs.items()}
    return rep


def crit_exactness(workers: int = 1, seed: int = 0) -> Report:
    n2 = exp.exactness_constant(doubling(2), 1 / 8)
    n3 = exp.exactness_constant(doubling(3), 1 / 6)
    npm = exp.exactness_constant(pomeau_manneville_schedule(), 0.1)
    rep = Report("exactness constants", value=[n2, n3, npm])
    _check(rep, n2 == 2, f"N(1/8) for degree 2 is {n2}, expected 2")
    _check(rep, n3 == 1, f"N(1/6) for degree 3 is {n3}, expected 1")
    _check(rep, npm is not None, "no exactness constant found for the Pomeau-Manneville schedule")
    rep.details = {"degree2": n2, "degree3": n3, "pomeau_manneville": npm}
    return rep


def crit_specification(workers: int = 1, seed: int = 0) -> Report:
    spec = doubling()
    segs = exp.SpecSegments([0.2, 0.7], [1, 4], [1, 4])
    x = exp.specification_point(spec, segs, 0.3, N=2)
    chk = exp.specification_check(spec, x, segs, 0.3)
    eps = 0.1
    fam = exp.doubling_separated_family(spec, 0.1, 0.6, eps, 6, workers=workers)
    h = ent.entropy_estimate(spec, 1, eps, range(4, 13), workers=workers).estimate
    rep = Report("specification construction", value=fam.lower_bound)
    _check(rep, chk.margin >= 0, f"specification point margin {chk.margin} < 0")
    _check(rep, fam.separation.cardinality == 128, f"family has {fam.separation.cardinality} points")
    _check(rep, fam.validated, "family fails the separated re-check")
    _check(rep, fam.lower_bound <= h + 0.05, f"lower bound {fam.lower_bound} exceeds estimate {h} + 0.05")
    rep.details = {"point": x, "margin": chk.margin, "family_N": fam.N, "family_size": fam.separation.cardinality,
                   "lower_bound": fam.lower_bound, "entropy_estimate": h,
                   "family_points": fam.separation.points.ravel().tolist()}
    return rep


def crit_entropy_point(workers: int = 1, seed: int = 0) -> Report:
    rep = Report("entropy points", tolerance=0.05)
    gaps = {}
    for x0 in (0.0, 0.3, 0.7):
        local, glob = ent.entropy_point_probe(doubling(), x0, 0.05, 1 / 16, range(4, 13), workers=workers)
        gaps[x0] = abs(local.estimate - glob.estimate)
        _check(rep, gaps[x0] <= 0.05, f"x0={x0}: local {local.estimate} vs global {glob.estimate}")
    rep.value = max(gaps.values())
    rep.details = {str(k): v for k, v in gaps.items()}
    return rep


def crit_zero_entropy(workers: int = 1, seed: int = 0) -> Report:
    spec, eps, ns = kolyada_snoha(), 1 / 32, range(1, 21)
    per_k = {k: ent.entropy_estimate(spec, k, eps, ns, workers=workers).estimate for k in (1, 3, 5)}
    asym = ent.asymptotic_entropy_estimate(spec, eps, [1, 3, 5], ns, workers=workers)
    rep = Report("zero-entropy sequence", value=max(per_k.values()), tolerance=0.02)
    for k, v in per_k.items():
        _check(rep, v <= 0.02, f"k={k}: estimate {v} > 0.02")
    _check(rep, all(v <= 0.02 for v in asym.profile), f"asymptotic profile {asym.profile} exceeds 0.02")
    _check(rep, not asym.chaotic, "sequence reported as topologically chaotic")
    rep.details = {"per_k": {str(k): v for k, v in per_k.items()}, "profile": asym.profile,
                   "chaotic": asym.chaotic}
    rep.notes.append("specification forces positive entropy, so a zero-entropy sequence has no specification")
    return rep


def crit_scale_stability(workers: int = 1, seed: int = 0) -> Report:
    rep = Report("scale stability", tolerance=0.05)
    vals = {}
    for name, psi in (("zero", pr.Constant(0.0)), ("smooth_circle", pr.SmoothCircle(0.5))):
        r = pr.scale_stability_check(doubling(), psi, [0.1, 0.05, 0.025], range(4, 13), workers=workers)
        vals[name] = r.value
        for f in r.failures:
            rep.fail(f"{name}: {f}")
    rep.value = vals
    return rep


def crit_pressure_regularity(workers: int = 1, seed: int = 0) -> Report:
    spec = golden_mean_shift()
    v = (0.3, -0.2)
    psi = pr.SymbolLetter(v)
    ts = [-2, -1, 0, 1, 2]
    curve = pr.pressure_curve(spec, psi, ts, 2.0 ** -3, range(1, 17), workers=workers)
    rep = Report("pressure-function regularity", tolerance=0.02)
    for f in curve.failures:
        rep.fail(f)
    oracle = [pr.sft_transfer_pressure(GOLDEN_MEAN, [t * a for a in v]) for t in ts]
    for t, p, o in zip(ts, curve.value, oracle):
        _check(rep, abs(p - o) <= 0.02, f"t={t}: estimate {p} vs oracle {o}")
    rng = np.random.default_rng(seed)
    pairs = [(pr.SymbolLetter(rng.uniform(-1, 1, 2)), pr.SymbolLetter(rng.uniform(-1, 1, 2))) for _ in range(100)]
    lip = pr.partition_lipschitz_check(spec, pairs, 2.0 ** -3, 12)
    for f in lip.failures:
        rep.fail(f"lipschitz: {f}")
    rep.value = curve.value
    rep.details = {"t": ts, "estimates": curve.value, "oracle": oracle,
                   "convexity_violations": curve.details["convexity_violations"],
                   "lipschitz_worst_margin": lip.value}
    return rep


def crit_ubv(workers: int = 1, seed: int = 0) -> Report:
    prof = pr.variation_profile(doubling(), pr.HolderPower(1.0, 1.0, 0.0), 0.1, range(1, 21), seed=seed)
    rep = Report("uniform bounded variation", value=max(prof.variations), tolerance=prof.bound)
    _check(rep, bool(prof.within_bound), f"variations {max(prof.variations)} exceed {prof.bound}")
    rep.details = prof.to_dict()
    return rep


def crit_determinism(workers: int = 1, seed: int = 0) -> Report:
    rep = Report("determinism across worker counts")
    same = {}
    for num, fn in ((1, crit_doubling_entropy), (5, crit_shadowing), (8, crit_specification)):
        a = dumps(fn(workers=1, seed=seed))
        b = dumps(fn(workers=8, seed=seed))
        same[num] = a == b
        _check(rep, a == b, f"criterion {num} differs between 1 and 8 workers")
    rep.value = same
    return rep


CRITERIA = [
    (1, crit_doubling_entropy),
    (2, crit_golden_mean_words),
    (3, crit_pressure_identities),
    (4, crit_sft_pressure),
    (5, crit_shadowing),
    (6, crit_ball_image),
    (7, crit_exactness),
    (8, crit_specification),
    (9, crit_entropy_point),
    (10, crit_zero_entropy),
    (11, crit_scale_stability),
    (12, crit_pressure_regularity),
    (13, crit_ubv),
    (14, crit_determinism),
]


def run_all(selection=None, workers: int = 1, seed: int = 0) -> list:
    out = []
    for num, fn in CRITERIA:
        if selection is None or num in selection:
            out.append((num, fn(workers=workers, seed=seed)))
    return out
