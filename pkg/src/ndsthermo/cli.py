"""Command-line entry point: ``nds-thermo --config experiment.json --out DIR``.

Exit status: 0 success, 1 a check failed, 2 invalid configuration or
parameters (including unwritable output paths).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from importlib import resources

import jsonschema

from . import acceptance
from . import entropy as ent
from . import expanding as exp
from . import pressure as pr
from .errors import NdsError, ParameterError
from .reporting import Report, dumps, emit_plot_data, jsonable, rows_to_csv
from .systems import NdsSpec, certified_constants, spec_from_dict

EXIT_OK, EXIT_CHECK, EXIT_PARAM = 0, 1, 2


def load_schema() -> dict:
    text = resources.files("ndsthermo").joinpath("data/experiment.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer"}
_n_range = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2}
_potential = {"type": "object", "required": ["type"]}
_expect = {"type": "object", "additionalProperties": False, "required": ["value", "tolerance"],
           "properties": {"value": _num, "tolerance": _pos}}


def _obj(required, **props):
    return {"type": "object", "additionalProperties": False, "required": list(required), "properties": props}


PARAM_SCHEMAS = {
    "entropy": _obj(["epsilon", "n_range"], epsilon=_pos, n_range=_n_range, k={"type": "integer", "minimum": 1},
                    grid_h=_pos, expect=_expect),
    "asymptotic": _obj(["epsilon", "k_list", "n_range"], epsilon=_pos, n_range=_n_range,
                       k_list={"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                       threshold=_num, grid_h=_pos),
    "entropy-point": _obj(["x0", "radius", "epsilon", "n_range"], x0={}, radius=_pos, epsilon=_pos,
                          n_range=_n_range, tolerance=_pos),
    "shadow": _obj(["epsilon", "pseudo_orbit"], epsilon=_pos, sigma=_num, rho=_pos,
                   pseudo_orbit={"type": "object", "additionalProperties": False, "required": ["delta"],
                                 "properties": {"delta": _pos, "points": {"type": "array"},
                                                "x1": {}, "length": {"type": "integer", "minimum": 2}}}),
    "specify": _obj(["epsilon", "segments"], epsilon=_pos, N={"type": "integer", "minimum": 0},
                    segments={"type": "object", "additionalProperties": False,
                              "required": ["points", "starts", "ends"],
                              "properties": {"points": {"type": "array"},
                                             "starts": {"type": "array", "items": _int},
                                             "ends": {"type": "array", "items": _int},
                                             "base_time": {"enum": ["start", "one"]}}}),
    "exactness": _obj(["delta"], delta=_pos, horizon={"type": "integer", "minimum": 0},
                      K={"type": "integer", "minimum": 1}, expect=_expect),
    "pressure": _obj(["potential", "epsilon", "n_range"], potential=_potential, epsilon=_pos, n_range=_n_range,
                     mode={"enum": list(pr.MODES)}, expect=_expect),
    "pressure-curve": _obj(["potential", "t_grid", "epsilon", "n_range"], potential=_potential,
                           t_grid={"type": "array", "items": _num, "minItems": 5}, epsilon=_pos,
                           n_range=_n_range, mode={"enum": list(pr.MODES)}, tolerance=_pos),
    "properties": _obj(["potential", "phi", "epsilon", "n"], potential=_potential, phi=_potential, epsilon=_pos,
                       n={"type": "integer", "minimum": 1}, t_grid={"type": "array", "items": _num}, c=_num),
    "scale-stability": _obj(["potential", "eps_list", "n_range"], potential=_potential,
                            eps_list={"type": "array", "items": _pos, "minItems": 2}, n_range=_n_range,
                            tolerance=_pos),
    "zoo-acceptance": _obj([], criteria={"type": "array", "items": {"type": "integer", "minimum": 1,
                                                                        "maximum": 14}}),
}


class ConfigError(Exception):
    pass


def _describe(err: jsonschema.ValidationError, prefix: str = "") -> str:
    # for oneOf, report the branch whose "kind"/"type" tag matched
    while err.context:
        branches = {}
        for sub in err.context:
            branches.setdefault(sub.schema_path[0], []).append(sub)
        tagged = [errs for errs in branches.values()
                  if not any(e.validator in ("const", "enum") and list(e.relative_path)[-1:] in (["kind"], ["type"])
                             for e in errs)]
        if not tagged and isinstance(err.instance, dict):
            tag = "kind" if "kind" in err.instance else "type"
            if tag in err.instance:
                path = prefix + "".join(f"/{p}" for p in err.absolute_path)
                return f"{path}/{tag}: unsupported value {err.instance[tag]!r}"
        err = jsonschema.exceptions.best_match(tagged[0] if len(tagged) == 1 else err.context)
    path = prefix + "".join(f"/{p}" for p in err.absolute_path)
    return f"{path or '(top level)'}: {err.message}"


def validate_config(cfg: dict) -> None:
    """Schema-check the whole config, then the parameters of its command."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(_describe(e) for e in errors[:10]))
    params = cfg.get("params", {})
    perr = sorted(jsonschema.Draft202012Validator(PARAM_SCHEMAS[cfg["command"]]).iter_errors(params),
                  key=lambda e: list(e.absolute_path))
    if perr:
        raise ConfigError("; ".join(_describe(e, "/params") for e in perr[:10]))


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    validate_config(cfg)
    return cfg


def build_spec(data: dict) -> NdsSpec:
    """Spec from JSON; certified constants are filled in when none are declared."""
    spec = spec_from_dict(data)
    if spec.sigma is None:
        try:
            sig, rho = certified_constants(spec)
            spec = NdsSpec(spec.space, spec.schedule, sig, rho)
        except ParameterError:
            pass
    return spec


def _ns(pair):
    lo, hi = pair
    if hi < lo:
        raise ParameterError("n_range must be [low, high] with low <= high")
    return list(range(lo, hi + 1))


def _grid(spec, params):
    if "grid_h" not in params:
        return None
    from .metrics import CandidateGrid

    return CandidateGrid.uniform(spec.space, params["grid_h"])


def _expect(rep: Report, value, params):
    e = params.get("expect")
    if e is not None and abs(value - e["value"]) > e["tolerance"]:
        rep.fail(f"value {value} not within {e['tolerance']} of expected {e['value']}")


def _log_rows(series):
    return [(n, math.log(v)) for n, v in series.pairs()]


# each runner returns (Report, csv header, csv rows, plot rows, plot header)


def run_entropy(spec, p, workers, seed):
    r = ent.entropy_estimate(spec, p.get("k", 1), p["epsilon"], _ns(p["n_range"]), _grid(spec, p), workers=workers)
    rep = Report("entropy", value=r.estimate, details=r.to_dict())
    _expect(rep, r.estimate, p)
    rows = r.series.csv_rows() + r.cross_series.csv_rows()
    return rep, ent.CSV_HEADER, rows, _log_rows(r.series), "n log(separated count)"


def run_asymptotic(spec, p, workers, seed):
    a = ent.asymptotic_entropy_estimate(spec, p["epsilon"], p["k_list"], _ns(p["n_range"]), _grid(spec, p),
                                        threshold=p.get("threshold", ent.CHAOS_THRESHOLD), workers=workers)
    rep = Report("asymptotic", value=a.value, details=a.to_dict())
    rows = [row for r in a.reports for row in r.series.csv_rows()]
    return rep, ent.CSV_HEADER, rows, list(zip(a.k_list, a.profile)), "k entropy_estimate"


def run_entropy_point(spec, p, workers, seed):
    local, glob = ent.entropy_point_probe(spec, p["x0"], p["radius"], p["epsilon"], _ns(p["n_range"]),
                                          workers=workers)
    gap = abs(local.estimate - glob.estimate)
    rep = Report("entropy-point", value=gap, tolerance=p.get("tolerance"),
                 details={"local": local.to_dict(), "global": glob.to_dict()})
    if "tolerance" in p and gap > p["tolerance"]:
        rep.fail(f"local and global estimates differ by {gap} > {p['tolerance']}")
    rows = [(r.k, n, r.eps, f"{r.mode}-{tag}", v) for tag, r in (("local", local), ("global", glob))
            for n, v in r.series.pairs()]
    return rep, ent.CSV_HEADER, rows, _log_rows(local.series), "n log(local separated count)"


def run_shadow(spec, p, workers, seed):
    po = p["pseudo_orbit"]
    if "points" in po:
        pseudo = exp.PseudoOrbit([spec.space.point(x) for x in po["points"]], po["delta"])
    elif "x1" in po and "length" in po:
        pseudo = exp.random_pseudo_orbit(spec, po["x1"], po["length"], po["delta"], seed=seed)
    else:
        raise ParameterError("pseudo_orbit needs either points or x1 and length")
    res = exp.shadow(spec, pseudo, p["epsilon"], p.get("sigma"), p.get("rho"))
    rep = Report("shadow", value=res.max_error, tolerance=res.bound, details=res.to_dict())
    if res.max_error > res.bound:
        rep.fail(f"shadowing error {res.max_error} exceeds {res.bound}")
    rows = [(i, jsonable(x), g if g is not None else "", e) for i, x, g, e in res.trace_rows(spec, pseudo)]
    return rep, ["i", "x_i", "gap", "shadow_error"], rows, [(r[0], r[3]) for r in rows], "i shadow_error"


def run_specify(spec, p, workers, seed):
    s = p["segments"]
    pts = [tuple(x) if isinstance(x, list) else x for x in s["points"]]
    segs = exp.SpecSegments(pts, s["starts"], s["ends"], s.get("base_time", "start"))
    x = exp.specification_point(spec, segs, p["epsilon"], p.get("N"))
    chk = exp.specification_check(spec, x, segs, p["epsilon"])
    rep = Report("specify", value=chk.margin, tolerance=p["epsilon"],
                 details={"point": x, "check": chk.to_dict(), "segments": segs.to_dict()})
    if not chk.passed:
        rep.fail(f"specification check failed with margin {chk.margin}")
    rows = [(m + 1, j, k) for m, (j, k) in enumerate(zip(segs.starts, segs.ends))]
    return rep, ["segment", "start", "end"], rows, [(0, chk.margin)], "index margin"


def run_exactness(spec, p, workers, seed):
    N = exp.exactness_constant(spec, p["delta"], p.get("horizon", 64), p.get("K"))
    rep = Report("exactness", value=N, details={"delta": p["delta"], "N": N})
    if N is None:
        rep.fail("no exactness constant within the horizon")
    else:
        _expect(rep, N, p)
    return rep, ["delta", "N"], [(p["delta"], "" if N is None else N)], [(p["delta"], -1 if N is None else N)], \
        "delta N"


def run_pressure(spec, p, workers, seed):
    psi = pr.potential_from_dict(p["potential"])
    r = pr.pressure_estimate(spec, psi, p["epsilon"], _ns(p["n_range"]), p.get("mode", "separated"),
                             workers=workers)
    rep = Report("pressure", value=r.estimate, details=r.to_dict())
    _expect(rep, r.estimate, p)
    return rep, pr.CSV_HEADER, r.csv_rows(1.0), list(zip(r.ns, r.values)), "n log_partition"


def run_pressure_curve(spec, p, workers, seed):
    psi = pr.potential_from_dict(p["potential"])
    rep = pr.pressure_curve(spec, psi, p["t_grid"], p["epsilon"], _ns(p["n_range"]), p.get("mode", "separated"),
                            tol=p.get("tolerance", pr.CURVE_TOL), workers=workers)
    rows = []
    for t, r in zip(rep.details["t"], rep.details["reports"]):
        rows.extend((r["mode"], r["epsilon"], n, t, v) for n, v in zip(r["n"], r["values"]))
    return rep, pr.CSV_HEADER, rows, list(zip(rep.details["t"], rep.details["estimates"])), "t pressure_estimate"


def run_properties(spec, p, workers, seed):
    psi = pr.potential_from_dict(p["potential"])
    phi = pr.potential_from_dict(p["phi"])
    kw = {}
    if "t_grid" in p:
        kw["t_grid"] = p["t_grid"]
    if "c" in p:
        kw["c"] = p["c"]
    rep = pr.pressure_property_suite(spec, psi, phi, p["epsilon"], p["n"], **kw)
    margins = rep.details["margins"]
    rows = [(k, v) for k, v in sorted(margins.items())]
    return rep, ["check", "margin"], rows, list(zip(rep.details["t_grid"], rep.details["curve"])), "t p_n(t psi)"


def run_scale_stability(spec, p, workers, seed):
    psi = pr.potential_from_dict(p["potential"])
    rep = pr.scale_stability_check(spec, psi, p["eps_list"], _ns(p["n_range"]), p.get("tolerance", 0.05),
                                   workers=workers)
    rows = []
    for r in rep.details["reports"]:
        rows.extend((r["mode"], r["epsilon"], n, 1.0, v) for n, v in zip(r["n"], r["values"]))
    return rep, pr.CSV_HEADER, rows, list(zip(rep.details["epsilon"], rep.details["estimates"])), \
        "epsilon pressure_estimate"


def run_zoo(spec, p, workers, seed):
    sel = p.get("criteria")
    results = acceptance.run_all(set(sel) if sel else None, workers=workers, seed=seed)
    rep = Report("zoo-acceptance")
    for num, r in results:
        if not r.passed:
            rep.fail(f"criterion {num} ({r.name}): " + "; ".join(r.failures))
    rep.details = {str(num): r.to_dict() for num, r in results}
    rep.value = {str(num): r.passed for num, r in results}
    rows = [(num, r.name, int(r.passed)) for num, r in results]
    return rep, ["criterion", "name", "passed"], rows, [(num, int(r.passed)) for num, r in results], \
        "criterion passed"


RUNNERS = {
    "entropy": run_entropy,
    "asymptotic": run_asymptotic,
    "entropy-point": run_entropy_point,
    "shadow": run_shadow,
    "specify": run_specify,
    "exactness": run_exactness,
    "pressure": run_pressure,
    "pressure-curve": run_pressure_curve,
    "properties": run_properties,
    "scale-stability": run_scale_stability,
    "zoo-acceptance": run_zoo,
}


def run(cfg: dict, out_dir: str, workers: int | None = None, seed: int | None = None) -> int:
    """Execute a validated config and write report.json, series.csv and plot.dat."""
    workers = workers or cfg.get("workers", 1)
    seed = cfg.get("seed", 0) if seed is None else seed
    command = cfg["command"]
    spec = build_spec(cfg["spec"]) if "spec" in cfg else None
    rep, header, rows, plot, plot_header = RUNNERS[command](spec, cfg.get("params", {}), workers, seed)
    os.makedirs(out_dir, exist_ok=True)
    payload = {"command": command, "seed": seed, "report": rep}
    if spec is not None:
        payload["spec"] = spec.to_dict()
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(dumps(payload))
    with open(os.path.join(out_dir, "series.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(header, rows))
    emit_plot_data(plot, os.path.join(out_dir, "plot.dat"), f"{command}: {plot_header}")
    return EXIT_OK if rep.passed else EXIT_CHECK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="nds-thermo", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="experiment JSON file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--workers", type=int, default=None, help="worker threads (results do not depend on it)")
    ap.add_argument("--seed", type=int, default=None, help="seed for sampled inputs")
    args = ap.parse_args(argv)
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_PARAM
    if args.seed is not None and not (0 <= args.seed < 2 ** 64):
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_PARAM
    try:
        cfg = load_config(args.config)
        status = run(cfg, args.out, args.workers, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except (NdsError, ValueError, TypeError, KeyError) as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    status_text = {EXIT_OK: "ok", EXIT_CHECK: "check failed"}[status]
    print(f"{cfg['command']}: {status_text}; outputs in {args.out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
