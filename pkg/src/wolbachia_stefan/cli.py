"""Command-line front end.

    wolbachia-stefan {simulate,sweep,eigen,speed,threshold,ode} --config CFG --out DIR [--parallelism N]

Exit status: 0 on success, 2 for configuration/domain problems (bad values,
missing bracket, horizon too short, grid too coarse), 3 for numerical
failures inside a solver.
"""

import argparse
import copy
import csv
import hashlib
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .eigen import (EigenProblem, effective_potential, find_d1_star, find_h_star,
                    find_mu_threshold, principal_eigen)
from .errors import (BracketError, DomainError, HorizonError, NumericalFailure,
                     ResolutionError, ValidationError)
from .model import BirthRateField, load_model_config, model_config_dict
from .ode import (CompartmentState, OdeParams, integrate_compartments, integrate_uv,
                  reduction_report)
from .pde import (SCHEME_VERSION, SERIES_COLUMNS, Grid, Outcome, StopRules, measure_speed,
                  run, solve_stationary_v)
from .semiwave import SemiWaveProblem, solve_beta0, speed_bracket

log = logging.getLogger("wolbachia_stefan")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
MODEL_KEYS = {"params", "b1", "b2", "init"}
SECTIONS = {"grid", "run", "eigen", "speed", "threshold", "ode", "sweep"}
RUN_KEYS = {"horizon", "sample_every", "h_stop", "u_extinct", "tail_fraction"}


# -- config helpers ------------------------------------------------------------

def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError("config", f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError("config", f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("config", "top level must be a JSON object")
    extra = sorted(set(data) - MODEL_KEYS - SECTIONS)
    if extra:
        raise ValidationError(extra[0], "unknown top-level key")
    return data


def _section(data, name, allowed):
    sec = data.get(name, {}) or {}
    if not isinstance(sec, dict):
        raise ValidationError(name, "expected a JSON object")
    extra = sorted(set(sec) - set(allowed))
    if extra:
        raise ValidationError(f"{name}.{extra[0]}", "unknown key")
    return sec


def _model(data):
    return load_model_config({k: v for k, v in data.items() if k in MODEL_KEYS})


def _run_settings(data):
    sec = _section(data, "run", RUN_KEYS)
    horizon = float(sec.get("horizon", 10.0))
    if not (horizon > 0):
        raise ValidationError("run.horizon", f"must be > 0, got {horizon}")
    stop = StopRules(h_stop=sec.get("h_stop"), u_extinct=sec.get("u_extinct"))
    return horizon, sec.get("sample_every"), stop, float(sec.get("tail_fraction", 0.5))


def content_hash(payload):
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def fmt(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(c) for c in row])


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


# -- simulate -------------------------------------------------------------------

def simulate_config(data):
    """Run one simulation from a parsed config; returns (result, manifest, speed)."""
    params, init = _model(data)
    grid = Grid.from_dict(_section(data, "grid", {"n_u", "n_v", "xmax", "dt", "dt_max", "safety"}))
    grid = grid.resolve(params)
    horizon, sample_every, stop, tail = _run_settings(data)
    result = run(params, init, grid, horizon=horizon, stop_rules=stop, sample_every=sample_every)
    speed = measure_speed(result, tail) if result.classification == Outcome.SPREADING else None
    resolved = model_config_dict(params, init)
    resolved["grid"] = grid.to_dict()
    resolved["run"] = {"horizon": horizon, "sample_every": sample_every,
                       "h_stop": stop.h_stop, "u_extinct": stop.u_extinct, "tail_fraction": tail}
    diag = dict(result.diagnostics)
    wall = diag.pop("wall_time_s")
    manifest = {
        "command": "simulate",
        "config": resolved,
        "scheme_version": SCHEME_VERSION,
        "package_version": __version__,
        "content_hash": content_hash({"config": resolved, "scheme": SCHEME_VERSION}),
        "classification": str(result.classification),
        "measured_speed": speed,
        "Lambda": result.Lambda,
        "diagnostics": diag,
        "far_field": "zero-flux at xmax",
        "wall_time_s": wall,
    }
    return result, manifest, speed


def cmd_simulate(config_path, out_dir):
    data = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result, manifest, _ = simulate_config(data)
    write_csv(out / "series.csv", SERIES_COLUMNS, result.series.rows())
    write_json(out / "manifest.json", manifest)
    log.info("simulate: %s, h(T)=%.6g", manifest["classification"], result.diagnostics["final_h"])
    return EXIT_OK


# -- sweep ----------------------------------------------------------------------

def sweep_values(sweep_cfg):
    vals = sweep_cfg.get("values")
    if vals is None:
        raise ValidationError("sweep.values", "missing")
    if isinstance(vals, dict):
        extra = sorted(set(vals) - {"lo", "hi", "count", "spacing"})
        if extra:
            raise ValidationError(f"sweep.values.{extra[0]}", "unknown key")
        lo, hi, count = vals.get("lo"), vals.get("hi"), vals.get("count")
        spacing = vals.get("spacing", "linear")
        if lo is None or hi is None or not isinstance(count, int) or count < 1:
            raise ValidationError("sweep.values", "need lo, hi and an integer count >= 1")
        if spacing == "log":
            if lo <= 0 or hi <= 0:
                raise ValidationError("sweep.values", "log spacing needs lo, hi > 0")
            vals = np.geomspace(lo, hi, count).tolist()
        elif spacing == "linear":
            vals = np.linspace(lo, hi, count).tolist()
        else:
            raise ValidationError("sweep.values.spacing", f"must be linear or log, got {spacing!r}")
    if not isinstance(vals, list) or not vals:
        raise ValidationError("sweep.values", "must be a nonempty list")
    return [float(v) for v in vals]


def set_path(config, path, value):
    keys = path.split(".")
    node = config
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ValidationError("sweep.axis", f"{path!r} does not address a config entry")
    node[keys[-1]] = value


def _sweep_worker(job):
    index, axis, value, config, run_dir = job
    row = {"index": index, "axis_value": value, "classification": "Failed",
           "h_final": None, "measured_speed": None}
    try:
        result, manifest, speed = simulate_config(config)
        row.update(classification=str(result.classification),
                   h_final=result.diagnostics["final_h"], measured_speed=speed)
    except Exception as exc:  # noqa: BLE001 - recorded per row
        manifest = {"command": "simulate", "config": config, "scheme_version": SCHEME_VERSION,
                    "classification": "Failed", "error": f"{type(exc).__name__}: {exc}"}
    manifest["sweep"] = {"axis": axis, "value": value, "index": index}
    write_json(Path(run_dir) / f"run_{index:04d}.json", manifest)
    return row


def cmd_sweep(config_path, out_dir, parallelism=1):
    data = load_config(config_path)
    sweep_cfg = _section(data, "sweep", {"axis", "values", "base"})
    axis = sweep_cfg.get("axis")
    if not isinstance(axis, str) or not axis:
        raise ValidationError("sweep.axis", "must be a parameter path such as 'params.h0'")
    values = sweep_values(sweep_cfg)
    base = sweep_cfg.get("base")
    if base is None:
        base = {k: v for k, v in data.items() if k != "sweep"}
    if not isinstance(base, dict):
        raise ValidationError("sweep.base", "expected a JSON object")
    # validate the base once so typos fail fast instead of per row
    probe = copy.deepcopy(base)
    set_path(probe, axis, values[0])
    _model(probe)
    if not (isinstance(parallelism, int) and parallelism >= 1):
        raise ValidationError("parallelism", f"must be an integer >= 1, got {parallelism!r}")

    out = Path(out_dir)
    run_dir = out / "runs"
    run_dir.mkdir(parents=True, exist_ok=True)
    order = sorted(range(len(values)), key=lambda i: (values[i], i))
    jobs = []
    for rank, i in enumerate(order):
        cfg = copy.deepcopy(base)
        set_path(cfg, axis, values[i])
        jobs.append((rank, axis, values[i], cfg, str(run_dir)))
    if parallelism == 1:
        rows = [_sweep_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            rows = list(pool.map(_sweep_worker, jobs))
    rows.sort(key=lambda r: r["index"])
    write_csv(out / "sweep.csv", ("axis_value", "classification", "h_final", "measured_speed"),
              ([r["axis_value"], r["classification"], r["h_final"], r["measured_speed"]] for r in rows))
    write_json(out / "sweep_manifest.json", {
        "command": "sweep", "axis": axis, "values": [values[i] for i in order],
        "base": base, "scheme_version": SCHEME_VERSION,
        "content_hash": content_hash({"axis": axis, "values": values, "base": base,
                                      "scheme": SCHEME_VERSION}),
        "failed": sum(r["classification"] == "Failed" for r in rows)})
    return EXIT_OK


# -- eigen / threshold ------------------------------------------------------------

def _potential(data, sec, params):
    """The eigen potential: explicit ``b``, b1, or b1 - delta1*phi_v* (``effective``)."""
    if "b" in sec:
        return BirthRateField.from_dict(sec["b"], "eigen.b"), "given"
    kind = sec.get("potential", "effective")
    if params is None:
        raise ValidationError("eigen.b", "give b explicitly or a params block")
    if kind == "b1":
        return params.b1, "b1"
    if kind == "effective":
        grid = Grid.from_dict(_section(data, "grid", {"n_u", "n_v", "xmax", "dt", "dt_max", "safety"}))
        profile = solve_stationary_v(params, grid.resolve(params))
        return effective_potential(params, profile), "effective"
    raise ValidationError("eigen.potential", f"must be b1 or effective, got {kind!r}")


def cmd_eigen(config_path, out_dir):
    data = load_config(config_path)
    sec = _section(data, "eigen", {"d", "b", "h0", "n", "potential", "rtol"})
    params = _model(data)[0] if "params" in data else None
    d = sec.get("d", params.d1 if params else None)
    h0 = sec.get("h0", params.h0 if params else None)
    if d is None or h0 is None:
        raise ValidationError("eigen.d", "d and h0 are needed (directly or via params)")
    b, source = _potential(data, sec, params)
    res = principal_eigen(EigenProblem(d=d, b=b, h0=h0, n=sec.get("n", 2048)), rtol=sec.get("rtol"))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {"kind": "lambda1", "value": res.lambda1, "d": d, "h0": h0, "n": res.problem.n,
               "potential": source, "iterations": res.iterations, "bracket": None, "probes": []}
    write_json(out / "eigen.json", payload)
    write_csv(out / "eigenfunction.csv", ("x", "phi"), zip(res.x.tolist(), res.phi1.tolist()))
    return EXIT_OK


def cmd_threshold(config_path, out_dir):
    data = load_config(config_path)
    sec = _section(data, "threshold", {"kind", "bracket", "n", "rtol", "budget", "potential", "b"})
    kind = sec.get("kind")
    params, init = _model(data)
    bracket = tuple(sec["bracket"]) if sec.get("bracket") is not None else None
    if kind in ("d1_star", "h_star"):
        b, _ = _potential(data, sec, params)
        n = sec.get("n", 2048)
        rtol = sec.get("rtol", 1e-8)
        if kind == "d1_star":
            res = find_d1_star(b, params.h0, bracket, n=n, rtol=rtol)
        else:
            xmax = Grid.from_dict(_section(data, "grid", {"n_u", "n_v", "xmax", "dt", "dt_max",
                                                          "safety"})).resolve(params).xmax
            res = find_h_star(params.d1, b, bracket, n=n, rtol=rtol, xmax=xmax)
    elif kind in ("mu_bar", "mu_lower", "mu_star_empirical"):
        grid = Grid.from_dict(_section(data, "grid", {"n_u", "n_v", "xmax", "dt", "dt_max", "safety"}))
        horizon, sample_every, stop, _ = _run_settings(data)
        res = find_mu_threshold(params, init, grid, horizon, kind, bracket or (1e-3, 1e2),
                                budget=sec.get("budget", 20), rtol=sec.get("rtol", 0.02),
                                sample_every=sample_every, stop_rules=stop)
    else:
        raise ValidationError("threshold.kind", f"unknown kind {kind!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = res.to_dict()
    payload["scheme_version"] = SCHEME_VERSION
    write_json(out / "threshold.json", payload)
    return EXIT_OK


# -- speed -------------------------------------------------------------------------

def cmd_speed(config_path, out_dir):
    data = load_config(config_path)
    sec = _section(data, "speed", {"mu", "a", "delta", "d", "mu_values", "bracket"})
    params = _model(data)[0] if "params" in data else None

    def pick(key, fallback):
        if key in sec:
            return sec[key]
        if params is None:
            raise ValidationError(f"speed.{key}", "missing (and no params block to default from)")
        return fallback()

    problem = SemiWaveProblem(d=pick("d", lambda: params.d1),
                              a=pick("a", lambda: params.b1.value),
                              delta=pick("delta", lambda: params.delta1),
                              mu=pick("mu", lambda: params.mu))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = solve_beta0(problem)
    payload = res.to_dict()
    if sec.get("bracket"):
        if params is None:
            raise ValidationError("speed.bracket", "needs a params block")
        lo, hi = speed_bracket(params)
        payload["speed_bracket"] = [lo, hi]
    write_json(out / "speed.json", payload)
    write_csv(out / "profile.csv", ("x", "U"), zip(res.x.tolist(), res.profile.tolist()))
    if "mu_values" in sec:
        mus = sec["mu_values"]
        if not isinstance(mus, list) or not mus:
            raise ValidationError("speed.mu_values", "must be a nonempty list")
        rows = []
        for mu in sorted(float(m) for m in mus):
            p = SemiWaveProblem(d=problem.d, a=problem.a, delta=problem.delta, mu=mu)
            rows.append((mu, solve_beta0(p).beta0))
        write_csv(out / "speed_vs_mu.csv", ("mu", "beta0"), rows)
    return EXIT_OK


# -- ode ---------------------------------------------------------------------------

def cmd_ode(config_path, out_dir):
    data = load_config(config_path)
    sec = _section(data, "ode", {"model", "params", "u0", "v0", "state0", "horizon", "dt",
                                 "sample_every", "reduction"})
    p = OdeParams.from_dict(sec.get("params", {}))
    model = sec.get("model", "uv")
    horizon = float(sec.get("horizon", 50.0))
    dt = float(sec.get("dt", 1e-3))
    every = sec.get("sample_every")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {"model": model, "params": p.to_dict(), "horizon": horizon, "dt": dt}
    if model == "uv":
        traj = integrate_uv(p, sec.get("u0", 0.1), sec.get("v0", 1.0), horizon, dt, sample_every=every)
    elif model == "compartments":
        state = sec.get("state0")
        if state is None:
            state0 = CompartmentState.equal_determination(sec.get("u0", 0.1), sec.get("v0", 1.0))
        else:
            if not isinstance(state, dict):
                raise ValidationError("ode.state0", "expected a JSON object")
            extra = sorted(set(state) - set(CompartmentState.__dataclass_fields__))
            if extra:
                raise ValidationError(f"ode.state0.{extra[0]}", "unknown compartment")
            state0 = CompartmentState(**state)
        traj = integrate_compartments(p, state0, horizon, dt, sample_every=every)
        if sec.get("reduction", False):
            report["reduction"] = reduction_report(p, state0.u, state0.v, horizon, dt)
    else:
        raise ValidationError("ode.model", f"must be uv or compartments, got {model!r}")
    report["final"] = traj.final
    write_csv(out / "trajectory.csv", traj.columns(), traj.rows())
    write_json(out / "ode.json", report)
    return EXIT_OK


# -- entry point -------------------------------------------------------------------

COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "eigen": cmd_eigen,
            "speed": cmd_speed, "threshold": cmd_threshold, "ode": cmd_ode}


def build_parser():
    ap = argparse.ArgumentParser(prog="wolbachia-stefan", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON configuration file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--parallelism", type=int, default=1, help="worker processes for sweep")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    started = time.perf_counter()
    try:
        if args.command == "sweep":
            status = cmd_sweep(args.config, args.out, args.parallelism)
        else:
            status = COMMANDS[args.command](args.config, args.out)
    except (ValidationError, DomainError, BracketError, HorizonError, ResolutionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TypeError, ValueError) as exc:
        # malformed values that slipped past the typed checks
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("%s finished in %.2fs", args.command, time.perf_counter() - started)
    return status


if __name__ == "__main__":
    sys.exit(main())
