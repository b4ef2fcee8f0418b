"""Command-line driver: ``chemospread <command> [flags]``.

Exit codes: 0 success, 1 verification failed, 2 configuration error,
3 numerical blow-up, 4 invalid bisection bracket.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import _kernels
from .front import (BracketInvalid, ClassifyConfig, FrontAtBoundary, bisect_chi_star,
                    bisect_speed, classify, kpp_level, track_front)
from .io import (CONFIG_NAME, SNAPSHOT_NAME, SUMMARY_NAME, RunDir, config_values, dump_json,
                 init_from, read_config, write_config)
from .model import ConfigError, GridSpec, ModelParams, sample_initial, v0_max_of, validate
from .stepper import BlowUp, CSVSnapshotWriter, default_stride, run_heat, simulate
from .sweep import Mode, SweepPlan, execute, phase_table, resolve_workers, MATRIX_C, MATRIX_CHI
from .verify import (EigenNonConvergence, NoData, PreconditionError, check_envelope,
                     check_equilibrium, check_lower_bound, check_v_ahead, eigen_probe,
                     harnack_monitor, skipped, TheoremReport)

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_BLOWUP, EXIT_BRACKET = 0, 1, 2, 3, 4

MODEL_DEFAULTS = {"a": 1.0, "b": 1.0, "chi": 0.0, "tau": 1.0, "sigma": 1.0, "c": 0.0,
                  "L": 20.0, "h": 0.1, "T": 500.0, "dt": 0.002, "init": "bump"}

# per-command extras: name -> (type, default, help)
EXTRAS = {
    "simulate": {"stride": (int, None, "steps between snapshots (default: about 200 snapshots)")},
    "classify": {"delta_persist": (float, 0.1, "persistence threshold as a fraction of capacity")},
    "find-speed": {"c_lo": (float, 1.5, "lower end of the speed bracket"),
                   "c_hi": (float, 3.0, "upper end of the speed bracket"),
                   "tol": (float, 0.05, "target bracket width"),
                   "workers": (int, None, "parallel endpoint probes (env CHEMOSPREAD_WORKERS, else 1)"),
                   "delta_persist": (float, 0.1, "persistence threshold as a fraction of capacity")},
    "find-chi-star": {"c_probe": (float, 2.01, "frame speed at which chi is bisected"),
                      "chi_lo": (float, 1.0, "sensitivity expected to decay"),
                      "chi_hi": (float, 2.5, "sensitivity expected to persist"),
                      "tol": (float, 0.1, "target bracket width"),
                      "workers": (int, None, "parallel endpoint probes (env CHEMOSPREAD_WORKERS, else 1)"),
                      "delta_persist": (float, 0.1, "persistence threshold as a fraction of capacity")},
    "sweep": {"chis": (str, ",".join(f"{v:g}" for v in MATRIX_CHI), "comma-separated chi values"),
              "cs": (str, ",".join(f"{v:g}" for v in MATRIX_C), "comma-separated frame speeds"),
              "taus": (str, None, "comma-separated tau values (default: --tau)"),
              "sigmas": (str, None, "comma-separated sigma values (default: --sigma)"),
              "mode": (str, "Classify", "Classify or FullSnapshots"),
              "workers": (int, None, "worker processes (env CHEMOSPREAD_WORKERS, else 1)"),
              "delta_persist": (float, 0.1, "persistence threshold as a fraction of capacity")},
    "verify": {"run": (str, None, "run directory written by simulate"),
               "c_upper": (float, None, "envelope speed c'' (default 2 sqrt(a) + 0.1)"),
               "c_prime": (float, None, "lower-bound speed c' (default 0.9 * 2 sqrt(a))"),
               "p": (float, 2.0, "Harnack exponent"),
               "s0": (float, 0.0, "Harnack time shift"),
               "R": (float, 1.0, "Harnack radius")},
    "eigen": {"delta0": (float, 0.5, "gap below 2 sqrt(a)"),
              "N": (int, 1, "dimension"),
              "h_eig": (float, None, "eigen grid spacing (default l0/400)")},
}
MODEL_COMMANDS = ("simulate", "classify", "find-speed", "find-chi-star", "sweep")
OUT_DEFAULTS = {"simulate": "run", "classify": None, "find-speed": "speed",
                "find-chi-star": "chi_star", "sweep": "sweep", "verify": None, "eigen": None}


def _model_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("model and grid")
    for key in ("a", "b", "chi", "tau", "sigma", "c"):
        g.add_argument(f"--{key}", type=float, help=f"default {MODEL_DEFAULTS[key]:g}")
    g.add_argument("--L", type=float, help="half-width of the domain (default 20)")
    g.add_argument("--M", type=int, help="number of intervals (default 2L/h)")
    g.add_argument("--h", type=float, help="grid spacing, used when --M is absent (default 0.1)")
    g.add_argument("--T", type=float, help="final time (default 500)")
    g.add_argument("--dt", type=float, help="time step (default 0.002)")
    g.add_argument("--init", help="'bump' for the bump with v = 1, or a CSV with x,u,v columns (default bump)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chemospread",
                                 description="Simulate and analyse chemotaxis fronts with logistic growth.")
    ap.add_argument("--version", action="version", version="chemospread 0.1.0")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {"simulate": "run one simulation and write snapshots",
             "classify": "decide decay or persistence in the comoving frame",
             "find-speed": "bisect the spreading speed",
             "find-chi-star": "bisect the critical chemotactic sensitivity",
             "sweep": "classify a parameter grid in parallel",
             "verify": "check a simulate run against the spreading estimates",
             "eigen": "principal Dirichlet eigenvalue probe"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="key=value file; flags override its values")
        if name in MODEL_COMMANDS:
            _model_flags(p)
        if name == "eigen":
            p.add_argument("--c", type=float, help="frame speed (default 0)")
            p.add_argument("--a", type=float, help="growth rate (default 1)")
        out_default = OUT_DEFAULTS[name]
        p.add_argument("--out", help=f"output directory (default {out_default or 'none: print to stdout'})")
        for key, (typ, default, text) in EXTRAS[name].items():
            flag = "--" + key.replace("_", "-")
            extra = "" if default is None or "default" in text else f" (default {default})"
            p.add_argument(flag, type=typ, dest=key, help=text + extra)
    return ap


class Resolved:
    """Flags over config-file values over built-in defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file = read_config(args.config) if args.config else {}
        known = set(MODEL_DEFAULTS) | {"M", "out", "c", "a"} | set(EXTRAS[args.command])
        unknown = set(self.file) - known
        if unknown:
            raise ConfigError(f"{args.config}: unknown keys {sorted(unknown)} for {args.command}")

    def get(self, key, default=None, typ=str):
        v = getattr(self.args, key, None)
        if v is not None:
            return v
        if key in self.file and self.file[key] not in ("", "None"):
            raw = self.file[key]
            try:
                return typ(raw)
            except ValueError:
                raise ConfigError(f"config key {key}={raw!r} is not a valid {typ.__name__}") from None
        return default

    def extra(self, key):
        typ, default, _ = EXTRAS[self.args.command][key]
        return self.get(key, default, typ)

    def model(self):
        params = ModelParams(**{k: self.get(k, MODEL_DEFAULTS[k], float)
                                for k in ("a", "b", "chi", "tau", "sigma", "c")})
        L = self.get("L", MODEL_DEFAULTS["L"], float)
        M = self.get("M", None, int)
        h = self.get("h", None, float)
        if M is None:
            h = MODEL_DEFAULTS["h"] if h is None else h
            if not h > 0:
                raise ConfigError(f"h must be positive (got {h})")
            M = int(round(2 * L / h))
            if abs(2 * L / M - h) > 1e-9 * h:
                raise ConfigError(f"h = {h} does not divide 2L = {2 * L}")
        elif h is not None and abs(2 * L / M - h) > 1e-9 * h:
            raise ConfigError(f"--M {M} and --h {h} disagree for L = {L}")
        grid = GridSpec(L=L, M=M, T=self.get("T", MODEL_DEFAULTS["T"], float),
                        dt=self.get("dt", MODEL_DEFAULTS["dt"], float))
        init_spec = self.get("init", "bump")
        return params, grid, init_spec, init_from(init_spec)

    def out(self):
        out = self.get("out", OUT_DEFAULTS[self.args.command])
        return Path(out) if out is not None else None


def _validated(r: Resolved):
    params, grid, init_spec, init = r.model()
    report = validate(params, grid, init)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    report.raise_if_failed()
    return params, grid, init_spec, init


def _classify_config(r: Resolved) -> ClassifyConfig:
    return ClassifyConfig(delta_persist=r.extra("delta_persist"))


def _echo(r: Resolved, out: Path, params, grid, init_spec, **extra):
    out.mkdir(parents=True, exist_ok=True)
    values = config_values(params, grid, init_spec, out,
                           **{k: r.extra(k) for k in EXTRAS[r.args.command] if k not in extra}, **extra)
    write_config(out / CONFIG_NAME, values)
    return values


def _header(params, grid, init_spec) -> dict:
    return {"params": {k: getattr(params, k) for k in ("a", "b", "chi", "tau", "sigma", "c")},
            "grid": {"L": grid.L, "M": grid.M, "h": grid.h, "T": grid.T, "dt": grid.dt,
                     "n_steps": grid.n_steps},
            "init": init_spec, "backend": _kernels.BACKEND}


def _emit(obj, out: Path = None, name: str = None):
    text = json.dumps(obj, indent=2, default=float)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n", encoding="utf-8")
    print(text)


# -- commands --------------------------------------------------------------

def cmd_simulate(r: Resolved) -> int:
    params, grid, init_spec, init = _validated(r)
    out = r.out()
    stride = r.extra("stride") or default_stride(grid.n_steps)
    _echo(r, out, params, grid, init_spec, stride=stride)
    state0 = sample_initial(init, grid)
    summary = _header(params, grid, init_spec)
    summary["stride"] = stride
    code = EXIT_OK
    with CSVSnapshotWriter(out / SNAPSHOT_NAME, grid) as writer:
        try:
            res = simulate(state0, params, grid, [writer], stride=stride)
        except BlowUp as exc:
            summary.update(status="blowup", step_index=exc.step_index, t=exc.t, error=str(exc))
            code = EXIT_BLOWUP
        else:
            u, v, x = res.final.u, res.final.v, grid.x()
            center = np.abs(x) <= 2.0
            summary.update(status="ok", steps=res.final.step_index, t=res.final.t,
                           final_max_u=float(u.max()), center_min_u=float(u[center].min()),
                           center_max_v=float(v[center].max()),
                           min_u=res.min_u, max_u=res.max_u, min_v=res.min_v, max_v=res.max_v,
                           v0_max=v0_max_of(init, state0))
    dump_json(out / SUMMARY_NAME, summary)
    print(json.dumps(summary, indent=2))
    if code == EXIT_BLOWUP:
        print(f"error: {summary['error']}", file=sys.stderr)
    return code


def cmd_classify(r: Resolved) -> int:
    params, grid, init_spec, init = _validated(r)
    cfg = _classify_config(r)
    outcome = classify(params, grid, init, cfg)
    doc = _header(params, grid, init_spec)
    doc["classify_config"] = cfg.__dict__
    doc.update(outcome.to_dict())
    out = r.out()
    if out is not None:
        _echo(r, out, params, grid, init_spec)
    _emit(doc, out, "verdict.json")
    return EXIT_OK


def cmd_find_speed(r: Resolved) -> int:
    params, grid, init_spec, init = _validated(r)
    cfg = _classify_config(r)
    workers = resolve_workers(r.extra("workers"))
    out = r.out()
    _echo(r, out, params, grid, init_spec)
    est = bisect_speed(params, grid, init, r.extra("c_lo"), r.extra("c_hi"), r.extra("tol"),
                       cfg, workers)
    doc = _header(params, grid, init_spec)
    doc["kpp_speed"] = params.kpp_speed()
    doc.update(est.to_dict())
    _emit(doc, out, "speed.json")
    return EXIT_OK


def cmd_find_chi_star(r: Resolved) -> int:
    params, grid, init_spec, init = _validated(r)
    cfg = _classify_config(r)
    workers = resolve_workers(r.extra("workers"))
    out = r.out()
    _echo(r, out, params, grid, init_spec)
    br = bisect_chi_star(params, grid, init, r.extra("c_probe"), r.extra("chi_lo"),
                         r.extra("chi_hi"), r.extra("tol"), cfg, workers)
    doc = _header(params, grid, init_spec)
    doc["delta_persist"] = cfg.delta_persist
    doc.update(br.to_dict())
    _emit(doc, out, "chi_star.json")
    return EXIT_OK


def _floats(text):
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None
    return vals


def cmd_sweep(r: Resolved) -> int:
    params, grid, init_spec, init = r.model()
    out = r.out()
    axes = {"chi": _floats(r.extra("chis")), "c": _floats(r.extra("cs"))}
    for key, flag in (("tau", "taus"), ("sigma", "sigmas")):
        text = r.extra(flag)
        axes[key] = _floats(text) if text is not None else [getattr(params, key)]
    try:
        mode = Mode(r.extra("mode"))
    except ValueError:
        raise ConfigError(f"mode must be Classify or FullSnapshots (got {r.extra('mode')!r})") from None
    plan = SweepPlan(axes, params, grid, init, mode, _classify_config(r))
    workers = resolve_workers(r.extra("workers"))
    _echo(r, out, params, grid, init_spec)
    records = execute(plan, workers, out)
    fixed = {}
    if len(axes["tau"]) == 1:
        fixed["tau"] = axes["tau"][0]
    if len(axes["sigma"]) == 1:
        fixed["sigma"] = axes["sigma"][0]
    table = phase_table(records, "chi", "c", fixed).render()
    (out / "phase.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    blown = sum(rec.verdict == "BlowUp" for rec in records)
    print(f"{len(records)} records in {out}" + (f", {blown} blew up" if blown else ""))
    return EXIT_OK


def _guard(name, fn) -> TheoremReport:
    try:
        return fn()
    except PreconditionError as exc:
        return skipped(name, str(exc))
    except NoData as exc:
        return TheoremReport(name, "fail", measured={"reason": str(exc)})


def cmd_verify(r: Resolved) -> int:
    if r.extra("run") is None:
        raise ConfigError("verify needs --run <directory written by simulate>")
    rd = RunDir(r.extra("run"))
    params, grid = rd.params, rd.grid
    snaps = rd.snapshots()
    summary = rd.summary()
    c_upper = r.extra("c_upper")
    c_upper = params.kpp_speed() + 0.1 if c_upper is None else c_upper
    c_prime = r.extra("c_prime")
    c_prime = 0.9 * params.kpp_speed() if c_prime is None else c_prime
    v0_max = summary.get("v0_max", float(np.max(snaps.v[0])))

    reports = [
        _guard("envelope", lambda: check_envelope(snaps, params, c_upper)),
        _guard("equilibrium", lambda: check_equilibrium(snaps, params, v0_max=v0_max)),
        _guard("lower_bound", lambda: check_lower_bound(snaps, params, c_prime)),
    ]

    def v_ahead():
        if params.c != 0:
            raise PreconditionError("v_ahead needs a resting-frame run (c = 0)")
        heat = run_heat(snaps.v[0], params.tau, grid, stride=rd.stride,
                        n_steps=int(snaps.steps[-1]))
        return check_v_ahead(snaps, heat, c_upper)

    reports.append(_guard("v_ahead", v_ahead))

    def harnack():
        p, s0, R = r.extra("p"), r.extra("s0"), r.extra("R")
        C = harnack_monitor(snaps, p, s0, R)
        return TheoremReport("harnack", "reported", {"C_emp": C}, {},
                             {"p": p, "s0": s0, "R": R})

    try:
        reports.append(harnack())
    except (ValueError, NoData) as exc:
        reports.append(skipped("harnack", str(exc)))

    if params.c == 0 and params.chi == 0:
        def front():
            tr = track_front(snaps, level=kpp_level(params), L=grid.L)
            return TheoremReport("front", "reported", {"speed": tr.speed, "decay_rate": tr.decay_rate},
                                 {}, {"fit_window": list(tr.fit_window), "level": tr.level})
        try:
            reports.append(front())
        except (FrontAtBoundary, ValueError) as exc:
            reports.append(skipped("front", str(exc)))

    doc = {"run": str(rd.path), **_header(params, grid, rd.values.get("init", "bump")),
           "pass": not any(rep.failed for rep in reports),
           "reports": [rep.to_dict() for rep in reports]}
    out = r.out() or rd.path
    _emit(doc, out, "verify.json")
    return EXIT_OK if doc["pass"] else EXIT_VERIFY


def cmd_eigen(r: Resolved) -> int:
    c = r.get("c", 0.0, float)
    a = r.get("a", 1.0, float)
    probe = eigen_probe(c, r.extra("delta0"), a=a, N=r.extra("N"), h_eig=r.extra("h_eig"))
    out = r.out()
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_config(out / CONFIG_NAME, {"c": c, "a": a, "out": str(out),
                                         **{k: r.extra(k) for k in EXTRAS["eigen"]}})
    _emit(probe.to_dict(), out, "eigen.json")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "classify": cmd_classify, "find-speed": cmd_find_speed,
            "find-chi-star": cmd_find_chi_star, "sweep": cmd_sweep, "verify": cmd_verify,
            "eigen": cmd_eigen}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](Resolved(args))
    except BracketInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BRACKET
    except (BlowUp, EigenNonConvergence) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (ValueError, OSError) as exc:
        # ConfigError, InitialDataError and argument-range errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

if __name__ == "__main__":
    sys.exit(main())
