"""Command line driver: make-ic, run, verify, bound, report.

Every stage writes a JSON record into the output directory.  ``report``
collects them into one bundle with the diagnostics CSV and figures.

Exit codes: 0 ok, 2 config or input error, 3 construction error,
4 breakdown before t_end, 5 verification failure, 6 incomplete report.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import platform
import shutil
import sys
from dataclasses import asdict
from importlib import metadata
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import io
from .cart3d import run_compare
from .diagnostics import CSV_COLUMNS, Recorder, Series, complete, verify
from .initial_data import ConstructionError, InitialData, build_initial_state, check_admissible
from .radial import check_domain, run
from .riccati import (NoBoundError, V_closed_form, blowup_bound_Tstar, blowup_report,
                      check_criterion)

log = logging.getLogger("ucm_blowup")

EXIT_OK, EXIT_CONFIG, EXIT_CONSTRUCTION, EXIT_BREAKDOWN, EXIT_VERIFY, EXIT_INCOMPLETE = (
    0, 2, 3, 4, 5, 6)
THREADS_ENV = "UCM_THREADS"


class CLIError(Exception):
    def __init__(self, msg, code=EXIT_CONFIG):
        super().__init__(msg)
        self.code = code


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _versions():
    out = {"python": platform.python_version(), "numpy": np.__version__}
    for pkg in ("scipy", "matplotlib", "artifact"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _load_config(args) -> cfgmod.Config:
    if args.config is None:
        return cfgmod.from_dict({})
    return cfgmod.load(args.config)


def _outdir(args, cfg) -> Path:
    d = args.out or cfg.out
    if d is None:
        raise CLIError("no output directory (use --out or the 'out' key)")
    p = Path(d)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _data_path(args, out: Path) -> Path:
    p = Path(args.data) if args.data else out / "initial_data.json"
    if not p.exists():
        raise CLIError(f"data file {p} not found")
    return p


def _load_data(path, cfg) -> InitialData:
    try:
        data = io.load_data(path)
    except (io.FormatError, KeyError, ValueError) as exc:
        raise CLIError(f"cannot read data file {path}: {exc}") from None
    if cfg.has_params and cfg.params.as_dict() != data.params.as_dict():
        raise CLIError(f"config parameters {cfg.params.as_dict()} differ from the data "
                       f"file's {data.params.as_dict()}")
    return data


def _record(stage, args, cfg, result, data_path=None):
    rec = {"stage": stage, "config": dict(sorted(cfg.raw.items())),
           "config_sha256": io.sha256(args.config) if args.config else None,
           "data_sha256": io.sha256(data_path) if data_path else None,
           "sigma_est": cfg.sigma, "generated_at": _now(), "result": result}
    return rec


def _criterion_block(data, sigma):
    crit = check_criterion(data, data.params, sigma)
    T_star = blowup_bound_Tstar(crit.U0, crit.c2, crit.c3) if crit.satisfied else None
    return {"satisfied": crit.satisfied, "U0": crit.U0, "threshold": crit.threshold,
            "W0": crit.W0, "W0_required": crit.W0_required, "c2": crit.c2, "c3": crit.c3,
            "T_star": T_star}


# -- make-ic ----------------------------------------------------------------

def build_data(cfg: cfgmod.Config) -> InitialData:
    spec = cfg.profile_spec()
    grid = cfg.grid(spec)
    if spec is None:
        R = cfg.support_radius(None)
        n = grid.n_cells
        return InitialData.from_arrays(grid, R, cfg.params, np.ones(n), np.zeros(n))
    return build_initial_state(spec, cfg.params, grid)


def cmd_make_ic(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args, cfg)
    try:
        data = build_data(cfg)
        check_admissible(data)
    except ConstructionError as exc:
        raise CLIError(f"construction failed: {exc}", EXIT_CONSTRUCTION) from None
    path = out / "initial_data.json"
    io.save_data(path, data)
    trT = data.trace_T0()
    result = dict(data.summary(), grid=data.grid.as_dict(),
                  profile=data.spec.as_dict() if data.spec else None,
                  excess_mass_nonnegative=bool(data.m0 >= 0.0),
                  trace_T0_nonnegative=bool(np.all(trT >= 0.0)),
                  criterion=_criterion_block(data, cfg.sigma))
    io.write_json(out / "make_ic.json", _record("make_ic", args, cfg, result, path))
    print(json.dumps(result, indent=1))
    return EXIT_OK


# -- run --------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args, cfg)
    dpath = _data_path(args, out)
    data = _load_data(dpath, cfg)
    rc = cfg.run_config()
    rc.keep_snapshots = False
    sigma = cfg.sigma
    try:
        check_domain(data, sigma, rc.t_end)
    except ValueError as exc:
        raise CLIError(str(exc)) from None
    rec = Recorder(data.params, sigma, data.R)
    res = run(data, data.params, rc, sigma_est=sigma, callback=rec)
    series = complete(rec.series(), data, data.params, sigma)
    io.write_csv(out / "diagnostics.csv", CSV_COLUMNS, series.rows())
    io.save_checkpoint(out / "checkpoint.json", res.final, data.params)
    crit = _criterion_block(data, sigma)
    result = {"completed": res.outcome.ok, "t_end": rc.t_end,
              "breakdown": None if res.outcome.ok else {
                  "reason": res.outcome.breakdown, "time": res.outcome.t,
                  "detail": res.outcome.detail},
              "last_healthy_time": res.last_healthy_time, "steps": res.steps,
              "records": len(series), "initial_sup_grad_u": res.initial_grad,
              "final_sup_grad_u": float(series.sup_grad_u[-1]),
              "T_star": crit["T_star"], "criterion_satisfied": crit["satisfied"]}
    io.write_json(out / "outcome.json", _record("run", args, cfg, result, dpath))
    print(json.dumps(result, indent=1))
    return EXIT_OK if res.outcome.ok else EXIT_BREAKDOWN


# -- verify -----------------------------------------------------------------

BASE_COLUMNS = ("t", "m", "W", "E", "int_trT", "cum_int_trT", "support_radius",
                "sup_grad_u", "jensen_margin")


def series_from_csv(path) -> Series:
    cols = io.read_csv(path, expected=CSV_COLUMNS)
    kw = {k: cols[k] for k in BASE_COLUMNS}
    return Series(exterior_deviation=np.zeros_like(cols["t"]), **kw)


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args, cfg)
    dpath = _data_path(args, out)
    data = _load_data(dpath, cfg)
    csv_path = Path(args.csv) if args.csv else out / "diagnostics.csv"
    outcome = out / "outcome.json"
    if outcome.exists():
        prev = io.read_json(outcome)
        if prev.get("data_sha256") not in (None, io.sha256(dpath)):
            raise CLIError("data file hash differs from the one recorded by run")
        if args.config and prev.get("config_sha256") not in (None, io.sha256(args.config)):
            raise CLIError("config file hash differs from the one recorded by run")
    try:
        series = series_from_csv(csv_path)
    except io.SchemaError as exc:
        raise CLIError(f"{csv_path}: {exc}") from None
    except OSError as exc:
        raise CLIError(str(exc)) from None
    sigma = cfg.sigma
    complete(series, data, data.params, sigma)
    checks = verify(series, data, data.params, sigma, cfg.tolerances)
    rows = [asdict(c) for c in checks]
    result = {"passed": all(c.passed for c in checks), "checks": rows}
    if cfg.oracle:
        n = int(cfg.oracle.get("n", 32))
        t_short = cfg.oracle.get("t_short", 0.1 * data.R / sigma)
        result["oracle_3d"] = run_compare(data, data.params, n, t_short, sigma)
    io.write_json(out / "verify.json", _record("verify", args, cfg, result, dpath))
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"{c.name:<{width}}  {'PASS' if c.passed else 'FAIL'}  "
              f"residual={c.residual!r}  tolerance={c.tolerance!r}")
    if "oracle_3d" in result:
        print(json.dumps({"oracle_3d": result["oracle_3d"]}, indent=1))
    return EXIT_OK if result["passed"] else EXIT_VERIFY


# -- bound ------------------------------------------------------------------

def cmd_bound(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args, cfg)
    sigma = cfg.sigma
    if cfg.bound:
        U0, c2, c3 = cfg.bound["U0"], cfg.bound["c2"], cfg.bound["c3"]
        try:
            T_star = blowup_bound_Tstar(U0, c2, c3)
        except NoBoundError:
            T_star = None
        except ValueError as exc:
            raise CLIError(str(exc)) from None
        result = {"injected": True, "U0": U0, "c2": c2, "c3": c3,
                  "threshold": 4.0 * c2 / c3, "criterion_satisfied": T_star is not None,
                  "T_star": T_star, "sigma_est": sigma}
        if T_star is not None:
            tg = np.linspace(0.0, 0.99 * T_star, 101)
            result.update(V_t=tg.tolist(), V=V_closed_form(tg, U0, c2, c3).tolist())
        dpath = None
    else:
        dpath = _data_path(args, out)
        data = _load_data(dpath, cfg)
        rep = blowup_report(data, data.params, sigma)
        result = dict(asdict(rep), injected=False, params=data.params.as_dict(),
                      grid=data.grid.as_dict())
    if result["criterion_satisfied"]:
        summary = f"criterion satisfied: lifespan <= T* = {result['T_star']!r}"
    else:
        summary = "criterion not satisfied: no lifespan bound"
    result["summary"] = summary
    io.write_json(out / "bound.json", _record("bound", args, cfg, result, dpath))
    print(summary)
    return EXIT_OK


# -- report -----------------------------------------------------------------

STAGE_FILES = {"make_ic": "make_ic.json", "run": "outcome.json", "verify": "verify.json",
               "bound": "bound.json"}


def build_report(run_dir: Path) -> dict:
    """Bundle the stage records of ``run_dir``; writes figures and the CSV copy."""
    stages, missing = {}, []
    for name, fname in STAGE_FILES.items():
        p = run_dir / fname
        if p.exists():
            stages[name] = io.read_json(p)
        else:
            stages[name] = {"present": False}
            missing.append(name)
    for blk in stages.values():
        blk.setdefault("present", True)
    files = []
    csv_path = run_dir / "diagnostics.csv"
    data_path = run_dir / "initial_data.json"
    if csv_path.exists():
        shutil.copyfile(csv_path, run_dir / "report_diagnostics.csv")
        files.append("report_diagnostics.csv")
    if csv_path.exists() and data_path.exists():
        from .plotting import plot_diagnostics, plot_initial
        data = io.load_data(data_path)
        cols = io.read_csv(csv_path, expected=CSV_COLUMNS)
        V = cols["V_lower"] if np.any(np.isfinite(cols["V_lower"])) else None
        plot_diagnostics(cols, run_dir / "fig_diagnostics.png", V)
        plot_initial(data, run_dir / "fig_initial_data.png")
        files += ["fig_diagnostics.png", "fig_initial_data.png"]
    verdicts = {
        "construction": stages["make_ic"].get("result", {}).get("criterion", {}).get(
            "satisfied") if "make_ic" not in missing else None,
        "run_completed": stages["run"].get("result", {}).get("completed")
        if "run" not in missing else None,
        "verification_passed": stages["verify"].get("result", {}).get("passed")
        if "verify" not in missing else None,
        "bound": stages["bound"].get("result", {}).get("summary")
        if "bound" not in missing else None,
    }
    return {"format": "ucm-report", "version": 1, "versions": _versions(),
            "stages": stages, "missing_stages": missing, "verdicts": verdicts,
            "files": files, "generated_at": _now()}


def cmd_report(args) -> int:
    run_dir = Path(args.out or ".")
    if not run_dir.is_dir():
        raise CLIError(f"{run_dir} is not a directory")
    bundle = build_report(run_dir)
    io.write_json(run_dir / "report.json", bundle)
    print(json.dumps({"missing_stages": bundle["missing_stages"],
                      "verdicts": bundle["verdicts"]}, indent=1))
    return EXIT_INCOMPLETE if bundle["missing_stages"] else EXIT_OK


# -- entry point --------------------------------------------------------------

def make_parser():
    ap = argparse.ArgumentParser(prog="ucm-blowup",
                                 description="Radial viscoelastic blow-up lab")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (
            ("make-ic", cmd_make_ic, "build initial data"),
            ("run", cmd_run, "evolve initial data and write diagnostics"),
            ("verify", cmd_verify, "check identities and inequalities on a diagnostics CSV"),
            ("bound", cmd_bound, "evaluate the criterion and the lifespan bound"),
            ("report", cmd_report, "bundle a run directory")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--out", help="output / run directory")
        if name in ("run", "verify", "bound"):
            p.add_argument("--data", help="initial data file (default OUT/initial_data.json)")
        if name == "verify":
            p.add_argument("--csv", help="diagnostics CSV (default OUT/diagnostics.csv)")
        p.set_defaults(func=fn)
    return ap


def _thread_limit():
    val = os.environ.get(THREADS_ENV)
    if not val:
        return None
    try:
        n = int(val)
    except ValueError:
        raise CLIError(f"{THREADS_ENV} must be an integer, got {val!r}") from None
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=max(n, 1))


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        limiter = _thread_limit()
        try:
            return args.func(args)
        finally:
            if limiter is not None:
                limiter.unregister()
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConstructionError as exc:
        print(f"construction error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION


if __name__ == "__main__":
    sys.exit(main())
