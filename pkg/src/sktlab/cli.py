"""Command-line front end.

    sktlab {check,simulate,probe,audit,sweep} --config PATH [--out-dir DIR] [--seed N]

Exit codes: 0 success, 1 configuration error, 2 hypothesis failure,
3 solver failure, 4 probe criterion unmet.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import config as cfgmod
from .audit import (TERM_NAMES, ConstantProxy, EntropyReport, audit_refinement_study,
                    entropy_balance_terms, exact_trajectory, relative_entropy_series,
                    weak_strong_probe)
from .errors import ConfigError, HypothesisError, InputError, SolverError
from .model import validate_hypotheses
from .solver.fv import simulate

log = logging.getLogger("sktlab")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_HYPOTHESIS = 2
EXIT_SOLVER = 3
EXIT_PROBE = 4


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _out_dir(cfg) -> str:
    path = cfg.output.dir
    try:
        os.makedirs(path, exist_ok=True)
        probe = os.path.join(path, ".write-test")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        raise cfgmod.ConfigIssue(f"output directory not writable ({exc})", "output.dir") from None
    return path


def _write_hypotheses(report, out):
    with open(os.path.join(out, "hypotheses.txt"), "w") as fh:
        fh.write(report.to_text())
    rows = report.rows()
    _write_rows(os.path.join(out, "hypotheses.csv"), ["hypothesis", "status", "samples", "worst", "detail"],
                [[r["hypothesis"], r["status"], r["samples"], r["worst"], r["detail"]] for r in rows])


# --------------------------------------------------------------------------
# subcommands


def cmd_check(cfg) -> int:
    out = _out_dir(cfg)
    spec = cfg.model_spec()
    grid = cfg.grid_obj()
    report = validate_hypotheses(spec, cfg.sampling(), u0=cfg.initial_field(grid).data)
    _write_hypotheses(report, out)
    sys.stdout.write(report.to_text())
    return EXIT_OK if report.required_ok else EXIT_HYPOTHESIS


def cmd_simulate(cfg) -> int:
    out = _out_dir(cfg)
    spec = cfg.model_spec()
    grid = cfg.grid_obj()
    u0 = cfg.initial_field(grid)
    # relative entropies are taken against the constant state with u0's mean
    proxy = ConstantProxy(u0.mass() / grid.measure)
    code = EXIT_OK
    try:
        traj = simulate(spec, grid, u0, cfg.time.T, cfg.time.dt, cfg.newton())
    except SolverError as exc:
        log.error("solver failure: %s", exc)
        traj = exc.trajectory
        code = EXIT_SOLVER
    traj.to_csv(os.path.join(out, "trajectory.csv"), cfg.output.cadence)
    report = EntropyReport(series=relative_entropy_series(spec, cfg.cutoff_spec(), traj, proxy),
                           mode="simulate", dx=max(grid.dx), dt=cfg.time.dt)
    report.to_csv(os.path.join(out, "entropy.csv"))
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write(report.summary())
    return code


def _probe_report(cfg):
    spec = cfg.model_spec()
    grid = cfg.grid_obj()
    p = cfg.probe
    proxy = cfg.manufactured(spec) if p.mode == "manufactured" else None
    return weak_strong_probe(spec, grid, p.refinement, cfg.cutoff_spec(), cfg.initial_field(grid),
                             cfg.time.T, cfg.time.dt, mode=p.mode, proxy=proxy,
                             perturbation=p.perturbation, tolerance=p.tolerance, newton=cfg.newton(),
                             sampling=cfg.sampling())


def cmd_probe(cfg) -> int:
    out = _out_dir(cfg)
    try:
        report = _probe_report(cfg)
    except HypothesisError as exc:
        spec = cfg.model_spec()
        hyp = validate_hypotheses(spec, cfg.sampling(), u0=cfg.initial_field(cfg.grid_obj()).data)
        _write_hypotheses(hyp, out)
        log.error("%s", exc)
        return EXIT_HYPOTHESIS
    report.to_csv(os.path.join(out, "probe.csv"))
    _write_hypotheses(report.hypotheses, out)
    text = report.summary()
    with open(os.path.join(out, "probe_summary.txt"), "w") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK if report.passed else EXIT_PROBE


def _audit_steps(cfg, window):
    au = cfg.audit
    if au.steps is not None:
        return list(au.steps)
    base = max(1, int(round(window / cfg.time.dt)))
    power = 1 if au.source == "exact" else 2
    return [max(1, int(round(base * (c / au.ladder[0]) ** power))) for c in au.ladder]


def cmd_audit(cfg) -> int:
    out = _out_dir(cfg)
    spec = cfg.model_spec()
    grid = cfg.grid_obj()
    cut = cfg.cutoff_spec()
    au = cfg.audit
    window = cfg.time.T if au.window is None else au.window
    try:
        proxy = cfg.manufactured(spec)
    except InputError as exc:
        raise cfgmod.ConfigIssue(str(exc), "initial") from None
    steps = max(1, int(round(window / cfg.time.dt)))
    times = np.linspace(0.0, window, steps + 1)
    if au.source == "exact":
        traj = exact_trajectory(proxy, grid, times)
    else:
        traj = simulate(spec, grid, proxy.field(grid, 0.0), window, window / steps, cfg.newton(),
                        proxy.forcing_on(grid))
    terms = entropy_balance_terms(spec, cut, traj, proxy, window)
    _write_rows(os.path.join(out, "audit_terms.csv"), ["term", "value"],
                [[r["term"], r["value"]] for r in terms.rows()])
    lines = [f"{name} = {terms.terms[name]:.17g}" for name in TERM_NAMES]
    lines += [f"lhs = {terms.lhs:.17g}", f"residual = {terms.residual:.17g}"]
    if au.ladder is not None:
        res, orders, _ = audit_refinement_study(spec, cut, proxy, au.ladder, window,
                                                _audit_steps(cfg, window), au.source, cfg.newton())
        rows = [[c, s, r, "" if k == 0 else orders[k - 1]]
                for k, (c, s, r) in enumerate(zip(au.ladder, _audit_steps(cfg, window), res))]
        _write_rows(os.path.join(out, "audit_ladder.csv"), ["cells", "steps", "residual", "order"], rows)
        lines.append("orders = " + " ".join(f"{o:.6g}" for o in orders))
        lines.append(f"min_order = {float(np.min(orders)):.17g}")
    text = "\n".join(lines) + "\n"
    with open(os.path.join(out, "audit_summary.txt"), "w") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


SWEEP_SCALARS = ("exit_code", "max_H_KL", "gronwall_rate", "gronwall_margin", "passed", "error")


def _sweep_row(cfg, overrides):
    try:
        point = cfgmod.with_overrides(cfg, overrides)
        report = _probe_report(point)
    except (ConfigError, InputError) as exc:
        return [EXIT_CONFIG, "", "", "", False, str(exc)]
    except HypothesisError as exc:
        return [EXIT_HYPOTHESIS, "", "", "", False, str(exc)]
    except SolverError as exc:
        return [EXIT_SOLVER, "", "", "", False, str(exc)]
    g = report.gronwall
    code = EXIT_OK if report.passed else EXIT_PROBE
    return [code, float(np.max(report.series.H_KL)), "" if g is None else g.rate,
            "" if g is None else g.margin, report.passed, ""]


def sweep_points(sweep: dict):
    keys = sorted(sweep)
    points = [dict(zip(keys, combo)) for combo in itertools.product(*(sweep[k] for k in keys))]
    points.sort(key=lambda p: tuple(_sort_key(p[k]) for k in keys))
    return keys, points


def _sort_key(x):
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return (0, float(x), "")
    return (1, 0.0, str(x))


def cmd_sweep(cfg) -> int:
    out = _out_dir(cfg)
    if not cfg.sweep:
        raise cfgmod.ConfigIssue("sweep needs at least one parameter", "sweep")
    keys, points = sweep_points(cfg.sweep)
    with ThreadPoolExecutor(max_workers=min(len(points), os.cpu_count() or 1)) as pool:
        results = list(pool.map(lambda p: _sweep_row(cfg, p), points))
    rows = [[p[k] for k in keys] + r for p, r in zip(points, results)]
    _write_rows(os.path.join(out, "sweep.csv"), keys + list(SWEEP_SCALARS), rows)
    for row in rows:
        sys.stdout.write(",".join(_fmt(x) for x in row) + "\n")
    completed = sum(1 for r in results if r[0] in (EXIT_OK, EXIT_PROBE))
    return EXIT_OK if completed else EXIT_SOLVER


COMMANDS = {"check": cmd_check, "simulate": cmd_simulate, "probe": cmd_probe, "audit": cmd_audit,
            "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sktlab", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="TOML run configuration")
    parser.add_argument("--out-dir", help="override output.dir")
    parser.add_argument("--seed", type=int, help="override the sampling seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = cfgmod.load(args.config)
        if args.out_dir is not None:
            cfg = replace(cfg, output=replace(cfg.output, dir=args.out_dir))
        if args.seed is not None:
            if args.seed < 0:
                raise cfgmod.ConfigIssue("expected a nonnegative integer", "seed")
            cfg = replace(cfg, seed=args.seed)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except InputError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except HypothesisError as exc:
        sys.stderr.write(f"hypothesis failure: {exc}\n")
        return EXIT_HYPOTHESIS
    except SolverError as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        return EXIT_SOLVER


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
