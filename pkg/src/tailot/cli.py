"""
Command-line front end.

Exit codes
----------
0  success
2  invalid input: unreadable or malformed files, unbalanced masses, bad config
3  solver audit failure
4  cyclic-monotonicity violation (``verify``)
5  empty window under ``--strict`` (``tail-study``)
"""

import argparse
import hashlib
import json
import os
import platform
import sys
from datetime import datetime, timezone
from importlib import resources

import numpy as np

from ._fmt import fmt
from .measures import DiscreteMeasure
from .tails import ConfigError, TailStudyConfig, run_tail_study
from .transport import (
    Coupling,
    SolverAuditError,
    UnbalancedMassError,
    solve_exact,
    transport_cost,
    verify_cyclic_monotonicity,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_AUDIT = 3
EXIT_VIOLATION = 4
EXIT_EMPTY_WINDOW = 5


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _versions():
    import numba
    import scipy

    from . import __version__

    return {"tailot": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


class Manifest:
    """Run record written next to the outputs. Timestamps live only here,
    so every other file is reproducible byte for byte."""

    def __init__(self, command, config_hash, seeds):
        self.data = {"command": command, "config_hash": config_hash, "seeds": list(seeds),
                     "started": _now(), "finished": None, "exit_status": None,
                     "versions": _versions(), "files": []}

    def finish(self, out_dir, files, status):
        self.data["finished"] = _now()
        self.data["exit_status"] = status
        self.data["files"] = [{"name": f, "sha256": _sha256(os.path.join(out_dir, f))} for f in sorted(files)]
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fail(code, message):
    print(f"error: {message}", file=sys.stderr)
    return code


def _write(out_dir, name, text):
    with open(os.path.join(out_dir, name), "w", newline="\n") as fh:
        fh.write(text)
    return name


def cmd_solve(args):
    try:
        with open(args.mu) as fh:
            mu_text = fh.read()
        with open(args.nu) as fh:
            nu_text = fh.read()
        mu = DiscreteMeasure.from_json(mu_text)
        nu = DiscreteMeasure.from_json(nu_text)
    except (OSError, ValueError) as exc:
        return _fail(EXIT_INPUT, f"cannot read measures: {exc}")
    try:
        pi = solve_exact(mu, nu, pivot=args.pivot)
    except UnbalancedMassError as exc:
        return _fail(EXIT_INPUT, f"unbalanced masses: mu total {fmt(exc.mass_mu)}, nu total {fmt(exc.mass_nu)}")
    except SolverAuditError as exc:
        return _fail(EXIT_AUDIT, f"solver audit failed: {exc}")
    except ValueError as exc:
        return _fail(EXIT_INPUT, str(exc))

    check = verify_cyclic_monotonicity(pi, args.max_cycle_len, args.tol, args.budget, args.seed)
    os.makedirs(args.out, exist_ok=True)
    digest = hashlib.sha256((mu_text + "\0" + nu_text).encode()).hexdigest()
    manifest = Manifest("solve", digest, [args.seed])
    cost = transport_cost(pi)
    summary = {"cost": cost, "pairs": len(pi), "monotonicity": check.label,
               "cycles_checked": check.cycles_checked, "pivot": args.pivot}
    files = [_write(args.out, "coupling.csv", pi.to_csv()),
             _write(args.out, "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")]
    manifest.finish(args.out, files, EXIT_OK)
    print(f"cost {fmt(cost)}  pairs {len(pi)}  monotonicity {check.label}")
    return EXIT_OK


def cmd_verify(args):
    try:
        with open(args.coupling) as fh:
            pi = Coupling.from_csv(fh.read())
    except (OSError, ValueError) as exc:
        return _fail(EXIT_INPUT, f"cannot read coupling: {exc}")
    check = verify_cyclic_monotonicity(pi, args.max_cycle_len, args.tol, args.budget, args.seed)
    report = {"status": check.label, "cycles_checked": check.cycles_checked}
    if check.violation is not None:
        v = check.violation
        report["cycle"] = [[list(map(float, x)), list(map(float, y))] for x, y in v.cycle]
        report["lhs_cost"] = v.lhs_cost
        report["rhs_cost"] = v.rhs_cost
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK if check.ok else EXIT_VIOLATION


def _example_config_text():
    return resources.files("tailot").joinpath("example_study.json").read_text()


def cmd_example_config(args):
    sys.stdout.write(_example_config_text())
    return EXIT_OK


def cmd_tail_study(args):
    try:
        with open(args.config) as fh:
            text = fh.read()
        cfg = TailStudyConfig.from_json(text, strict=args.strict)
        if args.seed is not None:
            cfg = TailStudyConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    except OSError as exc:
        return _fail(EXIT_INPUT, f"cannot read config: {exc}")
    except (ConfigError, TypeError) as exc:
        return _fail(EXIT_INPUT, f"invalid config: {exc}")

    manifest = Manifest("tail-study", cfg.digest(), cfg.seeds())
    threads = args.threads or os.cpu_count() or 1
    result = run_tail_study(cfg, threads=threads)

    os.makedirs(args.out, exist_ok=True)
    files = [_write(args.out, name, text) for name, text in result.tables().items()]
    meta = {"config": cfg.to_dict(), "b_mode": result.b_mode, "regime": result.regime,
            "coupling_cost": result.cost, "coupling_pairs": result.pairs,
            "empty_windows": [{"t": t, "window": list(w)} for t, w in result.empty_cells]}
    files.append(_write(args.out, "study.json", json.dumps(meta, indent=2, sort_keys=True) + "\n"))

    status = EXIT_OK
    if result.empty_cells:
        where = ", ".join(f"t={t:g} window={list(w)}" for t, w in result.empty_cells)
        print(f"warning: empty windows: {where}", file=sys.stderr)
        if args.strict:
            status = EXIT_EMPTY_WINDOW
    manifest.finish(args.out, files, status)
    for w, est, st in result.exponents:
        if est is not None:
            print(f"window {list(w)}: gamma_hat {est.gamma_hat:.4f} +- {est.stderr:.4f} ({est.n_pairs} pairs)")
        else:
            print(f"window {list(w)}: {st}")
    return status


def build_parser():
    p = argparse.ArgumentParser(prog="tailot", description="Exact quadratic transport and tail-rescaling studies.")
    sub = p.add_subparsers(dest="command", required=True)

    def cycle_flags(sp):
        sp.add_argument("--max-cycle-len", type=int, default=4)
        sp.add_argument("--tol", type=float, default=1e-9)
        sp.add_argument("--budget", type=int, default=10_000, help="random cycles when the support exceeds 12 pairs")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("solve", help="optimal coupling of two measure files")
    sp.add_argument("mu")
    sp.add_argument("nu")
    sp.add_argument("--out", required=True)
    sp.add_argument("--pivot", choices=("block", "bland"), default="block")
    cycle_flags(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("verify", help="check a coupling CSV for cyclic monotonicity")
    sp.add_argument("coupling")
    cycle_flags(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("tail-study", help="run a tail-rescaling study from a JSON config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=None, help="override the config seed")
    sp.add_argument("--strict", action="store_true", help="reject unknown config fields; exit 5 on empty windows")
    sp.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    sp.set_defaults(func=cmd_tail_study)

    sp = sub.add_parser("example-config", help="print the bundled example study config")
    sp.set_defaults(func=cmd_example_config)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
