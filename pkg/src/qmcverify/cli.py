"""Command line interface.

Exit status of ``check``: 0 true, 1 false, 2 unknown, 3 bad input,
4 analysis failure (for instance a chain that is not periodically stable).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import checker, models, spectral
from .linalg import QMC, Tolerances
from .mltl import AtomicProp, FormulaSyntaxError, UnknownPropositionError, parse, probability
from .modelfile import ModelFileError, load_model, save_model
from .neighborhood import Mode

EXIT_TRUE, EXIT_FALSE, EXIT_UNKNOWN, EXIT_INPUT, EXIT_ANALYSIS = 0, 1, 2, 3, 4

_EXIT_FOR = {checker.Value.TRUE: EXIT_TRUE, checker.Value.FALSE: EXIT_FALSE, checker.Value.UNKNOWN: EXIT_UNKNOWN}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would read as "unknown".
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("model", nargs="?", help="model file (JSON)")
    p.add_argument("--builtin", choices=["qwalk", "cwalk"], help="use a built-in walk instead of a file")
    p.add_argument("--d", type=int, default=20, help="lattice size for built-in walks")
    p.add_argument("--start", type=int, default=1, help="start position for built-in walks")
    p.add_argument("--dir", choices=["L", "R"], default="R", help="initial coin for the quantum walk")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--qmax", type=int, default=64, help="largest denominator for rational phases")
    for f in dataclasses.fields(Tolerances):
        p.add_argument(f"--tol-{f.name}", type=float, default=f.default, metavar="X")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qmcverify", description="Approximate MLTL model checking of quantum Markov chains.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    check = sub.add_parser("check", help="check a formula")
    _model_args(check)
    check.add_argument("--formula", required=True)
    check.add_argument("--epsilon", type=float, default=0.5)
    check.add_argument("--max-halvings", type=int, default=8)
    check.add_argument("--neighborhood", choices=[m.value for m in Mode], default=Mode.CHEAP.value)
    check.add_argument("--k-source", choices=[k.value for k in checker.KSource], default=checker.KSource.MIN.value)
    check.add_argument("--no-tighten", action="store_true", help="keep the full distance-based prefix")
    check.add_argument("--export-automata", type=Path, metavar="DIR")

    spec = sub.add_parser("spectrum", help="spectral and stability report")
    _model_args(spec)

    traj = sub.add_parser("trajectory", help="measurement probabilities along the trajectory")
    _model_args(traj)
    traj.add_argument("--steps", "-n", type=int, default=100)
    traj.add_argument("--observables", default="", help="comma-separated proposition names (default: all)")

    exp = sub.add_parser("export-model", help="write a built-in model as a model file")
    _model_args(exp)
    exp.add_argument("--out", type=Path, required=True)
    return parser


def _tolerances(args: argparse.Namespace) -> Tolerances:
    return Tolerances(**{f.name: getattr(args, f"tol_{f.name}") for f in dataclasses.fields(Tolerances)})


def load_source(args: argparse.Namespace) -> tuple[QMC, list[AtomicProp]]:
    if args.builtin and args.model:
        raise UsageError("give either a model file or --builtin, not both")
    if args.builtin:
        spec = models.WalkSpec(args.d, args.start, args.dir)
        if args.builtin == "qwalk":
            return models.quantum_walk(spec), models.builtin_walk_aps(args.d)
        return models.classical_walk(spec), models.builtin_walk_aps(args.d, coin=False)
    if not args.model:
        raise UsageError("a model file or --builtin is required")
    return load_model(args.model)


def _print_verdict(v: checker.Verdict) -> None:
    print(f"verdict: {v.value.value}")
    print(f"epsilon: {v.epsilon:g}")
    print(f"period: {v.period}")
    print(f"K_eps: {v.k_eps} (distance bound {v.k_distance} from {v.k_source}; "
          f"analytic {v.k_analytic}, simulated {v.k_simulated})")
    print("cycle: " + " ".join(str(s) for s in v.cycle))
    if v.counterexample is not None:
        print(f"counterexample: {v.counterexample}")
    if len(v.history) > 1:
        print("history: " + ", ".join(f"{e:g}:{val.value}" for e, val in v.history))


def cmd_check(args: argparse.Namespace) -> int:
    g, aps = load_source(args)
    phi = parse(args.formula, aps)
    opts = checker.CheckOptions(
        mode=Mode(args.neighborhood),
        q_max=args.qmax,
        tol=_tolerances(args),
        k_source=checker.KSource(args.k_source),
        tighten_prefix=not args.no_tighten,
        export_dir=args.export_automata,
    )
    verdict = checker.model_check_refined(g, aps, phi, args.epsilon, args.max_halvings, opts)
    if args.json:
        print(json.dumps(verdict.to_json()))
    else:
        _print_verdict(verdict)
    return _EXIT_FOR[verdict.value]


def cmd_spectrum(args: argparse.Namespace) -> int:
    g, _ = load_source(args)
    tol = _tolerances(args)
    sd = spectral.decompose(g.transition, tol)
    report = spectral.check_stability(g, args.qmax, tol, sd)
    summary = spectral.stability_summary(sd, report)
    if args.json:
        print(json.dumps(summary))
        return 0
    mods = summary["eigenvalue_moduli"]
    print(f"dimension: {sd.dim} ({len(mods)} eigenvalues)")
    print("largest moduli: " + " ".join(f"{m:.10f}" for m in mods[:8]))
    print(f"peripheral eigenvalues: {sd.n_peripheral}")
    for ph in report.contributing_phases:
        rat = "irrational?" if ph.rational is None else f"{ph.rational[0]}/{ph.rational[1]}"
        print(f"  phase {ph.phase:+.12f}  ~ {rat}  (weight {ph.weight:.3g})")
    print(f"omega: {sd.omega:.12g}  d_omega: {sd.d_omega}  cond: {sd.cond_number:.4g}  nilpotent index: {sd.nil_index}")
    print(f"stability: {report.stable.value}" + (f", period {report.period}" if report.period else ""))
    if report.witness:
        print(f"witness: {report.witness}")
    return 0


def cmd_trajectory(args: argparse.Namespace) -> int:
    g, aps = load_source(args)
    tol = _tolerances(args)
    names = [n for n in args.observables.split(",") if n]
    by_name = {a.name: a for a in aps}
    missing = [n for n in names if n not in by_name]
    if missing:
        raise UsageError(f"unknown observable(s): {', '.join(missing)}")
    chosen = [by_name[n] for n in names] if names else aps
    rows = []
    for step, rho in enumerate(checker.trajectory(g, args.steps, check=False)):
        rows.append([step] + [probability(rho, a.operator, tol) for a in chosen])
    header = ["step"] + [a.name for a in chosen]
    if args.json:
        print(json.dumps([dict(zip(header, r)) for r in rows]))
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([r[0]] + [repr(float(x)) for x in r[1:]])
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    g, aps = load_source(args)
    save_model(args.out, g, aps)
    return 0


COMMANDS = {"check": cmd_check, "spectrum": cmd_spectrum, "trajectory": cmd_trajectory, "export-model": cmd_export}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    np.set_printoptions(linewidth=120)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ModelFileError, FormulaSyntaxError, UnknownPropositionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (spectral.NotStableError, spectral.DecompositionError, spectral.TruncationUnavailable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
