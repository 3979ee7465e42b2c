"""Command-line front end: ``cepp <command> --model FILE ...``."""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

import numpy as np

from . import cep, equilibria, lyapunov, ode, thresholds
from .io import csv_text, dumps_json, manifest, write_csv, write_json
from .model import ModelValidationError, load_model, model_to_dict, validate_assumptions

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2


def parse_node(text: str, n_strains: int) -> tuple:
    """``DFE``, ``E[1,2]``, ``1,2`` -> zero-based present strains."""
    t = text.strip()
    if t.upper() in ("DFE", "E0", "E[]", ""):
        return ()
    m = re.fullmatch(r"(?:E\[)?\s*([\d,\s]+?)\s*\]?", t)
    if not m:
        raise ValueError(f"cannot parse node {text!r}; use DFE, E[1] or E[1,2]")
    idx = tuple(sorted({int(p) - 1 for p in m.group(1).split(",") if p.strip()}))
    if any(not 0 <= j < n_strains for j in idx):
        raise ValueError(f"node {text!r} names a strain outside 1..{n_strains}")
    return idx


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.replace(";", ",").split(",") if v.strip()])


def _emit(args, name: str, text: str):
    if args.out:
        p = Path(args.out) / name
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
        return p
    sys.stdout.write(text)
    return None


def _outputs(args, *names):
    return [str(Path(args.out) / n) for n in names] if args.out else []


# ---------------------------------------------------------------------------
# commands


def _equilibrium_entry(model, node):
    E = node.equilibrium
    d = {
        "node": E.label,
        "present": [j + 1 for j in E.present],
        "exists": E.exists,
        "constructed": E.constructed,
        "near_nonhyperbolic": E.near_nonhyperbolic,
        "conditions": [c.to_dict() for c in E.conditions],
        "note": E.note,
    }
    if E.exists:
        d["state"] = dict(zip(model.species_names(), E.state.tolist()))
        d["invasion"] = {str(j + 1): v for j, v in node.invasion.items()}
        al = lyapunov.perron_alignment(model, E)
        d["alignment_rank"] = al.numerical_rank
    return d


def cmd_analyze(args) -> int:
    model = load_model(args.model)
    rep = cep.classify_region(model, scan_samples=args.samples, seed=args.seed)
    lattice = cep.build_lattice(model) if model.n_strains <= cep.STRAIN_CAP else {}
    val = validate_assumptions(model)
    basic = thresholds.basic_reproduction_numbers(model)
    report = {
        "manifest": manifest("analyze", args.model, {"samples": args.samples}, args.seed, _outputs(args, "report.json")),
        "model": model_to_dict(model),
        "validation": [
            {"name": c.name, "strain": None if c.strain is None else c.strain + 1, "passed": c.passed,
             "witness": c.witness, "note": c.note}
            for c in val.checks
        ],
        "reproduction": {f"R{j + 1}": r for j, r in enumerate(basic)},
        "slopes": {f"R{j + 1}": float(r) for j, r in enumerate(model.slopes())},
        "equilibria": [
            _equilibrium_entry(model, lattice[k])
            for k in sorted(lattice, key=lambda a: (-len(a), sorted(a)))
        ],
        "classification": rep.to_dict(),
    }
    text = dumps_json(report)
    if args.format == "json":
        _emit(args, "report.json", text)
    else:
        if args.out:
            _emit(args, "report.json", text)
        lines = [f"model: {args.model}"]
        lines += [f"  R{j + 1} = {r:.10g}" for j, r in enumerate(basic)]
        lines.append(f"  attractor: {rep.attractor}  region: {rep.region}  certificate: {rep.certificate}")
        for q in rep.inequalities:
            lines.append(f"    {q.quantity} {q.direction} {q.threshold:g}  (value {q.value:.10g})")
        if rep.note:
            lines.append(f"  note: {rep.note}")
        sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_partition(args) -> int:
    model = load_model(args.model)
    if not args.vary:
        raise ValueError("partition needs at least one --vary NAME=LO:HI:STEPS")
    if len(args.vary) > 2:
        raise ValueError("at most two --vary parameters")
    table = cep.partition_sweep(model, args.vary)
    meta = manifest("partition", args.model, {"vary": args.vary}, args.seed, _outputs(args, "partition.csv"))
    if args.format == "json":
        rows = [dict(zip(table.header(), r)) for r in table.rows]
        _emit(args, "partition.json", dumps_json({"manifest": meta, "rows": rows}))
    else:
        _emit(args, "partition.csv", csv_text(table.header(), table.rows, meta))
    return EXIT_OK


def cmd_verify_lyap(args) -> int:
    model = load_model(args.model)
    present = parse_node(args.node, model.n_strains)
    E = equilibria.face_equilibrium(model, present)
    if not E.exists:
        raise ValueError(f"equilibrium {E.label} does not exist for this model")
    cand = lyapunov.build_candidate(model, E, args.delta)
    rep, X, vals = lyapunov.verify_nonpositivity(cand, args.samples, args.seed, keep_samples=True)
    params = {"node": E.label, "delta": args.delta, "samples": args.samples}
    meta = manifest("verify-lyap", args.model, params, args.seed, _outputs(args, "scan.csv", "verify.json"))
    summary = {"manifest": meta, "candidate": cand.describe(), "report": rep.to_dict()}
    if args.format == "json":
        _emit(args, "verify.json", dumps_json(summary))
    else:
        terms = lyapunov.two_block_terms(cand, X)
        header = ["sample_index"] + model.species_names() + ["V", "Vdot"]
        cols = [np.arange(len(X)), X, vals]
        if terms is not None:
            header += ["T1", "T2", "T3", "T4"]
            cols.append(np.column_stack([terms[k] for k in ("T1", "T2", "T3", "T4")]))
        rows = [[int(r[0])] + list(r[1:]) for r in np.column_stack(cols).tolist()]
        if args.out:
            write_csv(Path(args.out) / "scan.csv", header, rows, meta)
            write_json(Path(args.out) / "verify.json", summary)
        else:
            sys.stdout.write(csv_text(header, rows, meta))
    sys.stderr.write(
        f"{E.label} delta={args.delta:g}: {rep.violation_count} violations / {rep.sample_count} samples, "
        f"max Vdot = {rep.max_vdot:.6g}\n"
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    if args.initial is None:
        x0 = np.full(model.dim, 0.1 * model.s0 / model.dim)
        x0[0] = 0.5 * model.s0
    else:
        x0 = _parse_vector(args.initial)
    cand = None
    if args.node is not None:
        E = equilibria.face_equilibrium(model, parse_node(args.node, model.n_strains))
        if E.exists:
            cand = lyapunov.build_candidate(model, E, args.delta)
    res = ode.integrate(model, x0, args.T, candidate=cand)
    header = ["t"] + model.species_names() + (["V"] if cand is not None else [])
    cols = [res.times, res.states] + ([res.lyapunov] if cand is not None else [])
    rows = np.column_stack(cols).tolist()
    meta = manifest("simulate", args.model, {"initial": x0.tolist(), "T": args.T, "node": args.node},
                    args.seed, _outputs(args, "orbit.csv"))
    if args.format == "json":
        _emit(args, "orbit.json", dumps_json({"manifest": meta, "header": header, "rows": rows}))
    else:
        _emit(args, "orbit.csv", csv_text(header, rows, meta))
    return EXIT_OK


def cmd_siphons(args) -> int:
    model = load_model(args.model)
    sets = cep.model_siphons(model)
    meta = manifest("siphons", args.model, {}, None, _outputs(args, "siphons.json"))
    if args.format == "csv":
        rows = [[k + 1, " ".join(s.names)] for k, s in enumerate(sets)]
        _emit(args, "siphons.csv", csv_text(["siphon", "species"], rows, meta))
    else:
        _emit(args, "siphons.json", dumps_json({"manifest": meta, "minimal_siphons": [list(s.names) for s in sets]}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cepp", description="Lyapunov certificates and exclusion partitions for multi-strain models")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt="json"):
        sp.add_argument("--model", required=True, help="model definition (JSON)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output directory (default: stdout)")
        sp.add_argument("--format", choices=("json", "csv", "text"), default=fmt)

    sp = sub.add_parser("analyze", help="equilibria, thresholds, walk and certificate")
    common(sp, "text")
    sp.add_argument("--samples", type=int, default=0, help="Vdot samples for the terminal candidate")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("partition", help="classify a 1-2 parameter grid")
    common(sp, "csv")
    sp.add_argument("--vary", action="append", default=[], metavar="NAME=LO:HI:STEPS")
    sp.set_defaults(func=cmd_partition)

    sp = sub.add_parser("verify-lyap", help="sample Vdot of a candidate")
    common(sp, "csv")
    sp.add_argument("--node", default="DFE", help="DFE, E[1], E[1,2], ...")
    sp.add_argument("--delta", type=float, default=0.0)
    sp.add_argument("--samples", type=int, default=100_000)
    sp.set_defaults(func=cmd_verify_lyap)

    sp = sub.add_parser("simulate", help="integrate one orbit")
    common(sp, "csv")
    sp.add_argument("--initial", help="comma-separated initial state")
    sp.add_argument("--T", type=float, default=100.0)
    sp.add_argument("--node", help="attach the candidate at this node")
    sp.add_argument("--delta", type=float, default=0.0)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("siphons", help="minimal siphons of the stoichiometric network")
    common(sp, "json")
    sp.set_defaults(func=cmd_siphons)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ModelValidationError as exc:
        sys.stderr.write(f"cepp: invalid model: {exc}\n")
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        sys.stderr.write(f"cepp: {exc}\n")
        return EXIT_VALIDATION
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        sys.stderr.write(f"cepp: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
