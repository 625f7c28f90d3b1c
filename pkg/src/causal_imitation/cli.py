"""Command-line harness.

Subcommands: ``check`` (graphical verdict), ``backdoor``, ``surrogates``,
``instruments`` (enumerations), ``imitate`` (full pipeline), ``simulate``
(dataset generation), ``experiment`` (bundled studies) and ``fixture``
(bundled example files).  Outputs are byte-deterministic for fixed flags
and seeds.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments, fixtures
from .diagram import CausalDiagram, PolicySpace, format_diagram, parse_diagram_text
from .enumerators import list_id_subspaces
from .errors import ParseError
from .identify import format_formula, identify_policy
from .imitate import (
    DEFAULT_TOLERANCE,
    graphical_verdict,
    imitate_pipeline,
    surrogate_candidates,
)
from .criteria import find_pi_backdoor
from .scm import (
    DiscreteSCM,
    JointTable,
    empirical_observational,
    format_scm,
    observational,
    parse_scm_file,
    sample,
)


def parse_distribution_text(text: str) -> JointTable:
    """Header of variable names, then one row of integer values plus the
    probability per configuration; all configurations must be present."""
    header: list[str] | None = None
    rows: dict[tuple[int, ...], float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if header is None:
            header = tokens
            continue
        if len(tokens) != len(header) + 1:
            raise ParseError(f"expected {len(header)} values plus a probability", lineno)
        try:
            config = tuple(int(t) for t in tokens[:-1])
            p = float(tokens[-1])
        except ValueError:
            raise ParseError("malformed row", lineno) from None
        if config in rows:
            raise ParseError(f"duplicate configuration {config}", lineno)
        rows[config] = p
    if header is None:
        raise ParseError("empty distribution file")
    order = sorted(range(len(header)), key=lambda i: header[i])
    variables = tuple(header[i] for i in order)
    if len(set(variables)) != len(variables):
        raise ParseError("duplicate variable in header")
    domains = tuple(max(c[i] for c in rows) + 1 for i in order)
    if math.prod(domains) != len(rows):
        raise ParseError("distribution file must enumerate every configuration")
    probs = np.zeros(domains)
    for config, p in rows.items():
        probs[tuple(config[i] for i in order)] = p
    return JointTable(variables, domains, probs)


def format_distribution(table: JointTable) -> str:
    lines = [" ".join(table.variables)]
    for config in np.ndindex(*table.domains):
        lines.append(" ".join(str(v) for v in config) + f" {float(table.probs[config]):.17g}")
    return "\n".join(lines) + "\n"


def _load_graph(value: str) -> tuple[CausalDiagram, PolicySpace | None, str | None]:
    if value in fixtures.DIAGRAM_TEXT:
        case = fixtures.diagram_fixture(value)
        return case.diagram, case.space, case.reward
    diagram, space = parse_diagram_text(Path(value).read_text())
    return diagram, space, None


def _load_scm(value: str) -> DiscreteSCM:
    if value in fixtures.SCM_DIAGRAM:
        return fixtures.scm_fixture(value)
    return parse_scm_file(value)


def _space_from_args(args, default_space: PolicySpace | None) -> PolicySpace:
    action = args.action or (default_space.action if default_space else None)
    if action is None:
        raise SystemExit("error: --action is required (no policy line in the graph)")
    if args.inputs is not None:
        return PolicySpace.create(action, args.inputs)
    if default_space is not None and default_space.action == action:
        return default_space
    return PolicySpace.create(action, ())


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_check(args) -> int:
    diagram, space0, reward0 = _load_graph(args.graph)
    space = _space_from_args(args, space0)
    reward = args.reward or reward0 or "Y"
    status, witness = graphical_verdict(diagram, space, reward)
    lines = [f"verdict {status}"]
    if witness is not None:
        zs = " ".join(sorted(witness)) or "-"
        lines.append(f"witness {zs}")
        lines.append(f"prescription pi({space.action}|{zs}) = P({space.action}|{zs})")
    _emit(args, "\n".join(lines) + "\n")
    return 0


def _cmd_backdoor(args) -> int:
    diagram, space0, reward0 = _load_graph(args.graph)
    space = _space_from_args(args, space0)
    reward = args.reward or reward0 or "Y"
    z = find_pi_backdoor(diagram, space, reward, minimal=args.minimal)
    _emit(args, ("admissible " + (" ".join(sorted(z)) or "-") if z is not None else "admissible none") + "\n")
    return 0


def _cmd_surrogates(args) -> int:
    diagram, space0, reward0 = _load_graph(args.graph)
    space = _space_from_args(args, space0)
    reward = args.reward or reward0 or "Y"
    lines = []
    for s in surrogate_candidates(diagram, space, reward):
        lines.append("surrogate " + (" ".join(sorted(s)) or "-"))
    _emit(args, "\n".join(lines) + ("\n" if lines else ""))
    return 0


def _cmd_instruments(args) -> int:
    diagram, space0, reward0 = _load_graph(args.graph)
    space = _space_from_args(args, space0)
    reward = args.reward or reward0 or "Y"
    lines = []
    g_obs = diagram.with_observed({reward})
    for subspace in list_id_subspaces(g_obs, space, {reward}):
        for s in surrogate_candidates(diagram, subspace, reward):
            formula = identify_policy(diagram, subspace, s)
            if formula is not None:
                lines.append(
                    "instrument surrogate " + (" ".join(sorted(s)) or "-")
                    + " subspace_inputs " + (" ".join(sorted(subspace.inputs)) or "-")
                    + " matching " + format_formula(formula)
                )
    _emit(args, "\n".join(lines) + ("\n" if lines else ""))
    return 0


def _cmd_imitate(args) -> int:
    diagram, space0, reward0 = _load_graph(args.graph)
    space = _space_from_args(args, space0)
    reward = args.reward or reward0 or "Y"
    tolerance = DEFAULT_TOLERANCE
    if args.dist:
        table = parse_distribution_text(Path(args.dist).read_text())
    elif args.scm:
        scm = _load_scm(args.scm)
        if args.samples:
            table = empirical_observational(scm, args.samples, np.random.SeedSequence(entropy=args.seed))
            tolerance = 3.0 / math.sqrt(args.samples)
        else:
            table = observational(scm)
    else:
        raise SystemExit("error: imitate needs --dist or --scm")
    result = imitate_pipeline(diagram, space, table, reward, tolerance)
    _emit(args, result.report())
    if args.strict and result.status in ("infeasible", "no-instrument-found"):
        return 1
    return 0


def _cmd_simulate(args) -> int:
    scm = _load_scm(args.scm)
    ds = sample(scm, args.n, args.seed)
    lines = ["\t".join(ds.variables)]
    for row in ds.rows:
        lines.append("\t".join(str(int(v)) for v in row))
    _emit(args, "\n".join(lines) + "\n")
    return 0


def _cmd_experiment(args) -> int:
    if args.study == "frontdoor-study":
        text = experiments.frontdoor_study(args.models, args.samples, args.seed, args.workers)
    else:
        text = experiments.highway_binary_report(args.samples or 10000, args.seed)
    _emit(args, text)
    return 0


def _cmd_fixture(args) -> int:
    if args.list:
        lines = [f"diagram {n}" for n in fixtures.diagram_names()]
        lines += [f"scm {n} (diagram {fixtures.SCM_DIAGRAM[n]})" for n in fixtures.scm_names()]
        _emit(args, "\n".join(lines) + "\n")
        return 0
    if not args.name:
        raise SystemExit("error: fixture needs --name or --list")
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if args.name in fixtures.DIAGRAM_TEXT:
        case = fixtures.diagram_fixture(args.name)
        path = out / f"{args.name}.graph"
        path.write_text(format_diagram(case.diagram, case.space))
        written.append(path)
    elif args.name in fixtures.SCM_DIAGRAM:
        scm = fixtures.scm_fixture(args.name)
        dname = fixtures.SCM_DIAGRAM[args.name]
        case = fixtures.diagram_fixture(dname)
        gpath = out / f"{dname}.graph"
        gpath.write_text(format_diagram(case.diagram, case.space))
        spath = out / f"{args.name}.scm"
        spath.write_text(format_scm(scm, gpath.name))
        written.extend([gpath, spath])
    else:
        raise SystemExit(f"error: no bundled fixture named {args.name!r}")
    sys.stdout.write("".join(f"wrote {p}\n" for p in written))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causal-imitation",
        description="Imitability analysis and policy synthesis for causal diagrams",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def graph_flags(p):
        p.add_argument("--graph", required=True, help="graph file or bundled diagram name")
        p.add_argument("--action", help="action node (default: graph policy line)")
        p.add_argument("--inputs", nargs="*", help="policy input nodes")
        p.add_argument("--reward", help="reward node (default: Y)")
        p.add_argument("--out", help="output file (default: stdout)")

    p = sub.add_parser("check", help="graphical imitability verdict")
    graph_flags(p)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("backdoor", help="canonical policy-backdoor set")
    graph_flags(p)
    p.add_argument("--minimal", action="store_true", help="greedily minimize the set")
    p.set_defaults(func=_cmd_backdoor)

    p = sub.add_parser("surrogates", help="minimal surrogate sets")
    graph_flags(p)
    p.set_defaults(func=_cmd_surrogates)

    p = sub.add_parser("instruments", help="surrogate/subspace instrument pairs")
    graph_flags(p)
    p.set_defaults(func=_cmd_instruments)

    p = sub.add_parser("imitate", help="run the full imitation pipeline")
    graph_flags(p)
    p.add_argument("--dist", help="observational distribution file")
    p.add_argument("--scm", help="model file or bundled model name")
    p.add_argument("--samples", type=int, default=0, help="empirical table size (0 = exact)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict", action="store_true", help="nonzero exit when infeasible")
    p.set_defaults(func=_cmd_imitate)

    p = sub.add_parser("simulate", help="draw observed rows from a model")
    p.add_argument("--scm", required=True, help="model file or bundled model name")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("experiment", help="bundled studies")
    p.add_argument("study", choices=["frontdoor-study", "highway-binary"])
    p.add_argument("--models", type=int, default=1000)
    p.add_argument("--samples", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("fixture", help="bundled example files")
    p.add_argument("--list", action="store_true")
    p.add_argument("--name")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=_cmd_fixture)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and args.n < 1:
        parser.error("--n must be >= 1")
    try:
        return args.func(args)
    except ParseError as exc:
        sys.stderr.write(f"parse error: {exc}\n")
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
