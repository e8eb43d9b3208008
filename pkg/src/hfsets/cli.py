"""Command-line interface: ``hfsets <command> [options]``.

Exit status is 0 on success, 1 on usage, parse or precondition errors, and
2 when a checked property fails (a fuzz disagreement or a non-absolute
bounded instance).  Errors go to stderr as one line,
``error[E_CODE]: message``.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path
from typing import Callable, Sequence

from . import absoluteness, collapse, definability, evaluation, kernel, logic, metatheory
from .evaluation import Environment, Universe

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


class CliError(Exception):
    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error[E_USAGE]: {message}\n")
        raise SystemExit(EXIT_ERROR)


# -- input helpers -----------------------------------------------------------

_UNIVERSE_RE = re.compile(r"([VL])([0-9]+)(?:\[(.+)\])?\Z")


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError("E_IO", f"cannot read {path}: {exc.strerror}") from None


def _set(text: str, what: str = "set literal") -> kernel.HFSet:
    try:
        return kernel.parse_set(text.strip())
    except kernel.SetLiteralError as exc:
        raise CliError("E_SET_LITERAL", f"bad {what} {text!r}: {exc}") from None


def _carrier(desc: str) -> tuple[kernel.HFSet, kernel.HFSet | None]:
    """Carrier and, for ``L<n>[file]``, the predicate read from the file."""
    desc = desc.strip()
    m = _UNIVERSE_RE.match(desc)
    if not m:
        if desc.startswith("{"):
            return _set(desc, "universe literal"), None
        raise CliError("E_UNIVERSE", f"universe must be V<n>, L<n>[file] or a set literal, got {desc!r}")
    kind, n, path = m.group(1), int(m.group(2)), m.group(3)
    if kind == "V":
        if path is not None:
            raise CliError("E_UNIVERSE", "V<n> takes no predicate file")
        return kernel.v_stage(n), None
    a = _set(_read(path), f"predicate in {path}") if path else kernel.empty()
    return definability.l_stage(n, a), a


def _universe(desc: str, pred_text: str | None) -> Universe:
    carrier, a = _carrier(desc)
    if pred_text is not None:
        a = _set(pred_text, "predicate")
    pred = kernel.make_set([x for x in a.children if x in carrier], store=carrier.store) if a else None
    return Universe(carrier, pred)


def _assignments(items: Sequence[str] | None, what: str) -> dict[str, kernel.HFSet]:
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        name = name.strip().lstrip("$")
        if not sep or not name:
            raise CliError("E_USAGE", f"{what} must look like NAME=LITERAL, got {item!r}")
        out[name] = _set(value, f"value of {name}")
    return out


def _formula_text(args) -> str:
    if args.formula is not None:
        return args.formula
    if args.formula_file is not None:
        return _read(args.formula_file)
    raise CliError("E_USAGE", "give --formula or --formula-file")


def _formula(args) -> logic.Formula:
    text = _formula_text(args)
    try:
        return logic.parse(text)
    except logic.ParseError as exc:
        raise CliError("E_PARSE", str(exc)) from None
    except kernel.SetLiteralError as exc:
        raise CliError("E_SET_LITERAL", str(exc)) from None


def _env(args) -> Environment:
    return Environment(_assignments(args.var, "--var"), _assignments(args.param, "--param"))


# -- commands ----------------------------------------------------------------

Report = tuple[int, str, dict]


def cmd_eval(args) -> Report:
    f = _formula(args)
    u = _universe(args.universe, args.pred)
    value = evaluation.evaluate(f, _env(args), u, strict=args.strict)
    return EXIT_OK, "true" if value else "false", {"value": value, "formula": logic.to_text(f)}


def cmd_build(args) -> Report:
    carrier, a = _carrier(args.stage)
    if args.witnesses:
        m = _UNIVERSE_RE.match(args.stage.strip())
        if not m or m.group(1) != "L" or int(m.group(2)) == 0:
            raise CliError("E_USAGE", "--witnesses needs a stage L<n> with n >= 1")
        n = int(m.group(2))
        _, report = definability.constructible_hierarchy(n, a)[-1]
        data = {"stage": args.stage, "exhausted": report.exhausted, "size": len(report.subsets)}
        return EXIT_OK, report.to_text().rstrip("\n"), data
    data = {"stage": args.stage, "size": len(carrier)}
    if args.format == "code":
        if hasattr(sys, "set_int_max_str_digits"):
            # V_5 has a 19729-digit code.
            sys.set_int_max_str_digits(0)
        text = str(carrier.code)
        data["code"] = text
    elif args.format == "size":
        text = str(len(carrier))
    else:
        text = kernel.format_set(carrier)
        data["literal"] = text
    return EXIT_OK, text, data


def cmd_collapse(args) -> Report:
    try:
        g = collapse.read_edge_list(_read(args.graph))
    except collapse.EdgeListError as exc:
        raise CliError("E_EDGE_LIST", str(exc)) from None
    witness = collapse.check_well_founded(g)
    if witness is not None:
        raise CliError("E_NOT_WELL_FOUNDED", witness.describe())
    ext = collapse.check_extensional(g)
    if ext is not None:
        raise CliError("E_NOT_EXTENSIONAL", ext.describe())
    result = collapse.mostowski_collapse(g)
    rows = [f"{node}\t{kernel.format_set(s)}" for node, s in enumerate(result.pi)]
    rows.append(f"image\t{kernel.format_set(result.image)}")
    data = {
        "pi": [kernel.format_set(s) for s in result.pi],
        "image": kernel.format_set(result.image),
    }
    return EXIT_OK, "\n".join(rows), data


def cmd_encode(args) -> Report:
    s = _set(args.set)
    if args.close:
        s = kernel.transitive_closure(s)
    try:
        g, f = collapse.encode_as_graph(s, args.seed)
    except collapse.NotTransitiveError as exc:
        raise CliError("E_NOT_TRANSITIVE", str(exc)) from None
    lines = [f"# {u} = {kernel.format_set(x)}" for u, x in enumerate(f)]
    text = "\n".join(lines) + "\n" + collapse.write_edge_list(g)
    data = {
        "nodes": g.node_count,
        "edges": sorted(list(e) for e in g.edges),
        "bijection": [kernel.format_set(x) for x in f],
    }
    return EXIT_OK, text.rstrip("\n"), data


def cmd_absolute(args) -> Report:
    f = _formula(args)
    outer = _universe(args.outer, args.pred)
    inner_carrier, _ = _carrier(args.inner)
    inner = outer.restrict(inner_carrier) if kernel.is_subset(inner_carrier, outer.carrier) else Universe(inner_carrier)
    try:
        verdict = absoluteness.check_absolute(f, _env(args), inner, outer)
    except absoluteness.AbsolutenessPreconditionError as exc:
        first = exc.violations[0]
        detail = "; ".join([first.message] + [f"{v.code}: {v.message}" for v in exc.violations[1:]])
        raise CliError(first.code, detail) from None
    data = {"inner": verdict.inner_value, "outer": verdict.outer_value, "agree": verdict.agree}
    text = f"inner={str(verdict.inner_value).lower()} outer={str(verdict.outer_value).lower()} " + (
        "agree" if verdict.agree else "DISAGREE"
    )
    return (EXIT_OK if verdict.agree else EXIT_VIOLATION), text, data


def cmd_fuzz(args) -> Report:
    report = absoluteness.fuzz_absoluteness(
        args.seed, args.trials, max_depth=args.max_depth, max_stage=args.max_stage,
        workers=args.workers, verbose=args.verbose,
    )
    data = {"seed": args.seed, **report.to_dict()}
    return (EXIT_OK if report.ok else EXIT_VIOLATION), report.to_text(args.verbose).rstrip("\n"), data


def cmd_complete(args) -> Report:
    try:
        theory = metatheory.parse_theory(_read(args.theory))
    except logic.ParseError as exc:
        raise CliError("E_PARSE", str(exc)) from None
    verdict = metatheory.check_complete_upto(theory, args.size_cap, args.depth_cap)
    data: dict = {"size_cap": args.size_cap, "depth_cap": args.depth_cap}
    if isinstance(verdict, metatheory.Complete):
        data.update(verdict="complete", models=len(verdict.models))
    elif isinstance(verdict, metatheory.Inconsistent):
        data.update(verdict="inconsistent")
    else:
        data.update(
            verdict="counterexample",
            sentence=metatheory.fo_to_text(verdict.sentence),
            model_true=metatheory.format_structure(verdict.model_true),
            model_false=metatheory.format_structure(verdict.model_false),
        )
    text = verdict.describe()
    if isinstance(verdict, metatheory.Counterexample):
        text += "\n-- model where it holds\n" + metatheory.format_structure(verdict.model_true)
        text += "-- model where it fails\n" + metatheory.format_structure(verdict.model_false)
    return EXIT_OK, text.rstrip("\n"), data


def cmd_translate(args) -> Report:
    m = metatheory.parse_structure(_read(args.structure))
    text = args.sentence if args.sentence is not None else _read(args.sentence_file)
    try:
        phi = metatheory.parse_fo(text, m.signature)
    except logic.ParseError as exc:
        raise CliError("E_PARSE", str(exc)) from None
    sigma = metatheory.sat_to_bounded(phi, m.signature)
    enc = metatheory.encode_structure(m)
    direct = metatheory.fo_evaluate(phi, m)
    via_sets = evaluation.evaluate(sigma, Environment({}, {"M": enc}), metatheory.translation_universe(enc))
    data = {
        "formula": logic.to_text(sigma),
        "bounded": logic.is_bounded(sigma),
        "encoding": kernel.format_set(enc),
        "fo_value": direct,
        "set_value": via_sets,
    }
    lines = [logic.to_text(sigma)]
    if args.check:
        lines.append(f"# M = {kernel.format_set(enc)}")
        lines.append(f"# direct={str(direct).lower()} bounded={str(via_sets).lower()}")
    status = EXIT_OK if direct == via_sets else EXIT_VIOLATION
    return status, "\n".join(lines), data


# -- wiring ------------------------------------------------------------------

def _formula_options(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group()
    group.add_argument("--formula", help="formula text")
    group.add_argument("--formula-file", help="file holding the formula text")
    p.add_argument("--var", action="append", metavar="NAME=SET", help="value of a free variable")
    p.add_argument("--param", action="append", metavar="NAME=SET", help="value of a $parameter")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hfsets", description="Hereditarily finite sets and bounded formulas.")
    parser.add_argument("--json", action="store_true", help="emit a JSON report")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", help="evaluate a formula over a universe")
    p.add_argument("--universe", required=True, help="V<n>, L<n>[file] or a set literal")
    p.add_argument("--pred", help="set literal interpreting A (cut down to the carrier)")
    p.add_argument("--strict", action="store_true", help="require all values to lie in the carrier")
    _formula_options(p)
    p.set_defaults(run=cmd_eval)

    p = sub.add_parser("build", help="print a stage V<n> or L<n>[file]")
    p.add_argument("--stage", required=True)
    p.add_argument("--format", choices=("literal", "code", "size"), default="literal")
    p.add_argument("--witnesses", action="store_true", help="print defining formulas for L<n>")
    p.set_defaults(run=cmd_build)

    p = sub.add_parser("collapse", help="collapse a digraph given as an edge list")
    p.add_argument("--graph", required=True, help="edge-list file ('nodes N' then 'u v' lines)")
    p.set_defaults(run=cmd_collapse)

    p = sub.add_parser("encode", help="lay a transitive set out as an edge list")
    p.add_argument("--set", required=True, help="set literal")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--close", action="store_true", help="take the transitive closure first")
    p.set_defaults(run=cmd_encode)

    p = sub.add_parser("absolute", help="check one bounded formula between two universes")
    p.add_argument("--inner", required=True)
    p.add_argument("--outer", required=True)
    p.add_argument("--pred", help="A in the outer universe; the inner one gets its restriction")
    _formula_options(p)
    p.set_defaults(run=cmd_absolute)

    p = sub.add_parser("fuzz", help="seeded absoluteness harness")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--max-depth", type=int, default=5)
    p.add_argument("--max-stage", type=int, default=absoluteness.MAX_OUTER_STAGE)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(run=cmd_fuzz)

    p = sub.add_parser("complete", help="completeness of a theory up to caps")
    p.add_argument("--theory", required=True, help="theory file ('sig ...' then sentences)")
    p.add_argument("--size-cap", type=int, default=3)
    p.add_argument("--depth-cap", type=int, default=3)
    p.set_defaults(run=cmd_complete)

    p = sub.add_parser("translate", help="FO sentence to a bounded formula about $M")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--sentence")
    group.add_argument("--sentence-file")
    p.add_argument("--structure", required=True, help="structure file ('sig', 'size', tuples)")
    p.add_argument("--check", action="store_true", help="also print both truth values")
    p.set_defaults(run=cmd_translate)
    return parser


_ERROR_CODES: list[tuple[type, str | Callable]] = [
    (CliError, lambda e: e.code),
    (evaluation.EvaluationError, lambda e: e.code),
    (logic.ParseError, "E_PARSE"),
    (kernel.SetLiteralError, "E_SET_LITERAL"),
    (kernel.CapacityError, "E_CAPACITY"),
    (logic.EnumerationBudgetError, "E_BUDGET"),
    (metatheory.SignatureError, "E_SIGNATURE"),
    (metatheory.StructureFormatError, "E_STRUCTURE"),
    (collapse.EdgeListError, "E_EDGE_LIST"),
]


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    """Run one command; returns the exit status."""
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        status, text, data = args.run(args)
    except Exception as exc:
        for kind, code in _ERROR_CODES:
            if isinstance(exc, kind):
                code = code(exc) if callable(code) else code
                break
        else:
            if not isinstance(exc, ValueError):
                raise
            code = "E_INVALID"
        message = str(exc).replace("\n", " ")
        if args.json:
            out.write(json.dumps({"ok": False, "error": code, "message": message}, sort_keys=True) + "\n")
        err.write(f"error[{code}]: {message}\n")
        return EXIT_ERROR
    if args.json:
        out.write(json.dumps({"ok": status == EXIT_OK, "command": args.command, **data}, sort_keys=True) + "\n")
    else:
        out.write(text + "\n")
    return status


def main(argv: Sequence[str] | None = None) -> None:
    raise SystemExit(run(argv))


if __name__ == "__main__":
    main()
