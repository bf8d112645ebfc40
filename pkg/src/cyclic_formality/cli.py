"""Command-line driver: graph enumeration, weights, verification suites,
star products and trace integrands.  Every command prints schema-versioned
JSON (sorted keys, rationals as "num/den")."""

from __future__ import annotations

import argparse
import configparser
import json
import re
import sys
from fractions import Fraction

from . import __version__
from . import assembly as asm
from .checks import SUITES, RunConfig, run_suite
from .gradedcore import MultiVector, PolyFunction, theta
from .graphs import AdmissibleGraph, canonical_key, enumerate_graphs, validate
from .weights import RNG_NAME, exact_weight, mc_weight

SCHEMA = "cyclic-formality-report/1"

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_INVALID_GRAPH = 3

DEFAULTS = {"d": 2, "samples": 200_000, "seed": 0, "tol_mult": 1.0, "trials": 20, "max_deg": 0}
_INT_KEYS = ("d", "samples", "seed", "trials", "max_deg")


class UsageError(Exception):
    pass


# -- small parsers ---------------------------------------------------------------------

_TERM = re.compile(r"\s*([+-]?)\s*([^+-]+)")


def parse_poly(text: str, d: int) -> PolyFunction:
    """Parse sums of products like ``3/2*x1^2*x3 - x2 + 1`` (variables x1..xd)."""
    text = text.strip()
    if not text:
        raise UsageError("empty polynomial")
    out = PolyFunction(d)
    pos = 0
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos:
            raise UsageError(f"cannot parse polynomial {text!r}")
        sign = -1 if m.group(1) == "-" else 1
        coeff = Fraction(sign)
        exps = [0] * d
        for factor in m.group(2).split("*"):
            factor = factor.strip()
            fm = re.fullmatch(r"x(\d+)(?:\^(\d+))?", factor)
            if fm:
                i = int(fm.group(1)) - 1
                if not 0 <= i < d:
                    raise UsageError(f"variable {factor} out of range for d={d}")
                exps[i] += int(fm.group(2) or 1)
                continue
            try:
                coeff *= Fraction(factor)
            except (ValueError, ZeroDivisionError):
                raise UsageError(f"bad factor {factor!r} in {text!r}") from None
        out = out + PolyFunction(d, {tuple(exps): coeff})
        pos = m.end()
    return out


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip() != ""]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None
    if any(v < 0 for v in vals):
        raise UsageError("out-degrees must be non-negative")
    return vals


# -- configuration -----------------------------------------------------------------------

def read_config_file(path: str) -> dict:
    """``key = value`` lines; '#' comments; keys as the long flag names."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_string("[run]\n" + fh.read())
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    out = {}
    for key, val in parser["run"].items():
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"unknown config key {key!r}")
        out[key] = val
    return out


def build_config(args) -> RunConfig:
    """Defaults, then config file, then flags (flags win)."""
    vals: dict = dict(DEFAULTS)
    if getattr(args, "config", None):
        vals.update(read_config_file(args.config))
    for key in DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            vals[key] = flag
    try:
        for key in _INT_KEYS:
            vals[key] = int(vals[key])
        vals["tol_mult"] = float(vals["tol_mult"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if vals["d"] < 1 or vals["samples"] < 1 or vals["trials"] < 0 or vals["max_deg"] < 0:
        raise UsageError("d and samples must be positive; trials and max-deg non-negative")
    if vals["tol_mult"] <= 0:
        raise UsageError("tol-mult must be positive")
    return RunConfig(**vals)


def _envelope(command: str, cfg: RunConfig | None, body: dict) -> dict:
    out = {"schema": SCHEMA, "tool": "cyclic-formality", "tool_version": __version__,
           "command": command, "rng": RNG_NAME}
    if cfg is not None:
        out["config"] = cfg.to_dict()
    out.update(body)
    return out


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _emit(text: str, out_path: str | None):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- commands ----------------------------------------------------------------------------

def cmd_graphs(args, cfg: RunConfig) -> int:
    k = _int_list(args.k)
    if args.m < 1:
        raise UsageError("-m counts boundary points including the basepoint; needs m >= 1")
    graphs = enumerate_graphs(k, args.m, cfg.max_deg)
    if args.dot:
        _emit("\n".join(g.to_dot() for g in graphs) + "\n", args.out)
        return EXIT_OK
    body = {"k": k, "m": args.m, "max_deg": cfg.max_deg, "count": len(graphs),
            "graphs": [dict(g.to_dict(), key=canonical_key(g).decode()) for g in graphs]}
    _emit(dumps(_envelope("graphs", cfg, body)), args.out)
    return EXIT_OK


def _load_graph(args) -> AdmissibleGraph:
    if bool(args.graph) == bool(args.key):
        raise UsageError("give exactly one of --graph FILE or --key JSON")
    try:
        if args.graph:
            with open(args.graph, encoding="utf-8") as fh:
                data = json.load(fh)
            data = data.get("graph", data)
        else:
            data = json.loads(args.key)
        return AdmissibleGraph.from_dict(data)
    except OSError as exc:
        raise UsageError(str(exc)) from None
    except (ValueError, KeyError, TypeError) as exc:
        raise InvalidGraph([f"malformed graph description: {exc}"]) from None


class InvalidGraph(Exception):
    def __init__(self, problems):
        super().__init__("; ".join(problems))
        self.problems = problems


def cmd_weight(args, cfg: RunConfig) -> int:
    g = _load_graph(args)
    problems = validate(g)
    if problems:
        raise InvalidGraph(problems)
    est = mc_weight(g, cfg.samples, cfg.seed)
    body = est.to_dict()
    ex = exact_weight(g)
    body["exact"] = None if ex is None else {str(u): f"{c.numerator}/{c.denominator}" for u, c in sorted(ex.items())}
    _emit(dumps(_envelope("weight", cfg, body)), args.out)
    return EXIT_OK


def cmd_verify(args, cfg: RunConfig) -> int:
    records = run_suite(args.suite, cfg)
    passed = all(r["passed"] for r in records)
    body = {"suite": args.suite, "passed": passed, "records": records}
    _emit(dumps(_envelope("verify", cfg, body)), args.out)
    return EXIT_OK if passed else EXIT_FAIL


def _series_json(series: dict) -> dict:
    out = {}
    for order, coeffs in sorted(series.items()):
        out[str(order)] = [{"x": list(e), "value": v, "stderr": s} for e, (v, s) in sorted(coeffs.items())]
    return out


def cmd_star(args, cfg: RunConfig) -> int:
    if cfg.d < 2:
        raise UsageError("star needs d >= 2")
    coeff = parse_poly(args.pi, cfg.d)
    pi = theta(cfg.d, 0, 1, coeff=coeff)
    f, g = parse_poly(args.f, cfg.d), parse_poly(args.g, cfg.d)
    try:
        star = asm.star_product(pi, args.order, cfg.samples, cfg.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    body = {"pi": pi.to_dict(), "f": f.to_dict(), "g": g.to_dict(), "order": args.order,
            "series": _series_json(star.apply(f, g))}
    _emit(dumps(_envelope("star", cfg, body)), args.out)
    return EXIT_OK


def cmd_trace(args, cfg: RunConfig) -> int:
    if cfg.d < 2:
        raise UsageError("trace needs d >= 2")
    pi = theta(cfg.d, 0, 1, coeff=parse_poly(args.pi, cfg.d))
    h = MultiVector.from_function(parse_poly(args.h, cfg.d))
    f = parse_poly(args.f, cfg.d)
    pd = asm.PoissonData(pi, h)
    report = asm.check_unimodular(pd)
    body = {"pi": pi.to_dict(), "h": h.to_dict(), "f": f.to_dict(), "unimodular": report}
    if not report["ok"]:
        _emit(dumps(_envelope("trace", cfg, body)), args.out)
        return EXIT_FAIL
    body["integrand"] = asm.trace_integrand(pd, f, args.order, cfg.samples, cfg.seed).to_dict()
    _emit(dumps(_envelope("trace", cfg, body)), args.out)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("-d", type=int, default=None, help="dimension of R^d")
    p.add_argument("--samples", type=int, default=None, help="Monte Carlo samples per estimate")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol-mult", dest="tol_mult", type=float, default=None,
                   help="multiplier on the 3-sigma tolerance")
    p.add_argument("--trials", type=int, default=None, help="random trials for exact suites")
    p.add_argument("--max-deg", dest="max_deg", type=int, default=None, help="largest v-degree")
    p.add_argument("--out", default=None, help="write output here instead of stdout")
    p.add_argument("--config", default=None, help="key = value file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cyclic-formality", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("graphs", help="enumerate admissible graph classes")
    _common(p)
    p.add_argument("-k", required=True, help="comma-separated out-degrees, e.g. 2,3")
    p.add_argument("-m", type=int, required=True, help="boundary points including the basepoint")
    p.add_argument("--dot", action="store_true", help="emit Graphviz DOT instead of JSON")
    p.set_defaults(func=cmd_graphs)

    p = sub.add_parser("weight", help="Monte Carlo weight of one graph")
    _common(p)
    p.add_argument("--graph", help="JSON file with a graph")
    p.add_argument("--key", help="canonical graph key (JSON text)")
    p.set_defaults(func=cmd_weight)

    p = sub.add_parser("verify", help="run an acceptance suite")
    _common(p)
    p.add_argument("suite", choices=list(SUITES))
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("star", help="star product f * g for pi = c(x) d1 ^ d2")
    _common(p)
    p.add_argument("--pi", default="1", help="coefficient of theta1 theta2")
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True)
    p.add_argument("--order", type=int, default=2, choices=(0, 1, 2))
    p.set_defaults(func=cmd_star)

    p = sub.add_parser("trace", help="trace integrand H_n for a unimodular pair")
    _common(p)
    p.add_argument("--pi", required=True, help="coefficient of theta1 theta2")
    p.add_argument("--h", default="0", help="function h with div pi = [h, pi]")
    p.add_argument("--f", required=True)
    p.add_argument("--order", type=int, default=1, choices=(0, 1))
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidGraph as exc:
        print(f"invalid graph: {exc}", file=sys.stderr)
        return EXIT_INVALID_GRAPH


if __name__ == "__main__":
    sys.exit(main())
