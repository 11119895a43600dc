"""Command-line surface.

Verbs:

  simulate   integrate a scenario, write the result JSON (and optional CSV)
  analyze    estimate the accumulation order of a switch set
  bound      lattice search for the order bound in dimension n
  classify   3-D pointwise classification of a scenario at a point
  brackets   print a bracket-word field or its signed 0/1 decomposition
  qrel       print an expanded determinant relation Q_r

Exit codes: 0 success, 1 domain error, 2 usage error.  Output payloads are
deterministic (no timestamps); reproducibility metadata with timestamps goes
to the optional --record file.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from fractions import Fraction
from pathlib import Path

from .bracket_algebra import decompose_word, eval_word_field
from .extremal_sim import ExtremalState, ExtremalSystem, SimOptions
from .fuller_analysis import SwitchSet, auto_epsilon, fuller_order
from .genericity_combinatorics import (
    build_q_relation,
    classify_point_3d,
    fuller_bound,
    longest_admissible,
)
from . import scenarios


def _load_bundle(spec: str, seed: int | None = None) -> scenarios.ScenarioBundle:
    if spec in scenarios.BUILTIN_NAMES:
        return scenarios.builtin(spec, seed)
    return scenarios.parse_scenario(spec)


def _parse_point(text: str) -> tuple:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "/" in part:
            out.append(Fraction(part))
        else:
            value = float(part)
            out.append(int(value) if value.is_integer() else value)
    return tuple(out)


def _write_or_print(payload: dict, path: str | None):
    text = json.dumps(payload, sort_keys=True, indent=2)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _cmd_simulate(args) -> int:
    bundle = _load_bundle(args.scenario, args.seed)
    overrides = {}
    for name in ("rtol", "atol", "max_events", "min_interval", "refine_tol"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if overrides:
        merged = dict(bundle.options or {})
        merged.update(overrides)
        bundle = scenarios.ScenarioBundle(
            bundle.scenario, bundle.initial, bundle.t_final, merged, bundle.fixture
        )
    if args.t_final is not None:
        bundle = scenarios.ScenarioBundle(
            bundle.scenario, bundle.initial, args.t_final, bundle.options, bundle.fixture
        )
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    result = scenarios.run_bundle(bundle)
    finished = datetime.datetime.now(datetime.timezone.utc).isoformat()

    payload = scenarios.result_payload(bundle, result)
    _write_or_print(payload, args.output)
    if args.csv:
        system = ExtremalSystem(bundle.scenario)
        Path(args.csv).write_text(scenarios.trajectory_csv(result, system))
    if args.record:
        record = scenarios.RunRecord(
            scenario_hash=payload["scenario_hash"],
            options=dict(bundle.options or {}),
            outputs={"result": args.output or "-", "csv": args.csv or None},
            started=started,
            finished=finished,
        )
        Path(args.record).write_text(
            json.dumps(record.to_payload(), sort_keys=True, indent=2) + "\n"
        )
    d = result.diagnostics
    print(
        f"# {result.scenario_name}: {d['arc_count']} arcs, "
        f"{d['switch_count']} switchings, terminated: {d['termination']}",
        file=sys.stderr,
    )
    return 0


def _cmd_analyze(args) -> int:
    if args.input:
        payload = json.loads(Path(args.input).read_text())
        sset = SwitchSet.from_sim_payload(payload)
    else:
        sset = SwitchSet.from_text(Path(args.times).read_text())
    if len(sset.times) < 2:
        raise ValueError("need at least two switch times to analyze")
    if args.epsilon == "auto":
        eps = max(auto_epsilon(sset.gaps), 2 * sset.resolution)
    else:
        eps = float(args.epsilon)
    report = fuller_order(sset, eps, mode=args.mode)
    print(f"# epsilon used: {eps:.6g}", file=sys.stderr)
    _write_or_print(report.to_payload(), args.output)
    return 0


def _cmd_bound(args) -> int:
    curve = longest_admissible(args.dim)
    result = fuller_bound(args.dim)
    _write_or_print(
        {
            "dim": args.dim,
            "longest": result.longest,
            "K": result.K,
            "total": result.total,
            "witness_moves": list(curve.moves),
            "witness_points": [list(p) for p in curve.points],
        },
        args.output,
    )
    return 0


def _cmd_classify(args) -> int:
    bundle = _load_bundle(args.scenario, args.seed)
    point = _parse_point(args.point)
    cls = classify_point_3d(bundle.scenario, point, tol=args.tol)
    _write_or_print(cls.to_payload(), args.output)
    return 0


def _cmd_brackets(args) -> int:
    bundle = _load_bundle(args.scenario, args.seed)
    if args.decompose:
        dec = decompose_word(args.word)
        payload = {
            "word": args.word,
            "terms": [[str(w), s] for w, s in dec.terms],
            "max_zeros": str(dec.j_max_zeros),
            "max_ones": str(dec.j_max_ones),
        }
        _write_or_print(payload, args.output)
        return 0
    field = eval_word_field(args.word, bundle.scenario.f0, bundle.scenario.f1)
    _write_or_print(
        {"word": args.word, "components": field.to_payload()}, args.output
    )
    return 0


def _cmd_qrel(args) -> int:
    rel = build_q_relation(args.r, args.prev, args.last)
    payload = {
        "r": args.r,
        "prev": args.prev,
        "last": args.last,
        "terms": [
            {"monomial": list(mono), "coeff": coeff} for mono, coeff in rel.terms
        ],
        "pretty": repr(rel),
    }
    _write_or_print(payload, args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fullerkit",
        description="Bang/singular extremal simulation and switching-set order analysis",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("simulate", help="integrate a scenario")
    p.add_argument("--scenario", required=True, help="builtin name or JSON path")
    p.add_argument("--t-final", type=float, default=None)
    p.add_argument("--seed", type=int, default=None, help="seed for random_poly")
    p.add_argument("--output", default=None, help="result JSON path (default stdout)")
    p.add_argument("--csv", default=None, help="trajectory CSV path")
    p.add_argument("--record", default=None, help="run-record JSON path")
    p.add_argument("--rtol", type=float, default=None)
    p.add_argument("--atol", type=float, default=None)
    p.add_argument("--max-events", dest="max_events", type=int, default=None)
    p.add_argument("--min-interval", dest="min_interval", type=float, default=None)
    p.add_argument("--refine-tol", dest="refine_tol", type=float, default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", help="estimate switching-set accumulation order")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="simulate output JSON")
    src.add_argument("--times", help="plain text file, one time per line")
    p.add_argument("--epsilon", default="auto", help="stripping scale or 'auto'")
    p.add_argument("--mode", choices=("supremum", "centroid"), default="supremum")
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("bound", help="order bound by lattice search")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("classify", help="3-D pointwise classification")
    p.add_argument("--scenario", required=True)
    p.add_argument("--point", required=True, help="comma-separated, rationals allowed")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("brackets", help="bracket-word field or decomposition")
    p.add_argument("--scenario", required=True)
    p.add_argument("--word", required=True, help="word over 01+- (use --word=-01 for leading -)")
    p.add_argument("--decompose", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_brackets)

    p = sub.add_parser("qrel", help="expanded determinant relation")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--prev", required=True, help="lower word (the 0-extension)")
    p.add_argument("--last", required=True, help="upper word (the 1-extension)")
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_qrel)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
