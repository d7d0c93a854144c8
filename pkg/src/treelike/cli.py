"""Command-line driver: build, verify, stats, certificate, render."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .construction import CACHE_ENV, ConstructionError, build_tower, ruled_set
from .exact_arith import epsilon, fmt
from .inverse_limit import displacement_certificate
from .plmap import min_map_distance
from .render import render_gamma, render_maps, render_tree
from .tree import parse_point, triod_count
from .verification import CHECKS, PassResult, run_checks

DEFAULT_CACHE = ".treelike-cache"


def _cache(args) -> Path:
    return Path(args.cache or os.environ.get(CACHE_ENV) or DEFAULT_CACHE)


def _dump(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def cmd_build(args) -> int:
    levels = build_tower(args.level, _cache(args))
    _dump({"cache": str(_cache(args)), "levels": [lv.n for lv in levels]})
    return 0


def cmd_verify(args) -> int:
    overrides: dict = {}
    for lvl, point, fv, gv in args.perturb or []:
        overrides.setdefault(int(lvl), {})[parse_point(point)] = (parse_point(fv), parse_point(gv))
    try:
        levels = build_tower(args.level, _cache(args), overrides)
    except ConstructionError as exc:
        results = [PassResult("construction", args.level, False, str(exc))]
    else:
        results = run_checks(levels, args.check)
    passed = all(r.passed for r in results)
    _dump({"level": args.level, "check": args.check, "passed": passed, "results": [r.to_json() for r in results]})
    return 0 if passed else 1


def cmd_stats(args) -> int:
    levels = build_tower(args.level, _cache(args))
    rows = []
    for lv in levels:
        d, x = min_map_distance(lv.f, lv.g)
        rows.append(
            {
                "n": lv.n,
                "triods": triod_count(lv.n),
                "ruled_points": len(ruled_set(lv.n).points),
                "gamma_arcs": len(lv.gamma.arcs),
                "gamma_breakpoints": lv.gamma.node_count(),
                "f_breakpoints": lv.f.breakpoint_count(),
                "g_breakpoints": lv.g.breakpoint_count(),
                "epsilon": fmt(epsilon(lv.n)),
                "delta": fmt(d),
                "delta_witness": str(x),
            }
        )
    _dump({"levels": rows})
    return 0


def cmd_certificate(args) -> int:
    levels = build_tower(max(args.level - 1, 0), _cache(args))
    cert = displacement_certificate(levels, args.level, args.samples, args.seed)
    _dump(cert.to_json())
    return 0 if cert.passed else 1


def cmd_render(args) -> int:
    if args.figure == "tree":
        svg = render_tree(args.level)
    else:
        levels = build_tower(args.level, _cache(args))
        lv = levels[args.level]
        svg = render_gamma(lv.gamma) if args.figure == "gamma" else render_maps(lv)
    Path(args.output).write_text(svg, encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treelike", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log level progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--level", type=int, required=True)
        p.add_argument("--cache", help=f"cache directory (default ${CACHE_ENV} or {DEFAULT_CACHE})")
        p.set_defaults(func=func)
        return p

    add("build", cmd_build, "construct levels 0..N and cache them")
    p = add("verify", cmd_verify, "run verification passes; exit status 0 iff all pass")
    p.add_argument("--check", choices=CHECKS + ("all",), default="all")
    p.add_argument(
        "--perturb",
        nargs=4,
        action="append",
        metavar=("LEVEL", "POINT", "F_VALUE", "G_VALUE"),
        help="replace the ruled value at POINT of level LEVEL, e.g. 0 S:2/9 L:2/3:1:1/1 L:2/3:2:1/1",
    )
    add("stats", cmd_stats, "per-level counts, epsilon_n and min distance of f_n, g_n")
    p = add("certificate", cmd_certificate, "displacement certificate for the induced map")
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p = add("render", cmd_render, "write an SVG figure")
    p.add_argument("figure", choices=("tree", "gamma", "maps"))
    p.add_argument("-o", "--output", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConstructionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
