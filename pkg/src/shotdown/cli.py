"""Command line: ``shotdown-lab run | list | simulate``.

Exit codes: 0 when every asserted row passes, 1 when any fails, 2 for
usage and config errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from .config import ConfigError, load_config
from .geometry import GeometryError, parse_domain
from .parallel import set_threads
from .report import write_outputs


def _run(args):
    from .experiments import run_experiment

    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out"] = args.out
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
    out = cfg.out or os.path.join("results", cfg.experiment)
    set_threads(args.threads)
    res = run_experiment(cfg)
    write_outputs(out, cfg, res, figures=not args.no_figures)
    for r in res.rows:
        print(f"{r.status:4s}  {r.claim}: {r.quantity} = {r.value:.6g}" + (f"  [{r.budget}]" if r.budget else ""))
    n_fail = sum(1 for r in res.asserted if not r.passed)
    print(f"{len(res.asserted) - n_fail}/{len(res.asserted)} asserted rows pass; results in {out}")
    return 0 if n_fail == 0 else 1


def _list(args):
    from .experiments import CATALOGUE, CLAIMS

    for name, (_, doc) in CATALOGUE.items():
        print(f"{name:20s} {doc}")
    if args.claims:
        print()
        for cid, doc in CLAIMS.items():
            print(f"{cid:28s} {doc}")
    return 0


def _simulate(args):
    from .rng import stream
    from .sim import SimScheme, simulate_batch, write_dump
    from .stable import StableLaw

    dom = parse_domain(args.domain, args.d)
    law = StableLaw(dom.d, args.alpha)
    x0 = np.array([float(v) for v in args.x.split(",")])
    scheme = SimScheme(args.scheme, args.h, args.eps_j, args.horizon)
    set_threads(args.threads)
    b = simulate_batch(law, dom, x0, scheme, stream(args.seed), args.n)
    with open(args.dump, "wb") as fh:
        write_dump(fh, law, scheme, b)
    killed = np.isfinite(b.sigma)
    print(f"{args.n} paths, {killed.sum()} shot down before T = {args.horizon:g}; dump written to {args.dump}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="shotdown-lab", description="Shot-down stable process experiments")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the experiment described by a config file")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--no-figures", action="store_true", help="write CSV only")
    r.set_defaults(func=_run)

    ls = sub.add_parser("list", help="print the experiment catalogue")
    ls.add_argument("--claims", action="store_true", help="also list the claim ids")
    ls.set_defaults(func=_list)

    s = sub.add_parser("simulate", help="simulate paths and write a binary dump")
    s.add_argument("--domain", required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--x", required=True, help="start point, comma separated")
    s.add_argument("--d", type=int)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--scheme", choices=("grid", "jump-adapted"), default="jump-adapted")
    s.add_argument("--h", type=float, default=1e-3)
    s.add_argument("--eps-j", type=float, default=0.1)
    s.add_argument("--horizon", type=float, default=1.0)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--dump", required=True)
    s.set_defaults(func=_simulate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GeometryError, ValueError, OSError) as e:
        print(f"shotdown-lab: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
