"""Command line entry point: ``cfpower {generate,solve,experiment,bench}``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .model import build_coefficients
from .objectives import Kind
from .scenario import generate_drop, load_scenario, save_scenario
from .solver import Variant, solve

log = logging.getLogger("cfpower")


def _base_config(args) -> ex.ExperimentConfig:
    cfg = ex.load_config(args.config) if args.config else ex.ExperimentConfig()
    overrides = {}
    for name in ("M", "K", "N", "D_km"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["output_dir"] = str(args.out)
    if overrides:
        cfg = ex.dataclasses.replace(cfg, **overrides)
    return cfg


def cmd_generate(args) -> int:
    cfg = _base_config(args)
    s = generate_drop(cfg.M, cfg.K, cfg.N, cfg.D_km, cfg.radio, cfg.pathloss, cfg.seed)
    out = save_scenario(s, args.out)
    print(f"wrote drop M={s.M} K={s.K} N={s.N} seed={cfg.seed} to {out}")
    return 0


def cmd_solve(args) -> int:
    cfg = _base_config(args)
    if args.scenario:
        s = load_scenario(args.scenario)
    else:
        s = generate_drop(cfg.M, cfg.K, cfg.N, cfg.D_km, cfg.radio, cfg.pathloss, cfg.seed)
    opts = cfg.solver
    if args.variant:
        opts = ex.dataclasses.replace(opts, variant=Variant.parse(args.variant))
    kind = cfg.utility(args.kind)
    c = build_coefficients(s)
    trace = solve(s, c, kind, opts, seed=cfg.seed)
    se_bits = trace.per_user_se / math.log(2.0)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out / "trace.csv")
    np.savetxt(out / "allocation.csv", trace.final_mu, fmt="%.17g", delimiter=",")
    with open(out / "per_user_se.csv", "w") as fh:
        fh.write("user,se_bits_hz\n")
        for k, v in enumerate(se_bits):
            fh.write(f"{k},{float(v)!r}\n")
    print(f"{kind.name}: {trace.iterations} iterations in {trace.wall_time_s:.3f} s, "
          f"total SE {se_bits.sum():.4f} bit/s/Hz, min SE {se_bits.min():.4f} bit/s/Hz")
    return 0


def cmd_experiment(args) -> int:
    cfg = _base_config(args)
    out = ex.run_experiment(cfg)
    print(f"{cfg.experiment}: results in {out}")
    return 0


def cmd_bench(args) -> int:
    rows, ratios, ok = ex.timing_benchmark(
        K=args.K, M_values=tuple(args.M_list), N=args.N, iters=args.iters,
        repeats=args.repeats, seed=args.seed, full_solve=not args.no_solve)
    print(f"{'M':>6} {'ms/iter':>10} {'ratio':>7} {'solve s':>9}")
    prev = None
    for r in rows:
        ratio = "" if prev is None else f"{r['per_iter_s'] / prev:.2f}"
        solve_s = f"{r['solve_s']:.3f}" if "solve_s" in r else ""
        print(f"{r['M']:>6} {1e3 * r['per_iter_s']:>10.4f} {ratio:>7} {solve_s:>9}")
        prev = r["per_iter_s"]
    if args.out:
        ex.write_timing_table(args.out, rows)
    lo, hi = ex.RATIO_BAND
    print(f"doubling ratios {', '.join(f'{x:.2f}' for x in ratios)}; band [{lo}, {hi}]: "
          + ("PASS" if ok else "FAIL"))
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cfpower", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_flags(sp):
        sp.add_argument("--config", type=Path, help="INI config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--M", type=int)
        sp.add_argument("--K", type=int)
        sp.add_argument("--N", type=int)
        sp.add_argument("--D-km", dest="D_km", type=float)

    g = sub.add_parser("generate", help="draw a network drop and save it as a CSV bundle")
    scenario_flags(g)
    g.add_argument("--out", type=Path, required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve one utility on one drop")
    scenario_flags(s)
    s.add_argument("--scenario", type=Path, help="CSV bundle written by `generate`")
    s.add_argument("--kind", default="SEmax", choices=[k.value for k in Kind])
    s.add_argument("--variant", choices=[v.value for v in Variant])
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("experiment", help="run a configured experiment")
    e.add_argument("--config", type=Path, required=True)
    e.add_argument("--seed", type=int)
    e.add_argument("--out", type=Path)
    e.set_defaults(func=cmd_experiment)

    b = sub.add_parser("bench", help="per-iteration cost versus number of APs")
    b.add_argument("--K", type=int, default=40)
    b.add_argument("--N", type=int, default=1)
    b.add_argument("--M-list", dest="M_list", type=int, nargs="+", default=[200, 400, 800, 1600])
    b.add_argument("--iters", type=int, default=200)
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--no-solve", action="store_true", help="skip the full line-search solves")
    b.add_argument("--out", type=Path)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"cfpower {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
