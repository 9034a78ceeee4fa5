"""Command-line entry point: ``simulate`` one config file or ``sweep`` a built-in experiment."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .scenario import ScenarioError, load_scenario
from .simulation import SimulationError, run_drops
from .sweeps import SweepResult, summarize, sweep_example1, sweep_example2, write_sweep


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tn-ntn-sim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--drops", type=int, default=None)
        sp.add_argument("--out", type=Path, default=Path("results"))
        sp.add_argument("--workers", type=int, default=1, help="parallel drop workers")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sim = sub.add_parser("simulate", help="run all drops of one scenario file")
    sim.add_argument("config", type=Path)
    common(sim)
    sw = sub.add_parser("sweep", help="run a built-in experiment")
    sw.add_argument("experiment", choices=("example1", "example2"))
    common(sw)
    return p


def _print_rows(rows, stream=None):
    stream = sys.stdout if stream is None else stream
    print(f"{'scenario':32s} {'class':16s} {'n':>6s} {'sinr50':>7s} {'sinr95':>7s} "
          f"{'rate50':>8s} {'rate95':>8s} {'outage':>7s}", file=stream)
    for r in sorted(rows, key=lambda r: (r.scenario_id, r.user_class)):
        print(f"{r.scenario_id:32s} {r.user_class:16s} {r.n:6d} {r.sinr_median:7.2f} {r.sinr_p95:7.2f} "
              f"{r.rate_median:8.2f} {r.rate_p95:8.2f} {r.outage:7.3f}", file=stream)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.drops is not None and args.drops < 1:
        print("error: --drops must be >= 1", file=sys.stderr)
        return 2
    try:
        if args.command == "simulate":
            s = load_scenario(args.config)
            changes = {}
            if args.seed is not None:
                changes["seed"] = args.seed
            if args.drops is not None:
                changes["n_drops"] = args.drops
            s = s.with_(**changes) if changes else s
            records = run_drops(s, workers=args.workers)
            result = SweepResult(summarize(records), records)
        else:
            fn = sweep_example1 if args.experiment == "example1" else sweep_example2
            kw = {"workers": args.workers}
            if args.seed is not None:
                kw["seed"] = args.seed
            if args.drops is not None:
                kw["n_drops"] = args.drops
            result = fn(**kw)
        out = write_sweep(result, args.out, args.format)
    except (ScenarioError, SimulationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _print_rows(result.rows)
    for d in result.district:
        print(f"district el={d.elevation_deg:g} FRF{d.frf} density={d.evtol_density:g}: "
              f"{d.offloaded_users}/{d.district_users} offloaded, median {d.rate_median:.2f} Mbps")
    print(f"wrote {out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
