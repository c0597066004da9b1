"""Command line entry point: ``bdris sumrate | powermin | compare``."""

from __future__ import annotations

import argparse
import json
import sys

from .bench import (ComparisonSummary, ExperimentSpec, RunResult,
                    compare_architectures, run)
from .channel import ScenarioConfig


class _Parser(argparse.ArgumentParser):
    # Exit code 1 on usage errors; 2 is reserved for infeasible results.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_spec(mode: str, args) -> ExperimentSpec:
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
        if "mode" in doc or "scenario" in doc:
            spec = ExperimentSpec.from_dict(doc)
            if spec.mode != mode:
                raise ValueError(
                    f"config mode {spec.mode!r} does not match subcommand {mode!r}")
        else:
            spec = ExperimentSpec(mode=mode,
                                  scenario=ScenarioConfig.from_dict(doc))
    else:
        spec = ExperimentSpec(mode=mode)
    if args.seed_list:
        spec.seeds = [int(s) for s in args.seed_list.split(",") if s.strip()]
    if args.out:
        spec.output_path = args.out
    return spec


def _print_result(result: RunResult) -> None:
    print(f"{'axis':>12} {'seed':>6} {'objective':>16} {'alt_units':>14} "
          f"{'iters':>7} {'status':>20}")
    for r in result.rows:
        print(f"{str(r.axis):>12} {r.seed:>6} {r.objective:>16.8g} "
              f"{r.objective_alt:>14.6g} {r.iters:>7} {r.status:>20}")
    for s in result.summary:
        print(f"mean[axis={s.axis!s}] over {s.n} seeds: "
              f"objective={s.objective_mean:.8g} (std {s.objective_std:.3g})")


def _print_comparison(cmp: ComparisonSummary) -> None:
    unit = "nats" if cmp.mode == "sumrate" else "watts"
    print(f"{'mask':>18} {'free params':>12} {'mean ' + unit:>16} {'std':>12}")
    for m in cmp.ranked:
        print(f"{m.label:>18} {m.n_parameters:>12} {m.objective_mean:>16.8g} "
              f"{m.objective_std:>12.4g}")
    for p in cmp.pairs:
        print(f"{p.first} vs {p.second}: wins {p.first_wins}-{p.second_wins} "
              f"(ties {p.ties}), mean difference {p.mean_difference:.6g}")


def main(argv=None) -> int:
    parser = _Parser(prog="bdris",
                     description="Architecture-independent BD-RIS optimizers")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("sumrate", "maximize the sum rate"),
                           ("powermin", "minimize transmit power under SINR targets"),
                           ("compare", "rank architecture masks on shared seeds")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="ScenarioConfig or ExperimentSpec JSON")
        p.add_argument("--seed-list", help="comma separated seeds, overrides config")
        p.add_argument("--out", help="output CSV path (.summary.csv and "
                                     ".provenance.json siblings are added)")
        if name == "compare":
            p.add_argument("--masks", required=True,
                           help="comma separated mask labels, e.g. "
                                "single,group:4,tree_tridiagonal,fully")
            p.add_argument("--mode", default="sumrate", choices=("sumrate", "powermin"),
                           help="objective to compare on (default sumrate)")
    args = parser.parse_args(argv)

    try:
        if args.command == "compare":
            spec = _load_spec(args.mode, args)
            spec.output_path = None
            cmp = compare_architectures(spec, [m for m in args.masks.split(",") if m])
            _print_comparison(cmp)
            if args.out:
                _write_comparison_csv(cmp, args.out)
            return 2 if cmp.any_infeasible else 0
        spec = _load_spec(args.command, args)
        result = run(spec)
        _print_result(result)
        return 2 if result.any_infeasible else 0
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"bdris: error: {exc}", file=sys.stderr)
        return 1


def _write_comparison_csv(cmp: ComparisonSummary, path: str) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("mask", "n_parameters", "objective_mean",
                         "objective_std"))
        for m in cmp.ranked:
            writer.writerow((m.label, m.n_parameters, repr(m.objective_mean),
                             repr(m.objective_std)))


if __name__ == "__main__":
    raise SystemExit(main())
