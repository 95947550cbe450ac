"""Command line front end.

Subcommands: complete, tune, simulate, sweep, coverage, tensor.
Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import DrnnError
from .estimators import complete_matrix
from .experiments import config_from_file, run_scenario, write_results_csv
from .inference import confidence_interval, estimate_noise_variance
from .panel import TargetCell, load_panel, load_tensor, save_panel, ObservationPanel
from .tensor import estimate_tensor_entry
from .tuning import validation_tune
from .neighbors import make_split, select_neighbors
from .synthetic import instance_from_dict


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="drnn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("complete", help="estimate panel entries")
    c.add_argument("--input", required=True)
    c.add_argument("--method", default="dr", choices=["unit", "time", "dr"])
    c.add_argument("--eta1", type=float, required=True)
    c.add_argument("--eta2", type=float, required=True)
    c.add_argument("--split-seed", type=int, default=None)
    c.add_argument("--max-neighbors", type=int, default=None)
    c.add_argument("--missing-token", default="NA")
    c.add_argument("--ci", type=float, default=None, metavar="ALPHA")
    c.add_argument("--sigma-sq", type=float, default=None)
    c.add_argument("--output", required=True)
    c.add_argument("--dump-neighbors", default=None, metavar="PATH")
    c.add_argument("--json", action="store_true")

    t = sub.add_parser("tune", help="grid search thresholds by holdout MSE")
    t.add_argument("--input", required=True)
    t.add_argument("--grid-file", required=True)
    t.add_argument("--method", default="dr", choices=["unit", "time", "dr"])
    t.add_argument("--split-seed", type=int, default=0)
    t.add_argument("--holdout-fraction", type=float, default=0.2)
    t.add_argument("--missing-token", default="NA")
    t.add_argument("--json", action="store_true")

    s = sub.add_parser("simulate", help="generate a synthetic instance")
    s.add_argument("--config", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--truth", default=None)
    s.add_argument("--json", action="store_true")

    for name in ("sweep", "coverage"):
        x = sub.add_parser(name, help=f"run a {name} scenario config")
        x.add_argument("--config", required=True)
        x.add_argument("--output", default=None)
        x.add_argument("--summary", default=None)
        x.add_argument("--workers", type=int, default=None)
        x.add_argument("--json", action="store_true")

    z = sub.add_parser("tensor", help="triply robust tensor estimate")
    z.add_argument("--manifest", required=True)
    z.add_argument("--target", required=True, metavar="I,T,A")
    z.add_argument("--eta1", type=float, required=True)
    z.add_argument("--eta2", type=float, required=True)
    z.add_argument("--eta3", type=float, required=True)
    z.add_argument("--method", default="tr",
                   choices=["tr", "unit", "time", "intervention"])
    z.add_argument("--json", action="store_true")
    return parser


def _cmd_complete(args) -> int:
    panel = load_panel(args.input, args.missing_token)
    eta = (args.eta1, args.eta2)
    estimates = complete_matrix(
        panel, eta, args.method, args.split_seed, max_neighbors=args.max_neighbors
    )
    sigma_sq = None
    if args.ci is not None:
        sigma_sq = args.sigma_sq
        if sigma_sq is None:
            sigma_sq = estimate_noise_variance(
                panel, [eta], args.method, args.split_seed
            )
    header = ["i", "t", "method", "value", "n_unit", "n_time", "n_cross"]
    if args.ci is not None:
        header += ["lower", "upper", "j_eff", "sigma_hat"]
    lines = [",".join(header)]
    for est in estimates:
        cells = [
            str(est.target.unit), str(est.target.time), est.method,
            repr(float(est.value)), str(est.n_unit_used), str(est.n_time_used),
            str(est.n_cross_terms),
        ]
        if args.ci is not None:
            counts = (est.n_time_used, est.n_unit_used, est.n_cross_terms)
            if min(counts) > 0:
                ci = confidence_interval(est.value, counts, sigma_sq ** 0.5, args.ci)
                cells += [repr(ci.lower), repr(ci.upper), repr(ci.j_eff),
                          repr(ci.sigma_hat)]
            else:
                cells += ["", "", "", ""]
        lines.append(",".join(cells))
    Path(args.output).write_text("\n".join(lines) + "\n")
    if args.dump_neighbors:
        dump = []
        for est in estimates:
            split = None
            if args.split_seed is not None:
                split = make_split(panel.n_units, panel.n_times, est.target,
                                   args.split_seed)
            nbrs = select_neighbors(panel, est.target, eta[0], eta[1], split)
            dump.append(nbrs.to_json_dict())
        Path(args.dump_neighbors).write_text(json.dumps(dump, indent=2) + "\n")
    if args.json:
        print(json.dumps({"cells": len(estimates), "output": args.output}))
    else:
        print(f"wrote {len(estimates)} estimates to {args.output}")
    return 0


def _cmd_tune(args) -> int:
    panel = load_panel(args.input, args.missing_token)
    grid = []
    for line in Path(args.grid_file).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.lower().startswith("eta"):
            continue
        e1, e2 = line.split(",")[:2]
        grid.append((float(e1), float(e2)))
    best, table = validation_tune(
        panel, grid, args.method, args.split_seed, args.holdout_fraction
    )
    if args.json:
        print(json.dumps({
            "eta1": best[0], "eta2": best[1],
            "table": [{"eta1": r[0], "eta2": r[1], "mse": r[2]} for r in table],
        }))
    else:
        print("eta1,eta2,mse")
        for r in table:
            print(f"{r[0]:.6g},{r[1]:.6g},{r[2]:.6g}")
        print(f"chosen: eta1={best[0]:.6g} eta2={best[1]:.6g}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = _load_config_mapping(args.config)
    instance = instance_from_dict(cfg)
    save_panel(instance.panel, args.output)
    if args.truth:
        truth_panel = ObservationPanel(
            instance.theta, np.ones_like(instance.panel.mask)
        )
        save_panel(truth_panel, args.truth)
    payload = {
        "n": instance.panel.n_units, "t": instance.panel.n_times,
        "observed": int(instance.panel.mask.sum()), "output": args.output,
    }
    print(json.dumps(payload) if args.json else
          f"wrote {payload['n']}x{payload['t']} panel "
          f"({payload['observed']} observed) to {args.output}")
    return 0


def _load_config_mapping(path):
    p = Path(path)
    text = p.read_text()
    if p.suffix in (".toml", ".tml"):
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)


def _cmd_scenario(args, family: str) -> int:
    config = config_from_file(args.config)
    if family == "sweep" and config.scenario not in ("rate_sweep", "robustness", "tensor_demo"):
        raise UsageError(
            f"scenario {config.scenario!r} does not belong to 'drnn sweep'"
        )
    if family == "coverage" and config.scenario not in ("coverage", "improvement"):
        raise UsageError(
            f"scenario {config.scenario!r} does not belong to 'drnn coverage'"
        )
    if args.workers is not None:
        config.workers = args.workers
    if args.output is not None:
        config.output_path = args.output
    if args.summary is not None:
        config.summary_path = args.summary
    rows, summary = run_scenario(config)
    if config.output_path:
        write_results_csv(rows, config.output_path)
    if config.summary_path:
        Path(config.summary_path).write_text(json.dumps(summary, indent=2) + "\n")
    if args.json:
        print(json.dumps(summary))
    else:
        print(f"{config.scenario}: {len(rows)} rows"
              + (f" -> {config.output_path}" if config.output_path else ""))
    return 0


def _cmd_tensor(args) -> int:
    tensor = load_tensor(args.manifest)
    try:
        i, t, a = (int(x) for x in args.target.split(","))
    except ValueError:
        raise UsageError(f"--target must be I,T,A, got {args.target!r}") from None
    est = estimate_tensor_entry(
        tensor, TargetCell(i, t, a), (args.eta1, args.eta2, args.eta3), args.method
    )
    payload = {
        "target": [i, t, a], "method": est.method, "value": est.value,
        "n_unit": est.n_unit_used, "n_time": est.n_time_used,
        "n_cross": est.n_cross_terms,
    }
    print(json.dumps(payload) if args.json else
          f"{est.method} estimate at ({i},{t},{a}): {est.value:.10g}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "complete":
            return _cmd_complete(args)
        if args.command == "tune":
            return _cmd_tune(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command in ("sweep", "coverage"):
            return _cmd_scenario(args, args.command)
        if args.command == "tensor":
            return _cmd_tensor(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DrnnError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
