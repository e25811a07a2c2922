"""Command-line entry point.

Subcommands:

* ``train``  -- one SGD run from a config file; writes a run directory.
* ``sweep``  -- multi-seed sweep over one variable; writes CSVs + figure.
* ``verify`` -- randomized inequality and gradient suites.
* ``oracle`` -- closed-form analytics vs Monte-Carlo estimates.
* ``plot``   -- decision-boundary artifacts for a finished run.

Exit codes: 0 success, 1 verification violation, 2 bad usage or config,
3 I/O failure, 4 infeasible distribution parameters, 5 training
diverged.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..distributions import DistributionError, sample
from ..rng import stream_rng
from ..theory import (gradient_check_suite, run_general_identity_suite,
                      run_implication_suite, run_key_identity_suite)
from ..trainer import ConfigurationError, TrainingDivergedError, train
from .config import ConfigError, build_distribution, build_run, load_config
from .oracles import mc_oracle
from .plotting import accuracy_figure, write_boundary_artifacts
from .runio import load_network, write_run
from .sweep import SweepSpec, run_sweep, write_sweep
from .version import __version__

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INFEASIBLE = 4
EXIT_DIVERGED = 5


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="halfspace-sgd",
        description="SGD on noisy halfspace benchmarks with per-step "
                    "verification of the convergence analysis.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training experiment")
    p_train.add_argument("--config", required=True, help="JSON config file")
    p_train.add_argument("--seed", type=int, default=None,
                         help="override train.seed")
    p_train.add_argument("--out", default="runs/run", help="output directory")
    p_train.add_argument("--paper-scale", action="store_true",
                         help="full-size network and evaluation sets")

    p_sweep = sub.add_parser("sweep", help="multi-seed sweep over one variable")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default="runs/sweep")
    p_sweep.add_argument("--paper-scale", action="store_true")

    p_verify = sub.add_parser("verify", help="randomized verification suites")
    p_verify.add_argument("--tuples", type=int, default=10_000,
                          help="tuples per inequality suite")
    p_verify.add_argument("--grad-configs", type=int, default=200,
                          help="configurations for the gradient check")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--out", default=None,
                          help="optional JSON report path")

    p_oracle = sub.add_parser("oracle",
                              help="analytic error rates vs Monte-Carlo")
    p_oracle.add_argument("--config", required=True)
    p_oracle.add_argument("-n", "--samples", type=int, default=1_000_000)
    p_oracle.add_argument("--seed", type=int, default=0)

    p_plot = sub.add_parser("plot", help="decision-boundary figure for a run")
    p_plot.add_argument("--run", required=True,
                        help="run directory with network.json")
    p_plot.add_argument("--out", default=None,
                        help="output directory (defaults to the run dir)")
    return parser


def cmd_train(args) -> int:
    data = load_config(args.config)
    spec, net, tc = build_run(data, seed_override=args.seed,
                              paper_scale=args.paper_scale)
    result, trace = train(spec, net, tc)
    paths = write_run(args.out, result, trace)
    print(f"seed {result.seed}: test error {result.test_error:.4f} "
          f"(accuracy {1.0 - result.test_error:.4f}), "
          f"best iterate {result.best_iterate}, OPT {result.opt_lin:.4f}")
    print(f"wrote {paths['result']}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    data = load_config(args.config)
    if "sweep" not in data:
        raise ConfigError("config has no 'sweep' section")
    sweep = SweepSpec.from_config(data["sweep"])

    def progress(variable, value, seed, row):
        print(f"{variable}={value} seed={seed}: "
              f"accuracy {row['test_accuracy']:.4f}")

    result = run_sweep(data, sweep, paper_scale=args.paper_scale,
                       progress=progress)
    paths = write_sweep(args.out, result)
    if sweep.variable == "opt_lin":
        fig_path = Path(args.out) / "accuracy.svg"
        accuracy_figure(result.cells, fig_path)
        paths["figure"] = fig_path
    for cell in result.cells:
        print(f"{sweep.variable}={cell['value']}: accuracy "
              f"{cell['accuracy_mean']:.4f} +- {cell['accuracy_sd']:.4f} "
              f"({cell['n_runs']} runs)")
    if result.failures:
        print(f"{len(result.failures)} run(s) diverged", file=sys.stderr)
    print(f"wrote {paths['summary']}")
    return EXIT_VIOLATION if result.failures else EXIT_OK


def cmd_verify(args) -> int:
    reports = [
        run_key_identity_suite(args.tuples, args.seed),
        run_general_identity_suite("leaky_relu", args.tuples, args.seed),
        run_general_identity_suite("relu", args.tuples, args.seed),
        run_general_identity_suite("tanh", args.tuples, args.seed),
        run_implication_suite(args.tuples, args.seed),
        gradient_check_suite(args.grad_configs, args.seed),
    ]
    ok = True
    for rep in reports:
        status = "PASS" if rep.passed else "FAIL"
        print(f"[{status}] {rep.name}: n={rep.n_tuples} "
              f"min_slack={rep.min_slack:.3e}")
        if not rep.passed:
            ok = False
            print(f"        worst case: {rep.worst}", file=sys.stderr)
    if args.out:
        Path(args.out).write_text(json.dumps(
            [r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n")
        print(f"wrote {args.out}")
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_oracle(args) -> int:
    data = load_config(args.config)
    spec = build_distribution(data["distribution"])
    report = mc_oracle(spec, n=args.samples, seed=args.seed)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if not report.within(3.0):
        print("Monte-Carlo estimate outside 3 standard errors", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_plot(args) -> int:
    run_dir = Path(args.run)
    params = load_network(run_dir)
    samples = None
    result_path = run_dir / "result.json"
    if result_path.exists():
        cfg = json.loads(result_path.read_text()).get("config", {})
        if "distribution" in cfg:
            try:
                spec = build_distribution(cfg["distribution"])
                samples = sample(spec, stream_rng(0, 0), 2000)
            except (ConfigError, DistributionError):
                samples = None
    paths = write_boundary_artifacts(params, args.out or run_dir, samples)
    print(f"wrote {paths['figure']}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help/--version.
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    handlers = {"train": cmd_train, "sweep": cmd_sweep, "verify": cmd_verify,
                "oracle": cmd_oracle, "plot": cmd_plot}
    try:
        return handlers[args.command](args)
    except (ConfigError, ConfigurationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DistributionError as exc:
        print(f"infeasible distribution: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except FileNotFoundError as exc:
        print(f"file not found: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
