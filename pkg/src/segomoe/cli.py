from __future__ import annotations

import argparse
import csv
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from segomoe import artifacts, defaults, driver
from segomoe.acquisition import AcquisitionConfig, Criterion, Regularization
from segomoe.moea import Nsga2Config
from segomoe.problems import BenchmarkProblem, builtin_problems
from segomoe.surrogate import KernelConfig, KernelFamily

logger = logging.getLogger("segomoe")

MODES = ("segomoe", "doe", "offline-sbo")


def _catalog() -> str:
    lines = ["Available problems:"]
    for name, problem in builtin_problems().items():
        lines.append(f"  {name:<22} {problem.description}")
    return "\n".join(lines)


def _configure_logging(verbose: bool, directory: Path | None = None) -> None:
    level = logging.DEBUG if verbose else logging.INFO
    formatter = logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
    for handler in list(logger.handlers):
        handler.close()
        logger.removeHandler(handler)
    logger.setLevel(level)
    logger.propagate = False
    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(formatter)
    logger.addHandler(console)
    if directory is not None:
        directory.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(directory / artifacts.LOG_FILE, mode="w")
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)


def _add_study_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--problem", required=True, help="catalog problem name")
    parser.add_argument("--doe", type=int, default=None, help="DOE size")
    parser.add_argument("--budget", type=int, default=None, help="total evaluations")
    parser.add_argument(
        "--acq", choices=[c.value for c in Criterion], default=Criterion.EHVI.value
    )
    parser.add_argument(
        "--reg", choices=[r.value for r in Regularization], default=Regularization.NONE.value
    )
    parser.add_argument("--gamma", type=float, default=defaults.gamma)
    parser.add_argument(
        "--method", choices=["auto", "exact", "mc"], default="auto",
        help="criterion evaluation method",
    )
    parser.add_argument(
        "--kernel",
        choices=[k.value for k in KernelFamily],
        default=KernelFamily.SQUARED_EXPONENTIAL.value,
    )
    parser.add_argument("--pls", type=int, default=0, help="PLS components, 0 for none")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=None, help="artifact directory")
    parser.add_argument("--infill-starts", type=int, default=defaults.infill_starts)
    parser.add_argument("--nsga2-population", type=int, default=defaults.population_size)
    parser.add_argument("--nsga2-generations", type=int, default=defaults.generations)
    parser.add_argument(
        "--validate",
        action="store_true",
        help="evaluate the predicted front with the true problem",
    )
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segomoe",
        description="Constrained multi-objective Bayesian optimization over mixed variables.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="DOE followed by adaptive enrichment")
    _add_study_arguments(run_parser)
    run_parser.add_argument("--mode", choices=MODES, default="segomoe")
    doe_parser = commands.add_parser("doe", help="Latin hypercube DOE only")
    _add_study_arguments(doe_parser)
    sbo_parser = commands.add_parser(
        "offline-sbo", help="DOE of the whole budget, then NSGA-II on the surrogates"
    )
    _add_study_arguments(sbo_parser)

    serve_parser = commands.add_parser("serve", help="start the ask-tell service")
    serve_parser.add_argument("--port", type=int, default=None)
    serve_parser.add_argument("--data-dir", type=Path, default=None)
    serve_parser.add_argument("-v", "--verbose", action="store_true")

    report_parser = commands.add_parser(
        "report", help="recompute fronts and proximity from a run directory"
    )
    report_parser.add_argument("directory", type=Path)
    report_parser.add_argument("--nsga2-population", type=int, default=defaults.population_size)
    report_parser.add_argument("--nsga2-generations", type=int, default=defaults.generations)
    report_parser.add_argument("-v", "--verbose", action="store_true")

    plot_parser = commands.add_parser(
        "plot-data", help="per objective pair front CSV files of a run directory"
    )
    plot_parser.add_argument("directory", type=Path)
    plot_parser.add_argument("--out", type=Path, default=None)
    plot_parser.add_argument("-v", "--verbose", action="store_true")

    commands.add_parser("problems", help="list the benchmark catalog")
    return parser


def _run_config(
    args: argparse.Namespace, problem: BenchmarkProblem, mode: str
) -> driver.RunConfig:
    budget = args.budget
    doe_size = args.doe
    if mode == "doe":
        doe_size = doe_size or budget
        budget = doe_size
    elif mode == "offline-sbo":
        budget = budget or doe_size
        doe_size = budget
    if doe_size is None or budget is None:
        raise ValueError("--doe and --budget are required")
    return driver.RunConfig(
        space=problem.space,
        n_objectives=problem.n_objectives,
        n_constraints=problem.n_constraints,
        doe_size=doe_size,
        budget=budget,
        acquisition=AcquisitionConfig(
            criterion=Criterion(args.acq),
            reg=Regularization(args.reg),
            gamma=args.gamma,
            method=args.method,
        ),
        kernel=KernelConfig(family=KernelFamily(args.kernel), n_pls_components=args.pls),
        seed=args.seed,
        maximize=problem.maximize,
        infill_starts=args.infill_starts,
    )


def _study(args: argparse.Namespace, mode: str) -> int:
    catalog = builtin_problems()
    if args.problem not in catalog:
        print(f"segomoe: unknown problem {args.problem!r}", file=sys.stderr)
        print(_catalog(), file=sys.stderr)
        return 2
    problem = catalog[args.problem]
    try:
        config = _run_config(args, problem, mode)
        nsga2 = Nsga2Config(
            population_size=args.nsga2_population,
            generations=args.nsga2_generations,
            seed=args.seed,
        )
    except ValueError as exc:
        print(f"segomoe: {exc}", file=sys.stderr)
        return 2

    directory = args.out or Path(f"runs/{problem.name}-{mode}-seed{args.seed}")
    _configure_logging(args.verbose, directory)
    logger.info("Running %s on %s into %s", mode, problem.name, directory)
    state, result = driver.run(config, problem.evaluate, nsga2)
    extra = {"problem": problem.name, "mode": mode, "nsga2": nsga2.to_dict()}
    artifacts.write_run(directory, state, result, extra)
    if args.validate:
        validation = driver.evaluate_predicted(result, problem.evaluate)
        logger.info(validation.membership.summary("evaluated"))
    print(directory)
    print(result.proximity.summary())
    return 0


def _report(args: argparse.Namespace) -> int:
    directory: Path = args.directory
    _configure_logging(args.verbose)
    config, _ = artifacts.read_config(directory)
    with (directory / artifacts.HISTORY_FILE).open(newline="") as handle:
        evaluations = artifacts.read_history(handle, config)
    state = driver.restore(config, evaluations)
    nsga2 = Nsga2Config(
        population_size=args.nsga2_population,
        generations=args.nsga2_generations,
        seed=config.seed,
    )
    result = driver.finalize(state, nsga2, force=True)
    artifacts.write_results(directory, config, result)
    print(f"{state.n_evaluations} evaluations: {result.proximity.summary()}")
    return 0


def _read_front(path: Path, n_objectives: int) -> np.ndarray:
    names = [f"f{i + 1}" for i in range(n_objectives)]
    with path.open(newline="") as handle:
        rows = [[float(row[name]) for name in names] for row in csv.DictReader(handle)]
    return np.asarray(rows, dtype=float).reshape(len(rows), n_objectives)


def _plot_data(args: argparse.Namespace) -> int:
    directory: Path = args.directory
    _configure_logging(args.verbose)
    config, _ = artifacts.read_config(directory)
    n = config.n_objectives
    database = _read_front(directory / artifacts.PF_DATABASE_FILE, n)
    predicted = _read_front(directory / artifacts.PREDICTED_PF_FILE, n)
    written = artifacts.write_plot_data(args.out or directory / "plot-data", database, predicted)
    for path in written:
        print(path)
    return 0


def _serve(args: argparse.Namespace) -> int:
    import django
    from django.conf import settings
    from django.core.management import call_command

    from segomoe.conf import conf

    _configure_logging(args.verbose)
    options = {}
    if args.data_dir is not None:
        options["SEGOMOE_DATA_DIR"] = str(args.data_dir)
    settings.configure(
        DEBUG=False,
        ALLOWED_HOSTS=["*"],
        SECRET_KEY="segomoe-local",
        INSTALLED_APPS=["segomoe"],
        MIDDLEWARE=["segomoe.middleware.ApiErrorMiddleware"],
        ROOT_URLCONF="segomoe.urls",
        **options,
    )
    django.setup()
    port = args.port if args.port is not None else conf.SEGOMOE_PORT
    logger.info("Serving sessions from %s", conf.SEGOMOE_DATA_DIR)
    call_command("runserver", f"0.0.0.0:{port}", use_reloader=False)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "problems":
        print(_catalog())
        return 0
    if args.command == "run":
        return _study(args, args.mode)
    if args.command in ("doe", "offline-sbo"):
        return _study(args, args.command)
    if args.command == "report":
        return _report(args)
    if args.command == "plot-data":
        return _plot_data(args)
    return _serve(args)
