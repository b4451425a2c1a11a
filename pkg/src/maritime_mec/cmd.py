"""Command line interface for maritime-mec."""
import logging
import sys
from argparse import ArgumentParser
from pathlib import Path
from typing import List, Optional, Sequence

from ._config import POLICIES, ScenarioConfig, load_config
from ._error import MaritimeMecError, make_error
from .monitor import default_monitors
from .sim import CsvSink, run_simulation, write_summary
from .sweep import (
    COMPARE_COLUMNS,
    SWEEP_COLUMNS,
    SWEEP_PARAMS,
    SweepSpec,
    run_compare,
    run_sweep,
    write_rows,
)
from .validate import DetailedMismatchFormatter, MismatchFormatter, certify

_MISMATCH_FORMATTERS = {
    "simple": MismatchFormatter,
    "full": DetailedMismatchFormatter,
}

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MISMATCH = 2


class _ArgumentParser(ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _policies(text: Optional[str]) -> List[str]:
    if text is None:
        return ["JCORA"]
    if text.lower() == "all":
        return list(POLICIES)
    return [p.strip().upper() for p in text.split(",") if p.strip()]


def _values(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise make_error(
            "C0009",
            {"field": "sweep.values", "expected": "comma separated numbers", "value": text},
        ) from e


def _resolve_config(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "single_policy", None) is not None:
        changes["policy"] = args.single_policy.upper()
    if getattr(args, "slots", None) is not None:
        changes["horizon_slots"] = args.slots
    return cfg.replace(**changes) if changes else cfg


def _output_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run(args) -> int:
    cfg = _resolve_config(args)
    out = _output_dir(args.out)
    with CsvSink(out / "slots.csv", cfg) as sink:
        summary, _ = run_simulation(cfg, sink=sink, monitors=default_monitors(cfg))
    write_summary(out / "summary.json", summary, cfg)
    return EXIT_OK


def _sweep(args) -> int:
    cfg = _resolve_config(args)
    spec = SweepSpec(
        param=args.param,
        values=tuple(_values(args.values)),
        reps=args.reps,
        policies=tuple(_policies(args.policy)),
        base=cfg,
    )
    rows = run_sweep(spec, workers=args.workers)
    out = _output_dir(args.out)
    write_rows(
        out / "sweep.csv",
        rows,
        SWEEP_COLUMNS,
        cfg,
        extra={"sweep_param": spec.param, "sweep_reps": spec.reps},
    )
    return EXIT_OK


def _compare(args) -> int:
    cfg = _resolve_config(args)
    policies = _policies(args.policy or "all")
    rows = run_compare(
        cfg, reps=args.reps, policies=policies, workers=args.workers
    )
    out = _output_dir(args.out)
    write_rows(out / "compare.csv", rows, COMPARE_COLUMNS, cfg, extra={"reps": args.reps})
    return EXIT_OK


def _validate(args) -> int:
    cfg = load_config(args.config)
    formatter = certify(
        args.instances,
        seed=0 if args.seed is None else args.seed,
        cfg=cfg,
        formatter=_MISMATCH_FORMATTERS[args.format](),
    )
    formatter.write(sys.stdout, certified=args.instances)
    if formatter.has_mismatches:
        print("Found {} mismatches.".format(formatter.mismatches))
        return EXIT_MISMATCH
    return EXIT_OK


def _add_common(parser: ArgumentParser) -> None:
    parser.add_argument("--config", default="default")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--verbose", action="store_true")


def build_parser() -> ArgumentParser:
    parser = _ArgumentParser(
        prog="maritime-mec",
        description="Simulate and certify maritime edge-computing schedulers",
    )
    commands = parser.add_subparsers(
        dest="command", required=True, parser_class=_ArgumentParser
    )

    run = commands.add_parser("run", help="simulate one scenario")
    _add_common(run)
    run.add_argument("--slots", type=int)
    run.add_argument("--policy", dest="single_policy", choices=POLICIES, type=str.upper)
    run.add_argument("--out", default=".")
    run.set_defaults(handler=_run)

    sweep = commands.add_parser("sweep", help="sweep one parameter")
    _add_common(sweep)
    sweep.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    sweep.add_argument("--values", required=True)
    sweep.add_argument("--reps", type=int, default=1)
    sweep.add_argument("--policy")
    sweep.add_argument("--slots", type=int)
    sweep.add_argument("--workers", type=int)
    sweep.add_argument("--out", default=".")
    sweep.set_defaults(handler=_sweep)

    compare = commands.add_parser("compare", help="run every policy on the same seeds")
    _add_common(compare)
    compare.add_argument("--reps", type=int, default=1)
    compare.add_argument("--policy")
    compare.add_argument("--slots", type=int)
    compare.add_argument("--workers", type=int)
    compare.add_argument("--out", default=".")
    compare.set_defaults(handler=_compare)

    validate = commands.add_parser("validate", help="certify the scheduler by brute force")
    _add_common(validate)
    validate.add_argument("--instances", type=int, default=100)
    validate.add_argument("--format", choices=["simple", "full"], default="simple")
    validate.set_defaults(handler=_validate)
    return parser


def execute(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments and run a subcommand.

    Parameters
    ----------
    argv : sequence of str, optional
        Arguments without the program name; ``sys.argv[1:]`` when omitted.

    Returns
    -------
    int
        0 on success, 1 on usage, configuration or output errors and 2 when
        certification finds a mismatch.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except MaritimeMecError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print("Cannot write output: {}".format(e), file=sys.stderr)
        return EXIT_USAGE


def run() -> None:
    sys.exit(execute())
