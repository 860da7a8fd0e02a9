"""The ``docteam`` command."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import NoReturn, Optional, Sequence

from frozendict import frozendict

from docteam.backend.factory import create_backend
from docteam.config import MODES, Settings, load_settings
from docteam.errors import DocteamError
from docteam.harness import (
    EvalResult,
    emit_report,
    load_dataset,
    run_eval,
    summarize_seeds,
)
from docteam.metrics import build_level_table, expected_accuracy
from docteam.orchestrator import Orchestrator
from docteam.parse.outcome import Confidence
from docteam.query import ComplexityLevel, Query
from docteam.retrieval import index_corpus
from docteam.solo import load_exemplars

logger = logging.getLogger(__name__)

USAGE_ERROR = 1
RUNTIME_ERROR = 2

DEFAULT_WEIGHTS = (0.81, 0.11, 0.08)
"""How often routing picks the best, middle and worst level for a query."""


class _Parser(argparse.ArgumentParser):
    """Exits with status 1 on usage errors."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _common_options() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="a TOML configuration file")
    common.add_argument(
        "--backend",
        help="scripted:<script.json>, replay:<session.jsonl> or http "
        "(overrides the configuration)",
    )
    common.add_argument(
        "--log-level",
        default="WARNING",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
    )

    return common


def _question_options(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--question", help="the question text")
    source.add_argument("--file", help="a dataset file, one query per line")
    parser.add_argument(
        "--option",
        action="append",
        default=[],
        metavar="LETTER=TEXT",
        help="an answer option (repeatable), with --question",
    )
    parser.add_argument("--context", help="a passage the question is about")


def build_parser() -> argparse.ArgumentParser:
    """The argument parser of the ``docteam`` command."""

    common = _common_options()
    parser = _Parser(
        prog="docteam",
        description="Answer medical questions with adaptive teams of language model "
        "agents.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    classify = commands.add_parser(
        "classify", parents=[common], help="classify the complexity of queries"
    )
    _question_options(classify)

    run = commands.add_parser("run", parents=[common], help="answer queries")
    _question_options(run)
    run.add_argument("--mode", choices=MODES)
    run.add_argument("--seed", type=int)
    run.add_argument("--json", action="store_true", help="print decisions as JSON")

    evaluate = commands.add_parser(
        "eval", parents=[common], help="evaluate on a dataset"
    )
    evaluate.add_argument("--dataset", required=True)
    evaluate.add_argument("--mode", choices=MODES)
    evaluate.add_argument("--limit", type=int)
    evaluate.add_argument("--seed", type=int)
    evaluate.add_argument("--out", required=True, help="the output directory")
    evaluate.add_argument("--parallelism", type=int)
    evaluate.add_argument("--progress", action="store_true")

    replay = commands.add_parser(
        "replay", parents=[common], help="evaluate against a recorded session"
    )
    replay.add_argument("--session", required=True)
    replay.add_argument("--dataset", required=True)
    replay.add_argument("--mode", choices=MODES)
    replay.add_argument("--limit", type=int)
    replay.add_argument("--seed", type=int)
    replay.add_argument("--out", required=True)

    report = commands.add_parser(
        "report", parents=[common], help="write a report of an evaluation run"
    )
    report.add_argument(
        "--in",
        dest="inputs",
        nargs="+",
        required=True,
        help="the output directory of a run, or of several runs that differ in seed",
    )
    report.add_argument("--format", choices=("csv", "json"), default="csv")
    report.add_argument("--out", help="the report file, for a single run")

    levels = commands.add_parser(
        "levels",
        parents=[common],
        help="estimate the success rate of each query at each complexity level",
    )
    levels.add_argument("--dataset", required=True)
    levels.add_argument("--limit", type=int)
    levels.add_argument("--reps", type=int, default=1)
    levels.add_argument(
        "--weights",
        nargs=3,
        type=float,
        default=list(DEFAULT_WEIGHTS),
        metavar=("A", "B", "C"),
        help="the weights of the best, middle and worst level",
    )

    return parser


def _settings(args: argparse.Namespace) -> Settings:
    """The settings from the configuration file, with the command line overrides."""

    settings = load_settings(args.config)
    backend = getattr(args, "backend", None)

    if getattr(args, "session", None) is not None:
        backend = f"replay:{args.session}"

    if backend is not None:
        kind, _, path = backend.partition(":")
        paths = {"scripted": "script_path", "replay": "session_path"}

        if kind not in ("scripted", "replay", "http") or (kind in paths and not path):
            raise ValueError(f"Invalid backend {backend}.")

        update = {"kind": kind, **({paths[kind]: path} if kind in paths else {})}
        settings = settings.model_copy(
            update={"backend": settings.backend.model_copy(update=update)}
        )

    overrides = {
        name: getattr(args, name)
        for name in ("mode", "seed")
        if getattr(args, name, None) is not None
    }

    if overrides:
        settings = settings.model_copy(
            update={"run": settings.run.with_overrides(**overrides)}
        )

    return settings


def _orchestrator(settings: Settings) -> Orchestrator:
    backend = create_backend(settings.backend, settings.prices)
    exemplars = (
        load_exemplars(settings.exemplars_path) if settings.exemplars_path else []
    )
    index = index_corpus(settings.corpus_path) if settings.corpus_path else None

    return Orchestrator(backend, settings.run, exemplars=exemplars, index=index)


def _queries(args: argparse.Namespace) -> list[Query]:
    if args.file is not None:
        return load_dataset(args.file)

    options = {}

    for option in args.option:
        letter, separator, text = option.partition("=")

        if not separator:
            raise ValueError(f"Option {option} is not of the form LETTER=TEXT.")

        options[letter.strip().upper()] = text.strip()

    return [
        Query(
            id="question",
            question=args.question,
            options=frozendict(options),
            context=args.context,
        )
    ]


def cmd_classify(args: argparse.Namespace) -> int:
    """Print the complexity of each query, with its confidence unless exact."""

    orchestrator = _orchestrator(_settings(args))
    queries = _queries(args)

    for query in queries:
        consultation = orchestrator.consult(query)
        level = orchestrator.classify_complexity(query, consultation)
        confidence = consultation.metadata["complexity_confidence"]
        line = level.value

        if confidence is not Confidence.EXACT:
            line += f" ({confidence.value})"

        print(line if len(queries) == 1 else f"{query.id}\t{line}")

    return 0


def cmd_run(args: argparse.Namespace) -> int:
    """Answer each query and print the decision."""

    orchestrator = _orchestrator(_settings(args))

    for query in _queries(args):
        decision = orchestrator.run(query)

        if args.json:
            print(json.dumps({"id": query.id, **decision.to_dict()}, sort_keys=True))
        else:
            flags = f" [{', '.join(decision.flags)}]" if decision.flags else ""
            print(
                f"{query.id}\t{decision.answer}\t{decision.complexity.value}\t"
                f"{decision.method}{flags}"
            )

    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    """Evaluate on a dataset, and print the summary."""

    settings = _settings(args)
    queries = load_dataset(args.dataset, args.limit, settings.run.seed)
    result = run_eval(
        queries,
        _orchestrator(settings),
        args.out,
        parallelism=getattr(args, "parallelism", None) or settings.parallelism,
        progress=getattr(args, "progress", False),
    )

    print(json.dumps(result.summary.to_dict(), indent=2, sort_keys=True))

    return 0


def cmd_report(args: argparse.Namespace) -> int:
    """
    Write a report of each evaluation run. For several runs, also print the accuracy
    over the runs.
    """

    if args.out is not None and len(args.inputs) > 1:
        raise ValueError("--out needs a single run.")

    results = []

    for directory in args.inputs:
        result = EvalResult.from_dir(directory)
        out = args.out or Path(directory) / f"report.{args.format}"
        print(emit_report(result, out, args.format))
        results.append(result)

    if len(results) > 1:
        print(f"accuracy over seeds: {summarize_seeds(results)}")

    return 0


def cmd_levels(args: argparse.Namespace) -> int:
    """
    Print the success rate of each query at each complexity level, and the expected
    accuracy of routing with the given weights.
    """

    settings = _settings(args)
    queries = load_dataset(args.dataset, args.limit, settings.run.seed)
    table = build_level_table(queries, args.reps, _orchestrator(settings))

    print("\t".join(["id"] + [level.value for level in ComplexityLevel]))

    for query in queries:
        rates = table.rates[query.id]
        row = [f"{rates[level]:.2f}" for level in ComplexityLevel]
        print("\t".join([query.id] + row))

    print(f"expected accuracy: {expected_accuracy(*args.weights, table):.3f}")

    return 0


COMMANDS = {
    "classify": cmd_classify,
    "run": cmd_run,
    "eval": cmd_eval,
    "replay": cmd_eval,
    "report": cmd_report,
    "levels": cmd_levels,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the ``docteam`` command.

    Returns:
        The exit status: 0 on success, 1 on usage errors and 2 on runtime errors.
    """

    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        return COMMANDS[args.command](args)
    except (DocteamError, OSError, ValueError) as exc:
        logger.debug("Command %s failed", args.command, exc_info=True)
        print(f"docteam: error: {exc}", file=sys.stderr)

        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
