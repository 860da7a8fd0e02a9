"""Benchmark runs: reading datasets, answering them with an orchestrator, and
writing the results."""

import csv
import hashlib
import json
import logging
import random
import re
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np
from frozendict import frozendict
from tqdm import tqdm

from docteam.config import RunConfig
from docteam.decision import Decision
from docteam.errors import DatasetError
from docteam.orchestrator import Orchestrator
from docteam.query import ComplexityLevel, Query, validate_query

logger = logging.getLogger(__name__)

RESULTS_FILE = "results.jsonl"
SUMMARY_FILE = "summary.json"
TRANSCRIPT_DIR = "transcripts"

FAILED = "failed"
"""The complexity bucket of items whose run raised an error."""

REPORT_COLUMNS = (
    "section",
    "id",
    "round",
    "entropy",
    "complexity",
    "count",
    "predicted",
    "gold",
    "correct",
    "accuracy",
    "calls",
    "cost",
)

_URL_PREFIXES = ("http://", "https://", "data:")
_SAFE_FILE_STEM = re.compile(r"[\w-][\w.-]*")
_UNSAFE_FILE_CHARACTERS = re.compile(r"[^\w.-]+")


def _parse_line(line: str, line_number: int, directory: Path) -> Query:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"Invalid JSON: {exc.msg}", line_number) from exc

    if not isinstance(data, dict):
        raise DatasetError("Expected a JSON object", line_number)

    for key in ("id", "question"):
        if key not in data:
            raise DatasetError(f"Missing field {key}", line_number)

    options = data.get("options") or {}

    if not isinstance(options, dict):
        raise DatasetError("Options must be an object", line_number)

    image = data.get("image")

    if isinstance(image, str) and not image.startswith(_URL_PREFIXES):
        image = str(directory / image) if not Path(image).is_absolute() else image

    return Query(
        id=str(data["id"]),
        question=str(data["question"]),
        options=frozendict({str(k): str(v) for k, v in options.items()}),
        context=data.get("context"),
        attachment=image,
        gold=data.get("answer"),
        dataset_tag=data.get("dataset", ""),
    )


def load_dataset(
    path: Union[str, Path], limit: Optional[int] = None, seed: int = 0
) -> list[Query]:
    """
    Read a dataset of queries, one JSON object per line, with fields ``id``,
    ``question``, ``options`` (letters mapped to texts), ``answer`` and optionally
    ``context``, ``image`` (a path relative to the dataset, or a url) and
    ``dataset``.

    Args:
        path: The JSON lines file.
        limit: When set, a sample of this many queries, drawn uniformly with ``seed``.
            The sample keeps the file order.
        seed: The seed of the sample.

    Returns:
        The queries.

    Raises:
        DatasetError: If a line cannot be parsed (with its line number), or if any
            query is invalid (listing all violations).
    """

    path = Path(path)
    queries = []
    violations = []
    seen: set[str] = set()

    with path.open(encoding="utf-8") as file:
        for line_number, line in enumerate(file, start=1):
            if not line.strip():
                continue

            query = _parse_line(line, line_number, path.parent)

            for violation in validate_query(query):
                violations.append(f"line {line_number} ({query.id}): {violation}")

            if query.id in seen:
                violations.append(f"line {line_number}: duplicate id {query.id}")

            seen.add(query.id)
            queries.append(query)

    if violations:
        raise DatasetError("Invalid dataset:\n" + "\n".join(violations))

    if limit is not None and limit < len(queries):
        if limit < 0:
            raise ValueError(f"Limit cannot be negative, got {limit}.")

        chosen = sorted(random.Random(seed).sample(range(len(queries)), limit))
        queries = [queries[index] for index in chosen]

    logger.debug("Loaded %d queries from %s", len(queries), path)

    return queries


@dataclass(frozen=True)
class ItemRecord:  # pylint: disable=R0902
    """The outcome of one query in an evaluation run."""

    id: str  # pylint: disable=C0103
    predicted: Optional[str]
    gold: Optional[str]
    correct: bool
    complexity: str
    """The level of the executed branch, or ``failed``."""

    method: str = ""
    calls: int = 0
    cost: float = 0.0
    entropy_trace: tuple[tuple[int, float], ...] = ()
    elapsed: float = 0.0
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "flags", tuple(self.flags))
        object.__setattr__(
            self,
            "entropy_trace",
            tuple((int(r), float(h)) for r, h in self.entropy_trace),
        )

    @classmethod
    def from_decision(cls, query: Query, decision: Decision) -> "ItemRecord":
        return cls(
            id=query.id,
            predicted=decision.answer,
            gold=query.gold,
            correct=query.gold is not None and decision.answer == query.gold,
            complexity=decision.complexity.value,
            method=decision.method,
            calls=decision.stats.calls,
            cost=decision.stats.estimated_cost,
            entropy_trace=decision.entropy_trace,
            elapsed=decision.elapsed,
            flags=decision.flags,
        )

    @classmethod
    def failed(cls, query: Query, error: Exception) -> "ItemRecord":
        """The record of a query whose run raised an error. It counts as incorrect."""

        return cls(
            id=query.id,
            predicted=None,
            gold=query.gold,
            correct=False,
            complexity=FAILED,
            flags=("error", f"error:{type(error).__name__}"),
        )

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["entropy_trace"] = [list(point) for point in self.entropy_trace]
        data["flags"] = list(self.flags)

        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ItemRecord":
        return cls(
            **{
                **data,
                "entropy_trace": tuple(tuple(p) for p in data.get("entropy_trace", ())),
                "flags": tuple(data.get("flags", ())),
            }
        )


@dataclass(frozen=True)
class EvalSummary:  # pylint: disable=R0902
    """The aggregate figures of an evaluation run."""

    count: int
    correct: int
    accuracy: float
    mean_calls: float
    mean_cost: float
    total_cost: float
    complexity_distribution: frozendict = field(default_factory=frozendict)
    """Complexity levels (and ``failed``) mapped to their number of items."""

    failures: int = 0
    mode: str = "adaptive"
    seed: int = 0
    config_hash: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "complexity_distribution", frozendict(self.complexity_distribution)
        )

        if sum(self.complexity_distribution.values()) != self.count:
            raise ValueError("The complexity distribution must sum to the count.")

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["complexity_distribution"] = dict(self.complexity_distribution)

        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EvalSummary":
        return cls(**data)


def summarize(records: Sequence[ItemRecord], config: RunConfig) -> EvalSummary:
    """Compute the summary of item records."""

    count = len(records)
    correct = sum(record.correct for record in records)
    calls = np.array([record.calls for record in records], dtype=float)
    costs = np.array([record.cost for record in records], dtype=float)

    distribution = {
        level: sum(record.complexity == level for record in records)
        for level in [level.value for level in ComplexityLevel] + [FAILED]
    }

    return EvalSummary(
        count=count,
        correct=correct,
        accuracy=correct / count if count else 0.0,
        mean_calls=float(calls.mean()) if count else 0.0,
        mean_cost=float(costs.mean()) if count else 0.0,
        total_cost=float(costs.sum()),
        complexity_distribution=frozendict(
            {level: n for level, n in distribution.items() if n or level != FAILED}
        ),
        failures=distribution[FAILED],
        mode=config.mode,
        seed=config.seed,
        config_hash=config.config_hash(),
    )


@dataclass(frozen=True)
class EvalResult:
    """The item records and the summary of an evaluation run."""

    records: tuple[ItemRecord, ...]
    summary: EvalSummary

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))

    def to_dict(self) -> dict[str, Any]:
        return {
            "records": [record.to_dict() for record in self.records],
            "summary": self.summary.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EvalResult":
        return cls(
            records=tuple(ItemRecord.from_dict(item) for item in data["records"]),
            summary=EvalSummary.from_dict(data["summary"]),
        )

    @classmethod
    def from_dir(cls, directory: Union[str, Path]) -> "EvalResult":
        """
        Read the result of a run from its output directory.

        Raises:
            FileNotFoundError: If the directory has no results.
        """

        directory = Path(directory)
        records = _read_records(directory / RESULTS_FILE)

        with (directory / SUMMARY_FILE).open(encoding="utf-8") as file:
            summary = EvalSummary.from_dict(json.load(file))

        return cls(records=tuple(records.values()), summary=summary)


def _read_records(path: Path) -> dict[str, ItemRecord]:
    if not path.exists():
        return {}

    with path.open(encoding="utf-8") as file:
        lines = [line for line in file if line.strip()]

    records = [ItemRecord.from_dict(json.loads(line)) for line in lines]

    return {record.id: record for record in records}


def _write_json(path: Path, data: Any) -> None:
    with path.open("w", encoding="utf-8") as file:
        json.dump(data, file, indent=2, sort_keys=True, ensure_ascii=False)
        file.write("\n")


def transcript_name(query_id: str) -> str:
    """
    The transcript file name of a query. Ids that are not plain file names (like
    ``../x`` or ``a/b``) are made safe, with a hash of the id to keep names unique.
    """

    if _SAFE_FILE_STEM.fullmatch(query_id):
        return f"{query_id}.json"

    stem = _UNSAFE_FILE_CHARACTERS.sub("_", query_id).strip("._")[:40]
    digest = hashlib.sha256(query_id.encode("utf-8")).hexdigest()[:12]

    return f"{stem}-{digest}.json" if stem else f"{digest}.json"


def _write_transcript(directory: Path, query: Query, decision: Decision) -> None:
    _write_json(
        directory / transcript_name(query.id),
        {
            "query": query.to_dict(),
            "decision": decision.to_dict(),
            "transcript": decision.transcript.to_list(),
            "reports": [report.to_dict() for report in decision.reports],
        },
    )


def run_eval(  # pylint: disable=R0913
    queries: Sequence[Query],
    orchestrator: Orchestrator,
    out_dir: Union[str, Path],
    config: Optional[RunConfig] = None,
    parallelism: int = 4,
    progress: bool = False,
) -> EvalResult:
    """
    Answer queries with an orchestrator, and write the results. Item records are
    appended to ``results.jsonl`` as they complete, so that a run can be resumed:
    queries that already have a record are not run again.

    Args:
        queries: The queries.
        orchestrator: The orchestrator to answer with.
        out_dir: The output directory. It receives ``results.jsonl``,
            ``summary.json`` and a transcript per query in ``transcripts/``.
        config: The run configuration. Defaults to the orchestrator's.
        parallelism: The maximum number of queries answered at the same time, further
            bounded by the concurrency the backend allows.
        progress: Whether to show a progress bar.

    Returns:
        The records of all queries, in query order, and the summary. A query whose
        run raised an error is recorded as incorrect and flagged ``error``.
    """

    config = config or orchestrator.config
    out_dir = Path(out_dir)
    transcripts = out_dir / TRANSCRIPT_DIR
    transcripts.mkdir(parents=True, exist_ok=True)

    results_path = out_dir / RESULTS_FILE
    done = _read_records(results_path)
    pending = [query for query in queries if query.id not in done]

    if len(pending) < len(queries):
        logger.info("Resuming, skipping %d queries", len(queries) - len(pending))

    write_lock = threading.Lock()

    def answer(query: Query) -> ItemRecord:
        try:
            decision = orchestrator.run(query, config)
        except Exception as exc:  # pylint: disable=W0703
            logger.error("Query %s failed", query.id, exc_info=True)
            record = ItemRecord.failed(query, exc)
        else:
            record = ItemRecord.from_decision(query, decision)
            _write_transcript(transcripts, query, decision)

        with write_lock, results_path.open("a", encoding="utf-8") as file:
            file.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")

        return record

    workers = max(1, min(parallelism, orchestrator.backend.max_concurrency))

    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(answer, query) for query in pending]

        for future in tqdm(
            as_completed(futures),
            total=len(futures),
            desc="Evaluating",
            disable=not progress,
        ):
            record = future.result()
            done[record.id] = record

    records = tuple(done[query.id] for query in queries)
    result = EvalResult(records=records, summary=summarize(records, config))
    _write_json(out_dir / SUMMARY_FILE, result.summary.to_dict())

    return result


def _report_rows(result: EvalResult) -> list[dict[str, Any]]:
    rows: list[dict[str, Any]] = []

    for record in result.records:
        rows.append(
            {
                "section": "item",
                "id": record.id,
                "complexity": record.complexity,
                "predicted": record.predicted,
                "gold": record.gold,
                "correct": record.correct,
                "calls": record.calls,
                "cost": record.cost,
            }
        )

    for record in result.records:
        for round_no, entropy in record.entropy_trace:
            rows.append(
                {
                    "section": "entropy",
                    "id": record.id,
                    "round": round_no,
                    "entropy": entropy,
                }
            )

    if result.records:
        for level, count in result.summary.complexity_distribution.items():
            rows.append({"section": "complexity", "complexity": level, "count": count})

        summary = result.summary
        rows.append(
            {
                "section": "summary",
                "count": summary.count,
                "accuracy": summary.accuracy,
                "calls": summary.mean_calls,
                "cost": summary.mean_cost,
            }
        )

    return rows


def emit_report(
    result: EvalResult, path: Union[str, Path], report_format: str = "csv"
) -> Path:
    """
    Write a report of an evaluation run.

    Args:
        result: The result.
        path: The file to write.
        report_format: ``csv`` for plot-ready rows, with a ``section`` column that is
            ``item``, ``entropy`` (one row per round), ``complexity`` (one row per
            level) or ``summary``; ``json`` for the full result.

    Returns:
        The path of the report.

    Raises:
        ValueError: If the format is unknown.
    """

    path = Path(path)

    if report_format == "json":
        _write_json(path, result.to_dict())
        return path

    if report_format != "csv":
        raise ValueError(f"Unknown report format {report_format}.")

    with path.open("w", encoding="utf-8", newline="") as file:
        writer = csv.DictWriter(file, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(_report_rows(result))

    return path


@dataclass(frozen=True)
class SeedSummary:
    """The accuracy of repeated runs with different seeds."""

    accuracies: tuple[float, ...]
    mean: float
    sd: float  # pylint: disable=C0103

    def __str__(self) -> str:
        return f"{self.mean:.3f} ± {self.sd:.3f} (n={len(self.accuracies)})"


def summarize_seeds(results: Sequence[EvalResult]) -> SeedSummary:
    """
    Summarize the accuracy of runs that differ only in their seed.

    Returns:
        The mean and sample standard deviation of the accuracies. The deviation is 0
        for a single run.

    Raises:
        ValueError: If there are no results.
    """

    if not results:
        raise ValueError("Cannot summarize no results.")

    accuracies = np.array([result.summary.accuracy for result in results])
    sd = float(accuracies.std(ddof=1)) if len(accuracies) > 1 else 0.0

    return SeedSummary(
        accuracies=tuple(float(a) for a in accuracies),
        mean=float(accuracies.mean()),
        sd=sd,
    )
