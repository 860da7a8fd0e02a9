"""Decision methods: voting over agents, and the final decision over collected
evidence."""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from docteam.agent import DECIDER, MODERATOR, ExpertRoster
from docteam.consultation import ANSWER_FALLBACK, Consultation
from docteam.decision import Decision
from docteam.errors import InvalidWeightError, MissingRankingError
from docteam.metrics import consensus_entropy
from docteam.parse.answer import parse_confidence, parse_ranking
from docteam.parse.outcome import ParseOutcome
from docteam.process.prompt_processor import InjectionSite
from docteam.prompts import (
    CONFIDENCE_REQUEST,
    DECIDER_SYSTEM,
    MODERATOR_SYSTEM,
    RANKING_REQUEST,
    agent_system_prompt,
    final_decision_prompt,
    format_reports,
    opinion_prompt,
)
from docteam.query import ComplexityLevel
from docteam.transcript import EventKind, Report

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Vote:
    """The answer of one agent, with an optional weight and ranking of all options."""

    agent_id: str
    answer: str
    weight: float = 1.0
    ranking: Optional[tuple[str, ...]] = None
    """All option keys, best first."""

    def __post_init__(self) -> None:
        if not math.isfinite(self.weight):
            raise ValueError(f"Weight of {self.agent_id} must be finite.")

        if self.ranking is not None:
            object.__setattr__(self, "ranking", tuple(self.ranking))

            if len(set(self.ranking)) != len(self.ranking):
                raise ValueError(f"Ranking of {self.agent_id} repeats an option.")


def _best(answers: np.ndarray, totals: np.ndarray) -> str:
    """The answer with the highest total. ``answers`` is sorted, so ties go to the
    first in letter order."""

    return str(answers[int(np.argmax(totals))])


def majority_answer(answers: Sequence[str]) -> str:
    """
    The most frequent answer, with ties broken by letter order.

    Raises:
        ValueError: If there are no answers.
    """

    if not answers:
        raise ValueError("Cannot take the majority of no answers.")

    unique, counts = np.unique(np.array(list(answers), dtype=str), return_counts=True)

    return _best(unique, counts)


def majority(votes: Sequence[Vote]) -> str:
    """The modal answer of the votes, with ties broken by letter order."""

    return majority_answer([vote.answer for vote in votes])


def weighted(votes: Sequence[Vote]) -> str:
    """
    The answer with the largest total weight, with ties broken by letter order.

    Raises:
        ValueError: If there are no votes.
        InvalidWeightError: If any weight is negative.
    """

    if not votes:
        raise ValueError("Cannot aggregate no votes.")

    negative = [vote.agent_id for vote in votes if vote.weight < 0]

    if negative:
        raise InvalidWeightError(f"Negative weights from {', '.join(negative)}.")

    answers = np.array([vote.answer for vote in votes], dtype=str)
    unique, inverse = np.unique(answers, return_inverse=True)
    totals = np.bincount(inverse, weights=[vote.weight for vote in votes])

    return _best(unique, totals)


def borda(votes: Sequence[Vote]) -> str:
    """
    The Borda winner: with ``m`` options, the option ranked at position ``i`` (0 is
    best) earns ``m - 1 - i`` points per vote. Ties are broken by letter order.

    Raises:
        ValueError: If there are no votes, or the rankings are over different options.
        MissingRankingError: If a vote has no ranking.
    """

    if not votes:
        raise ValueError("Cannot aggregate no votes.")

    missing = [vote.agent_id for vote in votes if vote.ranking is None]

    if missing:
        raise MissingRankingError(f"No ranking from {', '.join(missing)}.")

    keys = sorted(votes[0].ranking or ())

    if len(keys) < 2:
        raise ValueError("A Borda count needs rankings of at least two options.")

    if any(sorted(vote.ranking or ()) != keys for vote in votes):
        raise ValueError("All rankings must be over the same options.")

    column = {key: index for index, key in enumerate(keys)}
    points = np.zeros((len(votes), len(keys)))

    for row, vote in enumerate(votes):
        for position, key in enumerate(vote.ranking or ()):
            points[row, column[key]] = len(keys) - 1 - position

    return _best(np.array(keys), points.sum(axis=0))


GROUP_METHODS = {"majority": majority, "weighted": weighted, "borda": borda}


@dataclass(frozen=True)
class EnsembleOutcome:
    """The result of sampling one prompt at several temperatures."""

    answer: str
    samples: tuple[Optional[str], ...]
    """The answer extracted at each temperature, ``None`` where extraction failed."""


def temperature_ensemble(  # pylint: disable=R0913
    consultation: Consultation,
    prompt: str,
    system: str,
    temperatures: Sequence[float],
    tag: str = "decide",
    speaker: str = DECIDER,
) -> EnsembleOutcome:
    """
    Sample a final decision prompt once per temperature, and take the majority.

    Args:
        consultation: The consultation to decide in.
        prompt: The final decision prompt.
        system: The system prompt.
        temperatures: The temperatures, one call each.
        tag: The request tag.
        speaker: Who the decisions are recorded for.

    Returns:
        The majority over the extracted answers. The fallback answer when none could
        be extracted.

    Raises:
        ValueError: If no temperatures are given.
    """

    if not temperatures:
        raise ValueError("A temperature ensemble needs at least one temperature.")

    requests = [
        consultation.request(tag, prompt, system, step="decide", temperature=t)
        for t in temperatures
    ]
    responses = consultation.complete_many(requests)
    round_no, turn = consultation.transcript.last_position
    samples = []

    for response in responses:
        outcome = consultation.extract(response.text)
        samples.append(outcome.value)
        consultation.transcript.record(
            EventKind.DECISION,
            speaker,
            response.text,
            round_no=round_no,
            turn=turn,
            extracted_answer=outcome.value,
            flags=() if outcome.ok else (ANSWER_FALLBACK,),
        )

    extracted = [sample for sample in samples if sample is not None]

    if extracted:
        answer = majority_answer(extracted)
    else:
        answer, _ = consultation.resolve(ParseOutcome.fallback(""))

    return EnsembleOutcome(answer=answer, samples=tuple(samples))


@dataclass(frozen=True)
class InitialResponse:
    """The evidence of a single expert: the answer it gave."""

    answer: str


@dataclass(frozen=True)
class Interaction:
    """The evidence of a team discussion: the discussion log."""

    log: str


@dataclass(frozen=True)
class TeamReports:
    """The evidence of a team pipeline: the reports of all teams."""

    reports: tuple[Report, ...]


Evidence = Union[InitialResponse, Interaction, TeamReports]


def final_decide(
    consultation: Consultation, evidence: Evidence, speaker: Optional[str] = None
) -> str:
    """
    Make the final decision on the evidence, with the configured decision method.

    Args:
        consultation: The consultation to decide in.
        evidence: What was collected on the query.
        speaker: Who makes the decision. Defaults to the moderator for a discussion,
            and the decider for reports.

    Returns:
        The answer. For an initial response, that is the response's answer, and no
        call is made.
    """

    if isinstance(evidence, InitialResponse):
        return evidence.answer

    if isinstance(evidence, Interaction):
        inputs, body = "conversation history", evidence.log
        speaker = speaker or MODERATOR
    else:
        inputs = "reports"
        body = format_reports(
            [(report.team_name, report.body) for report in evidence.reports]
        )
        speaker = speaker or DECIDER

    prompt = final_decision_prompt(consultation.query, inputs, body)
    system = MODERATOR_SYSTEM if speaker == MODERATOR else DECIDER_SYSTEM
    config = consultation.config

    if config.decision_method == "ensemble":
        outcome = temperature_ensemble(
            consultation,
            prompt,
            system,
            config.ensemble_temperatures,
            tag="decide.ensemble",
            speaker=speaker,
        )

        return outcome.answer

    response = consultation.complete(
        consultation.request("decide", prompt, system, step="decide")
    )
    outcome = consultation.extract(response.text)
    answer, flags = consultation.resolve(outcome)
    round_no, turn = consultation.transcript.last_position
    consultation.transcript.record(
        EventKind.DECISION,
        speaker,
        response.text,
        round_no=round_no,
        turn=turn,
        extracted_answer=outcome.value,
        flags=flags,
    )

    return answer


def vote_as_group(
    consultation: Consultation, roster: ExpertRoster, method: str
) -> Decision:
    """
    Answer a query by a vote of independent experts, without discussion. Each agent
    gives one opinion, extended with a confidence (weighted voting) or a ranking of
    all options (Borda count).

    Args:
        consultation: The consultation.
        roster: The experts that vote.
        method: One of ``majority``, ``weighted`` and ``borda``.

    Returns:
        The decision.
    """

    if method not in GROUP_METHODS:
        raise ValueError(f"Unknown voting method {method}.")

    query = consultation.query
    extra = {"weighted": (CONFIDENCE_REQUEST,), "borda": (RANKING_REQUEST,)}
    requests = []

    for agent in roster.agents:
        system = consultation.prepare(
            agent_system_prompt(agent), InjectionSite.AGENT_SYSTEM, agent
        )
        prompt = consultation.prepare(
            opinion_prompt(query, extra.get(method, ())),
            InjectionSite.EXPERT_PROMPT,
            agent,
        )
        requests.append(
            consultation.request(
                "group.opinion",
                prompt,
                system,
                step="agent",
                temperature=agent.temperature,
            )
        )

    votes = []

    for agent, response in zip(roster.agents, consultation.complete_many(requests)):
        outcome = consultation.extract(response.text)
        answer, flags = consultation.resolve(outcome)
        ranking = None

        if method == "borda":
            ranked = parse_ranking(response.text, query.option_keys)

            if ranked.value is None:
                rest = [key for key in sorted(query.option_keys) if key != answer]
                ranked_keys: tuple[str, ...] = (answer, *rest)
                logger.info("No ranking from %s, ranking its answer first", agent.role)
                flags += ("ranking-fallback",)
                consultation.flag("ranking-fallback")
            else:
                ranked_keys = ranked.value

            ranking = ranked_keys

        votes.append(
            Vote(
                agent_id=agent.agent_id,
                answer=answer,
                weight=(
                    parse_confidence(response.text) if method == "weighted" else 1.0
                ),
                ranking=ranking,
            )
        )
        consultation.transcript.record(
            EventKind.OPINION,
            agent.agent_id,
            response.text,
            extracted_answer=outcome.value,
            flags=flags,
        )

    answer = GROUP_METHODS[method](votes)

    return consultation.conclude(
        answer=answer,
        method=f"group:{method}",
        complexity=ComplexityLevel.MODERATE,
        votes={
            vote.agent_id: (vote.answer, vote.weight if method == "weighted" else None)
            for vote in votes
        },
        entropy_trace=((0, consensus_entropy([vote.answer for vote in votes])),),
        roster=roster,
    )
