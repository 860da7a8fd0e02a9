"""Single-agent strategies: the low complexity path, and the solo baselines."""

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence, Union

from frozendict import frozendict

from docteam.agent import AgentSpec
from docteam.aggregate import majority_answer
from docteam.consultation import Consultation
from docteam.parse.answer import extract_answer
from docteam.parse.outcome import ParseOutcome
from docteam.process.prompt_processor import InjectionSite
from docteam.prompts import agent_system_prompt, few_shot_prompt, refinement_prompt
from docteam.query import CLOSED_ANSWERS, OPTION_LETTERS, canonical_answer
from docteam.text import token_overlap
from docteam.transcript import EventKind

logger = logging.getLogger(__name__)

SOLO_AGENT = AgentSpec(
    agent_id="medical-expert",
    role="Medical Expert",
    description="answers medical multiple choice questions",
)
"""The agent that answers in the solo baselines, which recruit nobody."""


@dataclass(frozen=True)
class Exemplar:
    """A worked example, shown to the model before the question."""

    question: str
    options: frozendict = field(default_factory=frozendict)
    answer: str = ""
    rationale: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "options", frozendict(self.options))
        answer = canonical_answer(self.answer)

        if answer is None:
            raise ValueError(f"Exemplar answer {self.answer!r} is not an answer.")

        object.__setattr__(self, "answer", answer)

        if self.options and answer not in self.options:
            raise ValueError(f"Exemplar answer {answer} is not one of its options.")

        if not self.options and answer not in CLOSED_ANSWERS:
            raise ValueError(f"Exemplar answer {answer} needs options.")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Exemplar":
        return cls(
            question=data["question"],
            options=data.get("options", {}),
            answer=data["answer"],
            rationale=data.get("rationale") or None,
        )


def load_exemplars(path: Union[str, Path]) -> list[Exemplar]:
    """
    Load exemplars from a JSON file with a list of objects with ``question``,
    ``options``, ``answer`` and optionally ``rationale``.
    """

    with Path(path).open(encoding="utf-8") as file:
        data = json.load(file)

    if not isinstance(data, list):
        raise ValueError(f"Exemplar file {path} must contain a list.")

    return [Exemplar.from_dict(item) for item in data]


@dataclass(frozen=True)
class SoloOutcome:
    """The answer of a single agent strategy, and the votes it was based on."""

    answer: str
    votes: frozendict = field(default_factory=frozendict)
    """Sample names (or the agent id) mapped to ``(answer, None)``."""


def _system(consultation: Consultation, agent: AgentSpec) -> str:
    return consultation.prepare(
        agent_system_prompt(agent, in_team=False), InjectionSite.AGENT_SYSTEM, agent
    )


def _record(
    consultation: Consultation, agent: AgentSpec, text: str, turn: int = 0
) -> Optional[str]:
    """Record an opinion, and get the answer extracted from it."""

    outcome = consultation.extract(text)
    round_no, _ = consultation.transcript.last_position
    consultation.transcript.record(
        EventKind.OPINION,
        agent.agent_id,
        text,
        round_no=round_no,
        turn=turn,
        extracted_answer=outcome.value,
        flags=() if outcome.ok else ("answer-fallback",),
    )

    return outcome.value


def _single(
    consultation: Consultation,
    agent: AgentSpec,
    prompt: str,
    tag: str,
) -> SoloOutcome:
    response = consultation.complete(
        consultation.request(
            tag,
            consultation.prepare(prompt, InjectionSite.EXPERT_PROMPT, agent),
            _system(consultation, agent),
            step="answer",
        )
    )
    outcome = consultation.extract(response.text)
    answer, flags = consultation.resolve(outcome)
    consultation.transcript.record(
        EventKind.OPINION,
        agent.agent_id,
        response.text,
        round_no=consultation.transcript.last_position[0],
        extracted_answer=outcome.value,
        flags=flags,
    )

    if outcome.value is None:
        logger.info("No answer from %s, using %s", agent.role, answer)

    votes = frozendict({agent.agent_id: (answer, None)})

    return SoloOutcome(answer=answer, votes=votes)


def _vote(consultation: Consultation, answers: Sequence[Optional[str]]) -> str:
    """The majority over the extracted answers, or the fallback answer if none."""

    extracted = [answer for answer in answers if answer is not None]

    if extracted:
        return majority_answer(extracted)

    answer, _ = consultation.resolve(ParseOutcome.fallback(""))

    return answer


def _sample_votes(answers: Sequence[Optional[str]]) -> frozendict:
    return frozendict(
        {
            f"sample-{number}": (answer, None)
            for number, answer in enumerate(answers, start=1)
            if answer is not None
        }
    )


def solve_direct(
    consultation: Consultation,
    shots: Sequence[Exemplar] = (),
    agent: AgentSpec = SOLO_AGENT,
) -> SoloOutcome:
    """
    Answer with one call, using the few-shot template.

    Args:
        consultation: The consultation.
        shots: The worked examples to show. May be empty.
        agent: The agent that answers.

    Returns:
        The answer. The fallback answer, flagged, when none could be extracted.
    """

    prompt = few_shot_prompt(consultation.query, shots)

    return _single(consultation, agent, prompt, "solo.answer")


def solve_cot(
    consultation: Consultation,
    shots: Sequence[Exemplar] = (),
    agent: AgentSpec = SOLO_AGENT,
) -> SoloOutcome:
    """Answer with one call, showing rationales and asking for step by step
    reasoning."""

    prompt = few_shot_prompt(consultation.query, shots, chain_of_thought=True)

    return _single(consultation, agent, prompt, "solo.cot")


def _sampled_paths(
    consultation: Consultation,
    shots: Sequence[Exemplar],
    agent: AgentSpec,
    count: int,
    tag: str,
) -> list[str]:
    prompt = consultation.prepare(
        few_shot_prompt(consultation.query, shots, chain_of_thought=True),
        InjectionSite.EXPERT_PROMPT,
        agent,
    )
    system = _system(consultation, agent)
    seed = consultation.config.seed
    requests = [
        consultation.request(tag, prompt, system, step="sample", seed=seed + i)
        for i in range(count)
    ]

    return [response.text for response in consultation.complete_many(requests)]


def solve_cot_sc(
    consultation: Consultation,
    shots: Sequence[Exemplar] = (),
    k: int = 5,
    agent: AgentSpec = SOLO_AGENT,
) -> SoloOutcome:
    """
    Self-consistency: sample ``k`` reasoning chains and take the majority answer,
    with ties broken by letter order.

    Raises:
        ValueError: If ``k`` is not positive.
    """

    if k < 1:
        raise ValueError(f"Need at least one sample, got {k}.")

    texts = _sampled_paths(consultation, shots, agent, k, "solo.cot-sc")
    answers = [_record(consultation, agent, text) for text in texts]

    return SoloOutcome(
        answer=_vote(consultation, answers), votes=_sample_votes(answers)
    )


def solve_er(
    consultation: Consultation,
    shots: Sequence[Exemplar] = (),
    m: int = 3,
    agent: AgentSpec = SOLO_AGENT,
) -> SoloOutcome:
    """
    Ensemble refinement: sample ``m`` reasoning paths, then make one call that
    conditions on all of them. The refinement call has the final say.

    Raises:
        ValueError: If ``m`` is not positive.
    """

    if m < 1:
        raise ValueError(f"Need at least one reasoning path, got {m}.")

    paths = _sampled_paths(consultation, shots, agent, m, "solo.er.path")

    for path in paths:
        _record(consultation, agent, path)

    prompt = refinement_prompt(consultation.query, shots, paths)
    response = consultation.complete(
        consultation.request(
            "solo.er.refine", prompt, _system(consultation, agent), step="answer"
        )
    )
    outcome = consultation.extract(response.text)
    answer, flags = consultation.resolve(outcome)
    consultation.transcript.record(
        EventKind.OPINION,
        agent.agent_id,
        response.text,
        round_no=consultation.transcript.last_position[0],
        turn=1,
        extracted_answer=outcome.value,
        flags=flags,
    )

    votes = frozendict({agent.agent_id: (answer, None)})

    return SoloOutcome(answer=answer, votes=votes)


def select_exemplars(
    question: str, pool: Sequence[Exemplar], k: int
) -> list[Exemplar]:
    """
    Select the ``k`` exemplars whose questions are lexically most similar to a
    question. Equally similar exemplars keep their pool order.
    """

    ranked = sorted(
        range(len(pool)), key=lambda i: (-token_overlap(question, pool[i].question), i)
    )

    return [pool[i] for i in ranked[:k]]


def shuffle_permutation(keys: Sequence[str], seed: int, index: int) -> tuple[str, ...]:
    """
    The option order of a shuffle: the original key shown at each position. The
    first shuffle keeps the original order, later ones are seeded permutations.
    """

    permutation = list(keys)

    if index > 0:
        random.Random(seed + index).shuffle(permutation)

    return tuple(permutation)


def shuffled_options(
    options: Mapping[str, str], permutation: Sequence[str]
) -> frozendict:
    """Relabel options in the order of a permutation, with letters from ``A``."""

    return frozendict(
        {OPTION_LETTERS[i]: options[key] for i, key in enumerate(permutation)}
    )


def unshuffle(answer: str, permutation: Sequence[str]) -> Optional[str]:
    """Map an answer to shuffled options back to the original option key."""

    index = OPTION_LETTERS.find(answer) if len(answer) == 1 else -1

    if 0 <= index < len(permutation):
        return permutation[index]

    return None


def solve_medprompt_lite(  # pylint: disable=R0913
    consultation: Consultation,
    pool: Sequence[Exemplar] = (),
    s: int = 5,
    shot_count: int = 3,
    agent: AgentSpec = SOLO_AGENT,
) -> SoloOutcome:
    """
    A simplified Medprompt: the exemplars most similar to the question, chain of
    thought, and a majority over ``s`` calls that each show the options in another
    (seeded) order. Answers are mapped back to the original options before voting.

    Raises:
        ValueError: If ``s`` is not positive.
    """

    if s < 1:
        raise ValueError(f"Need at least one shuffle, got {s}.")

    query = consultation.query
    shots = select_exemplars(query.question, pool, shot_count)
    system = _system(consultation, agent)
    seed = consultation.config.seed
    permutations = [
        shuffle_permutation(list(query.options), seed, index) for index in range(s)
    ]
    displays = [
        shuffled_options(query.options, permutation) if query.options else None
        for permutation in permutations
    ]
    requests = []

    for index, options in enumerate(displays):
        prompt = few_shot_prompt(query, shots, chain_of_thought=True, options=options)
        requests.append(
            consultation.request(
                "solo.medprompt",
                consultation.prepare(prompt, InjectionSite.EXPERT_PROMPT, agent),
                system,
                step="answer",
                seed=seed + index,
            )
        )

    responses = consultation.complete_many(requests)
    answers: list[Optional[str]] = []

    for permutation, options, response in zip(permutations, displays, responses):
        shown = extract_answer(response.text, query.option_keys, options).value

        if shown is not None and query.options:
            answer = unshuffle(shown, permutation)
        else:
            answer = shown

        answers.append(answer)
        round_no, _ = consultation.transcript.last_position
        consultation.transcript.record(
            EventKind.OPINION,
            agent.agent_id,
            response.text,
            round_no=round_no,
            extracted_answer=answer,
            flags=() if answer is not None else ("answer-fallback",),
        )

    return SoloOutcome(
        answer=_vote(consultation, answers), votes=_sample_votes(answers)
    )


def run_solo(
    consultation: Consultation,
    strategy: str,
    exemplars: Sequence[Exemplar] = (),
    agent: AgentSpec = SOLO_AGENT,
) -> SoloOutcome:
    """
    Answer with one of the solo strategies, configured by the consultation's run
    configuration.

    Args:
        consultation: The consultation.
        strategy: One of ``zero-shot``, ``few-shot``, ``cot``, ``cot-sc``, ``er`` and
            ``medprompt``.
        exemplars: The exemplar pool. The first ``shot_count`` are shown, except for
            ``medprompt``, which selects from the whole pool.
        agent: The agent that answers.

    Returns:
        The outcome.
    """

    config = consultation.config
    shots = list(exemplars[: config.shot_count])
    strategies: dict[str, Callable[[], SoloOutcome]] = {
        "zero-shot": lambda: solve_direct(consultation, (), agent),
        "few-shot": lambda: solve_direct(consultation, shots, agent),
        "cot": lambda: solve_cot(consultation, shots, agent),
        "cot-sc": lambda: solve_cot_sc(consultation, shots, config.sc_samples, agent),
        "er": lambda: solve_er(consultation, shots, config.er_paths, agent),
        "medprompt": lambda: solve_medprompt_lite(
            consultation,
            exemplars,
            config.medprompt_shuffles,
            config.medprompt_shots,
            agent,
        ),
    }

    if strategy not in strategies:
        raise ValueError(f"Unknown solo strategy {strategy}.")

    return strategies[strategy]()
