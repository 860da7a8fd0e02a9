"""The multidisciplinary team: experts discuss over bounded rounds until they agree,
with feedback from a moderator when they do not."""

import logging
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from frozendict import frozendict

from docteam.agent import (
    ALL,
    MODERATOR,
    CommunicationGraph,
    ExpertRoster,
    StructureKind,
)
from docteam.aggregate import Interaction, final_decide
from docteam.backend.base import Message
from docteam.consultation import ANSWER_FALLBACK, Consultation
from docteam.decision import Decision
from docteam.errors import StructureError
from docteam.metrics import consensus_entropy
from docteam.parse.roster import Participation, parse_participation
from docteam.process.prompt_processor import InjectionSite
from docteam.prompts import (
    MODERATOR_SYSTEM,
    agent_system_prompt,
    feedback_prompt,
    interaction_prompt,
    opinion_prompt,
)
from docteam.query import ComplexityLevel
from docteam.text import normalize, roles_match
from docteam.transcript import EventKind, TranscriptEvent

logger = logging.getLogger(__name__)

SENTINEL_PREFIX = "?"
"""Prefixes the stance of an agent whose answer could not be extracted."""

_FEEDBACK_HEADER = re.compile(
    r"^\s*(?:#{1,6}\s*(?P<hashed>.+?)\s*:?\s*"
    r"|\*\*(?P<bold>[^*]+?)\s*:?\s*\*\*\s*:?\s*(?P<inline>.*)"
    r"|(?P<colon>[^:]{1,80}):\s*)$"
)


def stance_symbols(stances: Mapping[str, Optional[str]]) -> list[str]:
    """The stances as symbols, where every agent without an answer is a symbol of
    its own."""

    return [
        answer if answer is not None else f"{SENTINEL_PREFIX}{agent_id}"
        for agent_id, answer in stances.items()
    ]


def consensus_reached(
    opinions: Union[Mapping[str, Optional[str]], Sequence[str]], threshold: float = 1.0
) -> bool:
    """
    Whether the team agrees: whether the share of the most common answer is at least
    the threshold.

    Args:
        opinions: Agent ids mapped to their current answer (``None`` when it could
            not be extracted), or a list of answer symbols.
        threshold: The share that counts as agreement, 1.0 for unanimity.

    Raises:
        ValueError: If there are no opinions.
    """

    if isinstance(opinions, Mapping):
        symbols = stance_symbols(opinions)
    else:
        symbols = list(opinions)

    if not symbols:
        raise ValueError("Cannot reach consensus without opinions.")

    _, counts = np.unique(np.array(symbols, dtype=str), return_counts=True)

    return bool(counts.max() / len(symbols) >= threshold)


@dataclass(frozen=True)
class RoundState:
    """Where the discussion stands after a round."""

    round: int
    opinions: frozendict
    """Agent ids mapped to their current answer, ``None`` when unknown."""

    consensus: bool
    feedback: frozendict = field(default_factory=frozendict)
    """Agent ids mapped to the moderator feedback they receive for the next round."""

    @classmethod
    def evaluate(
        cls,
        round_no: int,
        opinions: Mapping[str, Optional[str]],
        threshold: float,
        feedback: Optional[Mapping[str, str]] = None,
    ) -> "RoundState":
        return cls(
            round=round_no,
            opinions=frozendict(opinions),
            consensus=consensus_reached(opinions, threshold),
            feedback=frozendict(feedback or {}),
        )

    @property
    def entropy(self) -> float:
        return consensus_entropy(stance_symbols(self.opinions))


def route_message(
    speaker: str,
    participation: Participation,
    graph: CommunicationGraph,
    order: Sequence[str],
) -> str:
    """
    Decide who receives a message.

    Args:
        speaker: The agent id of the speaker.
        participation: Whether, and to whom, the speaker wants to talk.
        graph: The communication structure of the team.
        order: All agent ids, in roster order.

    Returns:
        The declared target when it is adjacent to the speaker, or when the graph has
        no edges. Otherwise the first neighbour of the speaker, and ``all`` when the
        speaker has no neighbours, does not talk, or names no other agent.
    """

    target = participation.target

    if not participation.wants_to_talk or target is None or target == speaker:
        return ALL

    if not graph.has_edges or graph.is_adjacent(speaker, target):
        return target

    neighbours = graph.neighbours(speaker, order)

    return neighbours[0] if neighbours else ALL


def format_log(events: Sequence[TranscriptEvent], roster: ExpertRoster) -> str:
    """Render events as a readable discussion log."""

    def name(agent_id: str) -> str:
        agent = roster.get(agent_id)
        return agent.role if agent is not None else agent_id

    return "\n\n".join(
        f"[Round {event.round}, turn {event.turn}] {name(event.speaker)} -> "
        f"{name(event.recipient)}: {event.raw.strip()}"
        for event in events
    )


def _header_agent(line: str, roster: ExpertRoster) -> Optional[tuple[str, str]]:
    """The agent a feedback header line addresses, and any text after the header."""

    match = _FEEDBACK_HEADER.match(line)

    if match is None:
        return None

    name = match.group("hashed") or match.group("bold") or match.group("colon") or ""
    name = name.strip(" *#:")

    if not name:
        return None

    for agent in roster.agents:
        if normalize(agent.role) == normalize(name):
            return agent.agent_id, match.group("inline") or ""

    for agent in roster.agents:
        if roles_match(agent.role, name):
            return agent.agent_id, match.group("inline") or ""

    return None


def split_feedback(text: str, roster: ExpertRoster) -> dict[str, str]:
    """
    Split moderator feedback into a block per agent, by role name headers
    (``### Cardiologist``, ``**Cardiologist:**`` or ``Cardiologist:``).

    Returns:
        Agent ids mapped to their feedback. Agents without a block get the text
        before the first header, or the full text when there is no such text.
    """

    preamble: list[str] = []
    blocks: dict[str, list[str]] = {}
    current: Optional[str] = None

    for line in text.splitlines():
        header = _header_agent(line, roster)

        if header is not None:
            current, inline = header
            blocks.setdefault(current, [])

            if inline.strip():
                blocks[current].append(inline)

            continue

        (blocks[current] if current is not None else preamble).append(line)

    general = "\n".join(preamble).strip() or text.strip()
    feedback = {}

    for agent_id in roster.agent_ids:
        own = "\n".join(blocks.get(agent_id, [])).strip()
        feedback[agent_id] = own or general

    return feedback


def moderator_feedback(
    consultation: Consultation, roster: ExpertRoster, round_no: int
) -> dict[str, str]:
    """
    Have the moderator review a round of discussion, and give each agent feedback.

    By default this is one call, whose output is split per agent. With
    ``feedback_per_agent`` it is one call per agent.

    Args:
        consultation: The consultation.
        roster: The team.
        round_no: The round to review, at least 1.

    Returns:
        Agent ids mapped to their feedback.
    """

    if round_no < 1:
        raise ValueError("Feedback needs at least one completed round.")

    query = consultation.query
    events = consultation.transcript.filter(kind=EventKind.MESSAGE, round_no=round_no)
    log = format_log(events, roster)
    roles = [agent.role for agent in roster.agents]
    turn = consultation.config.turns + 1

    if consultation.config.feedback_per_agent:
        requests = [
            consultation.request(
                "mdt.feedback",
                feedback_prompt(query, log, roles, addressee=agent.role),
                MODERATOR_SYSTEM,
                step="moderator",
            )
            for agent in roster.agents
        ]
        feedback = {}

        for agent, response in zip(roster.agents, consultation.complete_many(requests)):
            consultation.transcript.record(
                EventKind.FEEDBACK,
                MODERATOR,
                response.text,
                round_no=round_no,
                turn=turn,
                recipient=agent.agent_id,
            )
            feedback[agent.agent_id] = response.text.strip()

        return feedback

    response = consultation.complete(
        consultation.request(
            "mdt.feedback",
            feedback_prompt(query, log, roles),
            MODERATOR_SYSTEM,
            step="moderator",
        )
    )
    consultation.transcript.record(
        EventKind.FEEDBACK, MODERATOR, response.text, round_no=round_no, turn=turn
    )

    return split_feedback(response.text, roster)


class _Discussion:  # pylint: disable=R0902
    """The state of the agents while they discuss: their conversations, the
    messages waiting for them, and their stances."""

    def __init__(self, consultation: Consultation, roster: ExpertRoster) -> None:
        self.consultation = consultation
        self.roster = roster
        self.order = roster.agent_ids
        self.roles = [agent.role for agent in roster.agents]
        self.systems = {
            agent.agent_id: consultation.prepare(
                agent_system_prompt(agent), InjectionSite.AGENT_SYSTEM, agent
            )
            for agent in roster.agents
        }
        self.histories: dict[str, list[Message]] = {id_: [] for id_ in self.order}
        self.inbox: dict[str, list[str]] = {id_: [] for id_ in self.order}
        self.stances: dict[str, Optional[str]] = {id_: None for id_ in self.order}

    def _deliver(self, speaker: str, recipient: str, line: str) -> None:
        targets = [id_ for id_ in self.order if id_ != speaker]

        for target in targets if recipient == ALL else [recipient]:
            self.inbox[target].append(line)

    def open(self) -> None:
        """Collect every agent's initial opinion."""

        consultation = self.consultation
        prompts = [
            consultation.prepare(
                opinion_prompt(consultation.query), InjectionSite.EXPERT_PROMPT, agent
            )
            for agent in self.roster.agents
        ]
        requests = [
            consultation.request(
                "mdt.initial",
                prompt,
                self.systems[agent.agent_id],
                step="agent",
                temperature=agent.temperature,
            )
            for agent, prompt in zip(self.roster.agents, prompts)
        ]

        responses = consultation.complete_many(requests)

        for agent, prompt, response in zip(self.roster.agents, prompts, responses):
            outcome = consultation.extract(response.text)
            self.stances[agent.agent_id] = outcome.value
            consultation.transcript.record(
                EventKind.OPINION,
                agent.agent_id,
                response.text,
                extracted_answer=outcome.value,
                flags=() if outcome.ok else (ANSWER_FALLBACK,),
            )
            self.histories[agent.agent_id] += [
                Message("user", prompt),
                Message("assistant", response.text),
            ]

        for agent, response in zip(self.roster.agents, responses):
            self._deliver(agent.agent_id, ALL, f"{agent.role}: {response.text.strip()}")

    def take_turn(self, round_no: int, turn: int, feedback: Mapping[str, str]) -> None:
        """Let every agent speak once. Messages are delivered when all have spoken."""

        consultation = self.consultation
        prompts = [
            interaction_prompt(
                consultation.query,
                self.inbox[agent.agent_id],
                self.roles,
                feedback.get(agent.agent_id),
            )
            for agent in self.roster.agents
        ]
        requests = [
            consultation.request(
                "mdt.turn",
                prompt,
                self.systems[agent.agent_id],
                step="agent",
                history=self.histories[agent.agent_id],
                temperature=agent.temperature,
            )
            for agent, prompt in zip(self.roster.agents, prompts)
        ]
        responses = consultation.complete_many(requests)
        self.inbox = {id_: [] for id_ in self.order}

        for agent, prompt, response in zip(self.roster.agents, prompts, responses):
            participation = parse_participation(response.text, self.roster)
            recipient = route_message(
                agent.agent_id, participation, self.roster.graph, self.order
            )
            outcome = consultation.extract(response.text)

            if outcome.value is not None:
                self.stances[agent.agent_id] = outcome.value

            consultation.transcript.record(
                EventKind.MESSAGE,
                agent.agent_id,
                response.text,
                round_no=round_no,
                turn=turn,
                recipient=recipient,
                extracted_answer=outcome.value,
                flags=() if outcome.ok else ("stance-kept",),
            )
            self.histories[agent.agent_id] += [
                Message("user", prompt),
                Message("assistant", response.text),
            ]
            self._deliver(
                agent.agent_id, recipient, f"{agent.role}: {response.text.strip()}"
            )


def run_mdt(consultation: Consultation, roster: ExpertRoster) -> Decision:
    """
    Answer a query by a multidisciplinary team discussion.

    Every agent gives an initial opinion. While the team disagrees, for at most
    ``rounds`` rounds, every agent speaks ``turns`` times, addressing the agent of its
    choice as far as the communication structure allows. Stances are re-extracted
    from what the agents say. When a round ends without consensus and review is
    enabled, the moderator gives feedback that the agents see in the next round. The
    moderator finally decides over the whole discussion.

    Args:
        consultation: The consultation.
        roster: The team, with at least two agents.

    Returns:
        The decision, with the consensus entropy after the initial opinions and after
        every round.

    Raises:
        StructureError: If the roster is not a team of at least two agents.
    """

    if roster.kind is not StructureKind.MDT or len(roster.agents) < 2:
        raise StructureError("A discussion needs a team of at least two agents.")

    config = consultation.config
    discussion = _Discussion(consultation, roster)
    discussion.open()

    state = RoundState.evaluate(0, discussion.stances, config.consensus_threshold)
    trace = [(0, state.entropy)]

    while not state.consensus and state.round < config.rounds:
        round_no = state.round + 1

        for turn in range(1, config.turns + 1):
            discussion.take_turn(round_no, turn, state.feedback if turn == 1 else {})

        state = RoundState.evaluate(
            round_no, discussion.stances, config.consensus_threshold
        )
        trace.append((round_no, state.entropy))

        if not state.consensus and config.review_enabled:
            feedback = moderator_feedback(consultation, roster, round_no)
            state = RoundState.evaluate(
                round_no, discussion.stances, config.consensus_threshold, feedback
            )

        logger.debug("Round %d ends with entropy %.3f", round_no, trace[-1][1])

    discussed = [
        event
        for event in consultation.transcript
        if event.kind in (EventKind.OPINION, EventKind.MESSAGE, EventKind.FEEDBACK)
    ]
    answer = final_decide(
        consultation, Interaction(format_log(discussed, roster)), speaker=MODERATOR
    )

    return consultation.conclude(
        answer=answer,
        method=f"mdt:{config.decision_method}",
        complexity=ComplexityLevel.MODERATE,
        votes={
            agent_id: (stance, None)
            for agent_id, stance in discussion.stances.items()
            if stance is not None
        },
        entropy_trace=trace,
        roster=roster,
    )
