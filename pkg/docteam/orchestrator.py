"""The top level of the engine: classify the complexity of a query, recruit the
matching team, and have it answer."""

import logging
import time
from typing import Callable, Optional, Sequence

from docteam.agent import (
    MODERATOR,
    RECRUITER,
    AgentSpec,
    ExpertRoster,
    StructureKind,
    TeamSpec,
    make_agent_id,
)
from docteam.aggregate import InitialResponse, final_decide, vote_as_group
from docteam.backend.base import Backend
from docteam.config import FORCED_MODES, RunConfig
from docteam.consultation import Consultation
from docteam.decision import Decision
from docteam.errors import ConfigError, EmptyRosterError
from docteam.ict import FINAL_TEAM, INITIAL_TEAM, run_ict
from docteam.mdt import run_mdt
from docteam.metrics import LEVEL_MODES, consensus_entropy
from docteam.parse.complexity import parse_complexity
from docteam.parse.outcome import Confidence, ParseOutcome
from docteam.parse.roster import parse_roster
from docteam.process.augmenter import KnowledgeInitializer, RetrievalAugmenter
from docteam.process.prompt_processor import InjectionSite, PromptProcessorGroup
from docteam.prompts import (
    COMPLEXITY_SYSTEM,
    RECRUITER_SYSTEM,
    complexity_prompt,
    recruit_prompt,
)
from docteam.query import ComplexityLevel, Query
from docteam.retrieval import CorpusIndex
from docteam.solo import SOLO_AGENT, Exemplar, run_solo, solve_direct
from docteam.transcript import EventKind

logger = logging.getLogger(__name__)

CLASSIFY_ATTEMPTS = 3
RECRUIT_ATTEMPTS = 2
FALLBACK_LEVEL = ComplexityLevel.MODERATE

_ROSTER_KINDS = {
    ComplexityLevel.LOW: StructureKind.SINGLE_PCP,
    ComplexityLevel.MODERATE: StructureKind.MDT,
    ComplexityLevel.HIGH: StructureKind.ICT,
}

_MODE_LEVELS = {mode: level for level, mode in LEVEL_MODES.items()}

_DEFAULT_SPECIALISTS = (
    ("Internist", "Evaluates the case as a whole."),
    ("Clinical Pharmacologist", "Assesses drugs, dosing and interactions."),
    ("Diagnostic Radiologist", "Interprets imaging and diagnostic findings."),
)

_DEFAULT_TEAMS = (
    (
        INITIAL_TEAM,
        (
            ("Emergency Physician", "Triages and stabilizes the patient."),
            ("General Internist", "Takes the history and examines the patient."),
            ("Nurse Practitioner", "Gathers vital signs and initial findings."),
        ),
    ),
    (
        "Specialist Consultation Team",
        (
            ("Consulting Specialist", "Assesses the main organ system involved."),
            ("Clinical Pharmacologist", "Assesses drugs, dosing and interactions."),
            ("Diagnostic Radiologist", "Interprets imaging and diagnostic findings."),
        ),
    ),
    (
        FINAL_TEAM,
        (
            ("Senior Consultant", "Reviews all findings and decides."),
            ("Guideline Specialist", "Checks the decision against guidelines."),
            ("Patient Safety Officer", "Checks the decision for risks."),
        ),
    ),
)


def default_roster(level: ComplexityLevel, n_max: int) -> ExpertRoster:
    """
    The roster used when the recruiter's output cannot be used.

    Args:
        level: The complexity level to recruit for.
        n_max: The maximum number of agents (per team, for ``HIGH``).

    Returns:
        A General Physician for ``LOW``, two or three generic specialists for
        ``MODERATE``, and three teams of at most three members for ``HIGH``.
    """

    if level is ComplexityLevel.LOW:
        physician = AgentSpec(
            agent_id="general-physician",
            role="General Physician",
            description="Answers general medical questions.",
        )

        return ExpertRoster(agents=(physician,), kind=StructureKind.SINGLE_PCP)

    if level is ComplexityLevel.MODERATE:
        size = min(len(_DEFAULT_SPECIALISTS), max(2, n_max))
        specialists = tuple(
            AgentSpec(agent_id=make_agent_id(role), role=role, description=description)
            for role, description in _DEFAULT_SPECIALISTS[:size]
        )

        return ExpertRoster(agents=specialists, kind=StructureKind.MDT)

    agents: list[AgentSpec] = []
    teams = []

    for position, (name, members) in enumerate(_DEFAULT_TEAMS):
        team_members = []

        for index, (role, description) in enumerate(members[:n_max]):
            member = AgentSpec(
                agent_id=make_agent_id(role, taken=(a.agent_id for a in agents)),
                role=role,
                description=description,
                is_lead=index == 0,
            )
            team_members.append(member)
            agents.append(member)

        teams.append(
            TeamSpec(
                name=name,
                members=tuple(team_members),
                lead=team_members[0].agent_id,
                position=position,
            )
        )

    return ExpertRoster(
        agents=tuple(agents), kind=StructureKind.ICT, teams=tuple(teams)
    )


def _fits(roster: ExpertRoster, level: ComplexityLevel) -> bool:
    """Whether a parsed roster can run the branch of a level."""

    if level is ComplexityLevel.HIGH:
        return len(roster.teams) >= 2

    return roster.kind is _ROSTER_KINDS[level]


class Orchestrator:
    """
    Answers queries with the engine: classifies their complexity, recruits a primary
    care physician, a multidisciplinary team or integrated care teams accordingly,
    and has them decide. Also runs the forced branches and the baselines.

    Args:
        backend: The language model backend.
        config: The default run configuration.
        exemplars: The few-shot exemplar pool.
        index: The corpus to retrieve from, required when retrieval or knowledge
            initialization is enabled.
        clock: A monotonic clock, in seconds.
    """

    def __init__(  # pylint: disable=R0913
        self,
        backend: Backend,
        config: Optional[RunConfig] = None,
        exemplars: Sequence[Exemplar] = (),
        index: Optional[CorpusIndex] = None,
        clock: Callable[[], float] = time.perf_counter,
    ) -> None:
        self.backend = backend
        self.config = config or RunConfig()
        self.exemplars = list(exemplars)
        self.index = index
        self.clock = clock

    def processors(self, config: RunConfig) -> PromptProcessorGroup:
        """
        The prompt processors for a run configuration.

        Raises:
            ConfigError: If retrieval is enabled without a corpus.
        """

        group = PromptProcessorGroup()

        if not (config.retrieval_enabled or config.knowledge_init_enabled):
            return group

        if self.index is None:
            raise ConfigError("Retrieval is enabled, but no corpus is configured.")

        if config.retrieval_enabled:
            group.add_processor(
                "retrieval", RetrievalAugmenter(self.index, k=config.retrieval_k)
            )

        if config.knowledge_init_enabled:
            group.add_processor(
                "knowledge", KnowledgeInitializer(self.index, k=config.retrieval_k)
            )

        return group

    def consult(self, query: Query, config: Optional[RunConfig] = None) -> Consultation:
        """Start a consultation on a query."""

        config = config or self.config

        return Consultation(
            query=query,
            backend=self.backend,
            config=config,
            processors=self.processors(config),
            clock=self.clock,
        )

    def classify_complexity(
        self, query: Query, consultation: Optional[Consultation] = None
    ) -> ComplexityLevel:
        """
        Classify the complexity of a query. Output that cannot be parsed is retried,
        up to three calls in total.

        Args:
            query: The query.
            consultation: The consultation to classify in. A new one by default.

        Returns:
            The level. ``MODERATE`` when no call gave a usable answer, in which case
            the consultation is flagged ``complexity-fallback``.
        """

        consultation = consultation or self.consult(query)
        config = consultation.config
        prompt = consultation.prepare(
            complexity_prompt(query), InjectionSite.CLASSIFICATION
        )
        outcome: ParseOutcome[ComplexityLevel] = ParseOutcome.fallback("")

        for attempt in range(CLASSIFY_ATTEMPTS):
            response = consultation.complete(
                consultation.request(
                    "classify",
                    prompt,
                    COMPLEXITY_SYSTEM,
                    step="classify",
                    seed=config.seed + attempt,
                )
            )
            outcome = parse_complexity(response.text)
            level = outcome.value
            consultation.transcript.record(
                EventKind.CLASSIFICATION,
                MODERATOR,
                response.text,
                flags=(
                    f"complexity:{level.value if level else 'none'}",
                    outcome.confidence.value,
                ),
            )

            if level is not None:
                break

            logger.info("Unusable complexity classification, attempt %d", attempt + 1)

        level = outcome.value

        if level is None:
            logger.warning("No usable complexity for %s, using moderate", query.id)
            consultation.flag("complexity-fallback")
            level = FALLBACK_LEVEL

        consultation.metadata["complexity"] = level
        consultation.metadata["complexity_confidence"] = outcome.confidence

        return level

    def recruit(
        self,
        query: Query,
        level: ComplexityLevel,
        consultation: Optional[Consultation] = None,
    ) -> ExpertRoster:
        """
        Recruit agents for a query. Output that cannot be used is retried once.

        Args:
            query: The query.
            level: The complexity level, which decides the kind of roster.
            consultation: The consultation to recruit in. A new one by default.

        Returns:
            The roster, with the agent temperature of the run configuration. The
            default roster of the level when no call gave a usable roster, in which
            case the consultation is flagged ``recruitment-fallback``.
        """

        consultation = consultation or self.consult(query)
        config = consultation.config
        max_agents = 1 if level is ComplexityLevel.LOW else config.n_max
        roster: Optional[ExpertRoster] = None

        for attempt in range(RECRUIT_ATTEMPTS):
            response = consultation.complete(
                consultation.request(
                    "recruit",
                    recruit_prompt(query, level, config.n_max),
                    RECRUITER_SYSTEM,
                    step="recruit",
                    seed=config.seed + attempt,
                )
            )

            try:
                outcome = parse_roster(response.text, max_agents, _ROSTER_KINDS[level])
            except EmptyRosterError:
                outcome = ParseOutcome.fallback(response.text, ("no experts found",))

            usable = outcome.value is not None and _fits(outcome.value, level)
            consultation.transcript.record(
                EventKind.RECRUITMENT,
                RECRUITER,
                response.text,
                flags=(outcome.confidence.value if usable else "unusable",),
            )

            if usable:
                roster = outcome.value

                if outcome.confidence is Confidence.HEURISTIC:
                    consultation.flag("roster-warning")

                break

            logger.info("Unusable roster at attempt %d", attempt + 1)

        if roster is None:
            logger.warning("No usable roster for %s, using the default", query.id)
            consultation.flag("recruitment-fallback")
            roster = default_roster(level, config.n_max)

        return roster.with_temperature(config.temperature("agent"))

    def _answer_directly(self, consultation: Consultation) -> Decision:
        query = consultation.query
        roster = self.recruit(query, ComplexityLevel.LOW, consultation)
        agent = roster.agents[0]
        shots = self.exemplars[: consultation.config.shot_count]
        outcome = solve_direct(consultation, shots, agent)
        answer = final_decide(consultation, InitialResponse(outcome.answer))

        return consultation.conclude(
            answer=answer,
            method="pcp:direct",
            complexity=ComplexityLevel.LOW,
            votes={agent.agent_id: (answer, None)},
            entropy_trace=((0, 0.0),),
            roster=roster,
        )

    def dispatch(self, consultation: Consultation, level: ComplexityLevel) -> Decision:
        """Run the branch of a complexity level."""

        if level is ComplexityLevel.LOW:
            return self._answer_directly(consultation)

        roster = self.recruit(consultation.query, level, consultation)

        if level is ComplexityLevel.MODERATE:
            return run_mdt(consultation, roster)

        return run_ict(consultation, roster)

    def _solo(self, consultation: Consultation, strategy: str) -> Decision:
        agent = SOLO_AGENT
        outcome = run_solo(consultation, strategy, self.exemplars, agent)
        answers = [answer for answer, _ in outcome.votes.values()]

        return consultation.conclude(
            answer=outcome.answer,
            method=f"solo:{strategy}",
            complexity=ComplexityLevel.LOW,
            votes=outcome.votes,
            entropy_trace=((0, consensus_entropy(answers) if answers else 0.0),),
            roster=ExpertRoster(agents=(agent,), kind=StructureKind.SINGLE_PCP),
        )

    def run(self, query: Query, config: Optional[RunConfig] = None) -> Decision:
        """
        Answer a query.

        Args:
            query: The query.
            config: The run configuration. Defaults to the orchestrator's. Its mode
                selects the branch: ``adaptive`` classifies first, ``pcp``, ``mdt``
                and ``ict`` force a branch, ``solo:<strategy>`` and
                ``group:<method>`` run a single agent or a vote of independent
                experts.

        Returns:
            The decision.
        """

        consultation = self.consult(query, config)
        mode = consultation.config.mode

        if mode == "adaptive":
            level = self.classify_complexity(query, consultation)
            decision = self.dispatch(consultation, level)
        elif mode in FORCED_MODES:
            decision = self.dispatch(consultation, _MODE_LEVELS[mode])
        elif mode.startswith("solo:"):
            decision = self._solo(consultation, mode.split(":", 1)[1])
        else:
            roster = self.recruit(query, ComplexityLevel.MODERATE, consultation)
            decision = vote_as_group(consultation, roster, mode.split(":", 1)[1])

        logger.debug(
            "Answered %s with %s in %d calls",
            query.id,
            decision.method,
            decision.stats.calls,
        )

        return decision
