import itertools
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional, Sequence

ALL = "all"
"""The recipient of a message that is addressed to every agent."""

MODERATOR = "moderator"
RECRUITER = "recruiter"
DECIDER = "decider"

_RESERVED_IDS = {ALL, MODERATOR, RECRUITER, DECIDER}


def make_agent_id(role: str, taken: Iterable[str] = ()) -> str:
    """
    Derive an agent id from a role name.

    Args:
        role: The role, e.g. ``"Medical Geneticist"``.
        taken: Ids that are already in use.

    Returns:
        A slug like ``"medical-geneticist"``, suffixed with a number when it would
        collide with a taken or reserved id.
    """

    base = re.sub(r"[^0-9a-z]+", "-", role.casefold()).strip("-") or "agent"
    unavailable = set(taken) | _RESERVED_IDS

    if base not in unavailable:
        return base

    for number in itertools.count(2):
        candidate = f"{base}-{number}"

        if candidate not in unavailable:
            return candidate

    raise AssertionError  # pragma: no cover


@dataclass(frozen=True)
class AgentSpec:
    """A recruited agent: a role played by the language model."""

    agent_id: str
    """The id, unique within a roster."""

    role: str
    """The role, e.g. ``"Cardiologist"``."""

    description: str = ""
    """What the agent does, as stated by the recruiter."""

    is_lead: bool = False
    """Whether the agent leads its team (only meaningful in integrated care teams)."""

    temperature: float = 0.0
    """The sampling temperature used for this agent's calls."""

    def __post_init__(self) -> None:
        if not 0 <= self.temperature <= 2:
            raise ValueError(
                f"Temperature of agent {self.agent_id} must be in [0, 2], "
                f"got {self.temperature}."
            )


@dataclass(frozen=True)
class CommunicationGraph:
    """
    Who talks to whom in a team. Peer edges are undirected, directed edges point from
    the agent that consults to the agent that is consulted.
    """

    peer_edges: frozenset[frozenset[str]] = frozenset()
    directed_edges: frozenset[tuple[str, str]] = frozenset()

    def __post_init__(self) -> None:
        for edge in self.peer_edges:
            if len(edge) != 2:
                raise ValueError(f"Peer edge {set(edge)} must connect two agents.")

        for source, target in self.directed_edges:
            if source == target:
                raise ValueError(f"Directed edge cannot loop on {source}.")

    @property
    def has_edges(self) -> bool:
        return bool(self.peer_edges or self.directed_edges)

    def endpoints(self) -> set[str]:
        """The ids of all agents that take part in at least one edge."""

        ids: set[str] = set()

        for edge in self.peer_edges:
            ids |= edge

        for source, target in self.directed_edges:
            ids |= {source, target}

        return ids

    def is_adjacent(self, speaker: str, other: str) -> bool:
        """
        Whether ``speaker`` may address ``other`` directly, i.e. whether they are peers
        or there is a directed edge from ``speaker`` to ``other``.
        """

        return (
            frozenset((speaker, other)) in self.peer_edges
            or (speaker, other) in self.directed_edges
        )

    def neighbours(self, speaker: str, order: Sequence[str]) -> list[str]:
        """
        The agents ``speaker`` may address directly.

        Args:
            speaker: The speaking agent.
            order: All agent ids, in roster order.

        Returns:
            The neighbours of ``speaker``, in roster order.
        """

        return [
            other
            for other in order
            if other != speaker and self.is_adjacent(speaker, other)
        ]


class StructureKind(Enum):
    """The collaboration structure a roster is recruited for."""

    SINGLE_PCP = "single_pcp"
    MDT = "mdt"
    ICT = "ict"


@dataclass(frozen=True)
class TeamSpec:
    """A team in an integrated care pipeline."""

    name: str
    members: tuple[AgentSpec, ...]
    lead: str
    """The ``agent_id`` of the member that writes the team's report."""

    position: int = 0
    """The position of the team in the pipeline, starting at 0."""

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(self.members))

        if not self.members:
            raise ValueError(f"Team {self.name} has no members.")

        if self.lead not in {member.agent_id for member in self.members}:
            raise ValueError(f"Lead {self.lead} is not a member of team {self.name}.")

        if self.position < 0:
            raise ValueError(f"Team {self.name} has negative position.")

    @property
    def lead_agent(self) -> AgentSpec:
        return next(member for member in self.members if member.agent_id == self.lead)


@dataclass(frozen=True)
class ExpertRoster:
    """The agents recruited for a query, and how they are organized."""

    agents: tuple[AgentSpec, ...]
    kind: StructureKind
    graph: CommunicationGraph = field(default_factory=CommunicationGraph)
    teams: tuple[TeamSpec, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "teams", tuple(self.teams))

        ids = [agent.agent_id for agent in self.agents]

        if len(set(ids)) != len(ids):
            raise ValueError(f"Agent ids must be unique, got {ids}.")

        if not self.graph.endpoints() <= set(ids):
            raise ValueError("Communication graph references unknown agents.")

        if self.kind is StructureKind.SINGLE_PCP and len(ids) != 1:
            raise ValueError("A single PCP roster has exactly one agent.")

        if self.kind is StructureKind.MDT and len(ids) < 2:
            raise ValueError("A multidisciplinary team has at least two agents.")

        if self.kind is StructureKind.ICT:
            self._check_teams(set(ids))
        elif self.teams:
            raise ValueError(f"A {self.kind.value} roster has no teams.")

    def _check_teams(self, ids: set[str]) -> None:
        if not self.teams:
            raise ValueError("An integrated care roster has at least one team.")

        names = [team.name for team in self.teams]

        if len(set(names)) != len(names):
            raise ValueError(f"Team names must be unique, got {names}.")

        positions = [team.position for team in self.teams]

        if any(later <= earlier for earlier, later in zip(positions, positions[1:])):
            raise ValueError("Team positions must be strictly increasing.")

        for team in self.teams:
            if not {member.agent_id for member in team.members} <= ids:
                raise ValueError(f"Team {team.name} has members outside the roster.")

            if sum(member.is_lead for member in team.members) != 1:
                raise ValueError(f"Team {team.name} must have exactly one lead.")

            if not team.lead_agent.is_lead:
                raise ValueError(f"Lead of team {team.name} is not marked as lead.")

    @property
    def agent_ids(self) -> list[str]:
        return [agent.agent_id for agent in self.agents]

    def with_temperature(self, temperature: float) -> "ExpertRoster":
        """A copy in which every agent samples at the given temperature."""

        def retune(agent: AgentSpec) -> AgentSpec:
            return replace(agent, temperature=temperature)

        return replace(
            self,
            agents=tuple(retune(agent) for agent in self.agents),
            teams=tuple(
                replace(team, members=tuple(retune(m) for m in team.members))
                for team in self.teams
            ),
        )

    def get(self, agent_id: str) -> Optional[AgentSpec]:
        """Get an agent by id, or ``None`` if there is no such agent."""
        matches = (agent for agent in self.agents if agent.agent_id == agent_id)

        return next(matches, None)
