import itertools
import logging
import re
from dataclasses import dataclass
from typing import Optional

from docteam.agent import (
    AgentSpec,
    CommunicationGraph,
    ExpertRoster,
    StructureKind,
    TeamSpec,
    make_agent_id,
)
from docteam.errors import EmptyRosterError
from docteam.parse.outcome import Confidence, ParseOutcome
from docteam.text import find_mention, normalize, roles_match

logger = logging.getLogger(__name__)

_ROLE_LINE = re.compile(r"^\s*(?:\d+\s*[.)]|[-*•])\s*(?P<rest>\S.*)$")
_MEMBER_LINE = re.compile(
    r"^\s*(?:[-*•]\s*)?\**\s*member\s*\d+\s*\**\s*[:.)-]\s*\**\s*(?P<rest>\S.*)$",
    re.IGNORECASE,
)
_TEAM_HEADER = re.compile(
    r"^\s*[#*\s]*(?:group|team)\s*\d+\s*\**\s*[-–—:.]\s*(?P<name>.+?)[*\s]*$",
    re.IGNORECASE,
)
_DESCRIPTION_SEPARATOR = re.compile(r"\s+[-–—]\s+|:\s+")
_LEAD_MARKER = re.compile(r"\s*\(\s*lead\s*\)\s*", re.IGNORECASE)
_PARTICIPATION = re.compile(r"\b(yes|no)\b", re.IGNORECASE)
_NUMBERED_AGENT = re.compile(r"\b(?:agent|expert)\s*#?\s*(\d+)\b", re.IGNORECASE)


def _is_structure_line(line: str) -> bool:
    return ("==" in line or " > " in line) and " - " not in line


def _split_role(rest: str) -> tuple[str, str]:
    parts = _DESCRIPTION_SEPARATOR.split(rest, maxsplit=1)
    role = parts[0].strip(" *_`")
    description = parts[1].strip() if len(parts) > 1 else ""

    return role, description


def _team_header(line: str) -> Optional[str]:
    if _MEMBER_LINE.match(line):
        return None

    header = _TEAM_HEADER.match(line)

    if header:
        return header.group("name").strip()

    stripped = line.strip().strip("#* ")

    if stripped.endswith(":") and "team" in stripped.casefold():
        return stripped[:-1].strip()

    return None


@dataclass
class _DraftTeam:
    name: str
    members: list[tuple[str, str, bool]]


def parse_roster(
    text: str, max_agents: int, kind: Optional[StructureKind] = None
) -> ParseOutcome[ExpertRoster]:
    """
    Parse the recruiter's output into a roster.

    Role lines are numbered or bulleted lines like ``1. Cardiologist - Focuses on the
    heart``. An optional structure line like ``A == B > C`` connects the roles:
    ``==`` makes a group of peers, and ``>`` adds a directed edge from every member of
    the group on its left to every member of the group on its right. Team headers
    (``Group 1 - Initial Assessment Team``) with member lines
    (``Member 1: Internist (Lead) - ...``) make integrated care teams.

    Args:
        text: The recruiter output.
        max_agents: The maximum number of agents (per team, for teams).
        kind: The expected structure. When absent, it is inferred from the output.

    Returns:
        An exact outcome when the output parsed without warnings, a heuristic outcome
        otherwise. A fallback when the agents that were found do not fit the
        expected structure.

    Raises:
        ValueError: If ``max_agents`` is not positive.
        EmptyRosterError: If no agents could be parsed.
    """

    if max_agents < 1:
        raise ValueError(f"Need room for at least one agent, got {max_agents}.")

    teams: list[_DraftTeam] = []
    roles: list[tuple[str, str, bool]] = []
    structure: Optional[str] = None

    for line in text.splitlines():
        if not line.strip():
            continue

        header = _team_header(line)

        if header is not None:
            teams.append(_DraftTeam(name=header, members=[]))
            continue

        member = _MEMBER_LINE.match(line) or (_ROLE_LINE.match(line) if teams else None)

        if member is not None and not _is_structure_line(line):
            role, description = _split_role(member.group("rest"))
            is_lead = bool(_LEAD_MARKER.search(role))
            role = _LEAD_MARKER.sub(" ", role).strip()

            if role:
                entry = (role, description, is_lead)
                (teams[-1].members if teams else roles).append(entry)

            continue

        if _is_structure_line(line) and structure is None:
            structure = line.rsplit(":", 1)[-1] if ":" in line else line
            continue

        role_line = _ROLE_LINE.match(line)

        if role_line is not None:
            role, description = _split_role(role_line.group("rest"))

            if role:
                roles.append((role, description, False))

    teams = [team for team in teams if team.members]

    if teams and (kind is None or kind is StructureKind.ICT):
        return _team_roster(text, teams, max_agents)

    roles += [member for team in teams for member in team.members]

    return _flat_roster(text, roles, structure, max_agents, kind)


def _flat_roster(
    text: str,
    roles: list[tuple[str, str, bool]],
    structure: Optional[str],
    max_agents: int,
    kind: Optional[StructureKind],
) -> ParseOutcome[ExpertRoster]:
    if not roles:
        raise EmptyRosterError("No experts found in recruiter output.")

    warnings: list[str] = []

    if len(roles) > max_agents:
        warnings.append(f"truncated {len(roles)} experts to {max_agents}")
        logger.warning("Recruiter proposed %d experts, kept %d", len(roles), max_agents)
        roles = roles[:max_agents]

    agents: list[AgentSpec] = []

    for role, description, _ in roles:
        agent_id = make_agent_id(role, taken=(agent.agent_id for agent in agents))
        agents.append(AgentSpec(agent_id=agent_id, role=role, description=description))

    graph = CommunicationGraph()

    if structure is not None:
        graph, structure_warnings = parse_structure(structure, agents)
        warnings.extend(structure_warnings)

    if kind is None:
        kind = StructureKind.SINGLE_PCP if len(agents) == 1 else StructureKind.MDT

    if kind is StructureKind.ICT or (kind is StructureKind.MDT and len(agents) < 2):
        return ParseOutcome.fallback(
            text, warnings=(f"{len(agents)} experts do not make a {kind.value}",)
        )

    if kind is StructureKind.SINGLE_PCP and len(agents) > 1:
        warnings.append(f"kept the first of {len(agents)} experts")
        agents, graph = agents[:1], CommunicationGraph()

    roster = ExpertRoster(agents=tuple(agents), kind=kind, graph=graph)
    confidence = Confidence.HEURISTIC if warnings else Confidence.EXACT

    return ParseOutcome(roster, confidence, text, warnings=tuple(warnings))


def _team_roster(
    text: str, teams: list[_DraftTeam], max_agents: int
) -> ParseOutcome[ExpertRoster]:
    warnings: list[str] = []
    agents: list[AgentSpec] = []
    team_specs: list[TeamSpec] = []
    peer_edges: set[frozenset[str]] = set()

    for position, team in enumerate(teams):
        drafts = team.members

        if len(drafts) > max_agents:
            warnings.append(f"truncated team {team.name} to {max_agents} members")
            drafts = drafts[:max_agents]

        lead_index = next((i for i, draft in enumerate(drafts) if draft[2]), None)

        if lead_index is None:
            warnings.append(f"team {team.name} has no lead, using its first member")
            lead_index = 0
        elif sum(draft[2] for draft in drafts) > 1:
            warnings.append(f"team {team.name} has several leads, using the first")

        members = []

        for index, (role, description, _) in enumerate(drafts):
            agent_id = make_agent_id(role, taken=(agent.agent_id for agent in agents))
            member = AgentSpec(
                agent_id=agent_id,
                role=role,
                description=description,
                is_lead=index == lead_index,
            )
            members.append(member)
            agents.append(member)

        for first, second in itertools.combinations(members, 2):
            peer_edges.add(frozenset((first.agent_id, second.agent_id)))

        team_specs.append(
            TeamSpec(
                name=team.name,
                members=tuple(members),
                lead=members[lead_index].agent_id,
                position=position,
            )
        )

    names = [team.name for team in team_specs]

    if len(set(names)) != len(names):
        return ParseOutcome.fallback(text, warnings=("duplicate team names",))

    roster = ExpertRoster(
        agents=tuple(agents),
        kind=StructureKind.ICT,
        graph=CommunicationGraph(peer_edges=frozenset(peer_edges)),
        teams=tuple(team_specs),
    )
    confidence = Confidence.HEURISTIC if warnings else Confidence.EXACT

    return ParseOutcome(roster, confidence, text, warnings=tuple(warnings))


def _match_role(mention: str, agents: list[AgentSpec]) -> Optional[AgentSpec]:
    mention_key = normalize(mention)

    for agent in agents:
        if normalize(agent.role) == mention_key:
            return agent

    return next((agent for agent in agents if roles_match(agent.role, mention)), None)


def parse_structure(
    line: str, agents: list[AgentSpec]
) -> tuple[CommunicationGraph, list[str]]:
    """
    Parse a structure line like ``A == B > C`` against the recruited agents.

    Returns:
        The communication graph, and a warning for every role in the line that does
        not match an agent.
    """

    warnings: list[str] = []
    groups: list[list[str]] = []

    for group_text in re.split(r"\s*[>≻]\s*", line.strip()):
        group: list[str] = []

        for mention in group_text.split("=="):
            mention = mention.strip(" *_`.")

            if not mention:
                continue

            agent = _match_role(mention, agents)

            if agent is None:
                warnings.append(f"structure role {mention} matches no expert")
                continue

            if agent.agent_id not in group:
                group.append(agent.agent_id)

        groups.append(group)

    peer_edges = {
        frozenset(pair)
        for group in groups
        for pair in itertools.combinations(group, 2)
    }
    directed_edges = {
        (source, target)
        for left, right in zip(groups, groups[1:])
        for source in left
        for target in right
        if source != target
    }

    return (
        CommunicationGraph(
            peer_edges=frozenset(peer_edges), directed_edges=frozenset(directed_edges)
        ),
        warnings,
    )


@dataclass(frozen=True)
class Participation:
    """Whether an agent wants to speak in a turn, and to whom."""

    wants_to_talk: bool
    target: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.wants_to_talk and self.target is not None:
            raise ValueError("An agent that does not talk has no target.")


def parse_participation(text: str, roster: ExpertRoster) -> Participation:
    """
    Parse an agent's answer to whether it wants to talk to another expert.

    The first ``yes`` or ``no`` decides. The target is the agent whose role is
    mentioned first after it, or an agent referred to by number (``Agent 2``).
    Undecidable output means the agent does not talk.
    """

    decision = _PARTICIPATION.search(text)

    if decision is None or decision.group(1).casefold() == "no":
        return Participation(wants_to_talk=False)

    rest = text[decision.end() :]
    numbered = _NUMBERED_AGENT.search(rest)
    candidates: list[tuple[int, int, str]] = []

    for order, agent in enumerate(roster.agents):
        index = find_mention(rest, agent.role)

        if index >= 0:
            candidates.append((index, order, agent.agent_id))

    if candidates:
        return Participation(wants_to_talk=True, target=min(candidates)[2])

    if numbered is not None and 1 <= int(numbered.group(1)) <= len(roster.agents):
        target = roster.agents[int(numbered.group(1)) - 1].agent_id

        return Participation(wants_to_talk=True, target=target)

    return Participation(wants_to_talk=True)
