"""The integrated care pipeline: teams assess the case one after the other, each
passing a synthesized report on to the teams after it."""

import logging
from dataclasses import replace
from typing import Sequence

from docteam.agent import DECIDER, ExpertRoster, StructureKind, TeamSpec
from docteam.aggregate import TeamReports, final_decide
from docteam.consultation import ANSWER_FALLBACK, Consultation
from docteam.decision import Decision
from docteam.errors import StructureError
from docteam.mdt import stance_symbols
from docteam.metrics import consensus_entropy
from docteam.process.prompt_processor import InjectionSite
from docteam.prompts import (
    agent_system_prompt,
    assessment_prompt,
    format_reports,
    report_prompt,
)
from docteam.query import ComplexityLevel
from docteam.transcript import EventKind, Report

logger = logging.getLogger(__name__)

INITIAL_TEAM = "Initial Assessment Team"
FINAL_TEAM = "Final Review & Decision Team"


def arrange_pipeline(roster: ExpertRoster) -> ExpertRoster:
    """
    Put the teams of a roster in pipeline order, numbered from 0. The first team
    becomes the Initial Assessment Team, and the last the Final Review & Decision
    Team.

    Raises:
        StructureError: If the roster is not an integrated care roster with at least
            two teams.
    """

    if roster.kind is not StructureKind.ICT or len(roster.teams) < 2:
        raise StructureError("An integrated care pipeline needs at least two teams.")

    teams = sorted(roster.teams, key=lambda team: team.position)
    names = [team.name for team in teams]
    names[0], names[-1] = INITIAL_TEAM, FINAL_TEAM

    if len(set(names)) != len(names):
        raise StructureError(f"Team names are not unique after renaming: {names}.")

    return replace(
        roster,
        teams=tuple(
            replace(team, name=name, position=position)
            for position, (team, name) in enumerate(zip(teams, names))
        ),
    )


def generate_report(
    consultation: Consultation, team: TeamSpec, prior: Sequence[Report]
) -> Report:
    """
    Let a team assess the case and write its report. Every member gives an
    assessment, given the reports of earlier teams, and the lead synthesizes them.

    Args:
        consultation: The consultation.
        team: The team.
        prior: The reports the team is given, in pipeline order.

    Returns:
        The report. Its body is the lead's output.
    """

    query = consultation.query
    prior_block = format_reports([(report.team_name, report.body) for report in prior])
    systems = {
        member.agent_id: consultation.prepare(
            agent_system_prompt(member), InjectionSite.AGENT_SYSTEM, member
        )
        for member in team.members
    }

    requests = [
        consultation.request(
            "ict.assess",
            consultation.prepare(
                assessment_prompt(query, team.name, prior_block),
                InjectionSite.EXPERT_PROMPT,
                member,
            ),
            systems[member.agent_id],
            step="agent",
            temperature=member.temperature,
        )
        for member in team.members
    ]
    responses = consultation.complete_many(requests)
    assessments = []

    for member, response in zip(team.members, responses):
        outcome = consultation.extract(response.text)
        consultation.transcript.record(
            EventKind.OPINION,
            member.agent_id,
            response.text,
            round_no=team.position,
            recipient=team.lead,
            extracted_answer=outcome.value,
            flags=() if outcome.ok else (ANSWER_FALLBACK,),
        )
        assessments.append(f"{member.role}: {response.text.strip()}")

    lead = team.lead_agent
    response = consultation.complete(
        consultation.request(
            "ict.report",
            report_prompt(query, team.name, "\n\n".join(assessments)),
            systems[lead.agent_id],
            step="agent",
            temperature=lead.temperature,
        )
    )
    consultation.transcript.record(
        EventKind.REPORT, lead.agent_id, response.text, round_no=team.position, turn=1
    )

    return Report(
        team_name=team.name,
        body=response.text,
        produced_by=lead.agent_id,
        consumed_reports=tuple(report.team_name for report in prior),
    )


def check_report_flow(reports: Sequence[Report]) -> None:
    """
    Check that every report only consumed reports of strictly earlier teams.

    Raises:
        StructureError: If a report consumed its own or a later report.
    """

    earlier: set[str] = set()

    for report in reports:
        unknown = set(report.consumed_reports) - earlier

        if unknown:
            raise StructureError(
                f"Report of {report.team_name} consumes reports that are not "
                f"earlier in the pipeline: {sorted(unknown)}."
            )

        earlier.add(report.team_name)


def run_ict(consultation: Consultation, roster: ExpertRoster) -> Decision:
    """
    Answer a query by a pipeline of teams. Each team receives the reports of all
    earlier teams (with ``ict_parallel``, only the final team does), and the decider
    answers from all reports.

    Args:
        consultation: The consultation.
        roster: An integrated care roster with at least two teams.

    Returns:
        The decision, with the consensus entropy of the member answers per team.

    Raises:
        StructureError: If the roster has fewer than two teams.
    """

    roster = arrange_pipeline(roster)
    parallel = consultation.config.ict_parallel
    reports: list[Report] = []
    trace = []
    votes = {}

    for team in roster.teams:
        is_final = team is roster.teams[-1]
        prior = reports if is_final or not parallel else []
        reports.append(generate_report(consultation, team, prior))

        stances = {}

        for event in consultation.transcript.filter(
            kind=EventKind.OPINION, round_no=team.position
        ):
            stances[event.speaker] = event.extracted_answer

            if event.extracted_answer is not None:
                votes[event.speaker] = (event.extracted_answer, None)

        trace.append((team.position, consensus_entropy(stance_symbols(stances))))
        logger.debug("%s reported, entropy %.3f", team.name, trace[-1][1])

    check_report_flow(reports)
    answer = final_decide(consultation, TeamReports(tuple(reports)), speaker=DECIDER)

    return consultation.conclude(
        answer=answer,
        method=f"ict:{consultation.config.decision_method}",
        complexity=ComplexityLevel.HIGH,
        votes=votes,
        entropy_trace=trace,
        reports=reports,
        roster=roster,
    )
