import math
import random

import pytest

from docteam.agent import StructureKind
from docteam.errors import EmptyRosterError
from docteam.parse.outcome import Confidence
from docteam.parse.roster import (
    Participation,
    parse_participation,
    parse_roster,
    parse_structure,
)

MDT_TEXT = (
    "1. Cardiologist - Focuses on the heart.\n"
    "2. Nephrologist - Focuses on the kidneys.\n"
    "3. Clinical Pharmacologist - Reviews drugs.\n"
    "Cardiologist == Nephrologist > Clinical Pharmacologist"
)

ICT_TEXT = (
    "Group 1 - Initial Assessment Team\n"
    "Member 1: Emergency Physician (Lead) - Performs the first evaluation.\n"
    "Member 2: Radiologist - Interprets the imaging.\n"
    "Group 2 - Final Review & Decision Team\n"
    "Member 1: Internist (Lead) - Integrates all findings.\n"
    "Member 2: Clinical Pharmacologist - Reviews treatment safety."
)


class TestParseRoster:
    def test_mdt(self):
        outcome = parse_roster(MDT_TEXT, max_agents=3)
        roster = outcome.value

        assert outcome.confidence is Confidence.EXACT
        assert roster.kind is StructureKind.MDT
        assert roster.agent_ids == [
            "cardiologist",
            "nephrologist",
            "clinical-pharmacologist",
        ]
        assert roster.agents[0].description == "Focuses on the heart."
        assert roster.graph.peer_edges == {frozenset({"cardiologist", "nephrologist"})}
        assert roster.graph.directed_edges == {
            ("cardiologist", "clinical-pharmacologist"),
            ("nephrologist", "clinical-pharmacologist"),
        }

    def test_truncates(self):
        outcome = parse_roster(MDT_TEXT, max_agents=2)

        assert len(outcome.value.agents) == 2
        assert outcome.confidence is Confidence.HEURISTIC
        assert outcome.warnings[0] == "truncated 3 experts to 2"

    def test_single_pcp(self):
        outcome = parse_roster(
            "1. Primary Care Physician - Handles common questions.",
            max_agents=1,
            kind=StructureKind.SINGLE_PCP,
        )

        assert outcome.confidence is Confidence.EXACT
        assert outcome.value.agents[0].role == "Primary Care Physician"

    def test_single_pcp_keeps_first(self):
        outcome = parse_roster(MDT_TEXT, max_agents=3, kind=StructureKind.SINGLE_PCP)

        assert outcome.value.agent_ids == ["cardiologist"]
        assert not outcome.value.graph.has_edges
        assert outcome.confidence is Confidence.HEURISTIC

    def test_inferred_single(self):
        outcome = parse_roster("- Internist: Evaluates the case.", max_agents=3)

        assert outcome.value.kind is StructureKind.SINGLE_PCP
        assert outcome.value.agents[0].description == "Evaluates the case."

    def test_mdt_needs_two(self):
        outcome = parse_roster(
            "1. Cardiologist - Focuses on the heart.",
            max_agents=3,
            kind=StructureKind.MDT,
        )

        assert outcome.value is None
        assert outcome.confidence is Confidence.FALLBACK

    def test_flat_list_is_no_ict(self):
        assert parse_roster(MDT_TEXT, 3, StructureKind.ICT).value is None

    def test_duplicate_roles(self):
        text = "1. Cardiologist - Adult care.\n2. Cardiologist - Pediatric care."

        roster = parse_roster(text, max_agents=3).value

        assert roster.agent_ids == ["cardiologist", "cardiologist-2"]

    def test_unknown_structure_role(self):
        text = MDT_TEXT.replace("> Clinical Pharmacologist", "> Surgeon")

        outcome = parse_roster(text, max_agents=3)

        assert outcome.confidence is Confidence.HEURISTIC
        assert "structure role Surgeon matches no expert" in outcome.warnings
        assert not outcome.value.graph.directed_edges

    def test_empty(self):
        with pytest.raises(EmptyRosterError):
            parse_roster("I would rather not recruit anyone.", max_agents=3)

    def test_max_agents(self):
        with pytest.raises(ValueError):
            parse_roster(MDT_TEXT, max_agents=0)

    def test_teams(self):
        outcome = parse_roster(ICT_TEXT, max_agents=3, kind=StructureKind.ICT)
        roster = outcome.value

        assert outcome.confidence is Confidence.EXACT
        assert roster.kind is StructureKind.ICT
        assert [team.name for team in roster.teams] == [
            "Initial Assessment Team",
            "Final Review & Decision Team",
        ]
        assert [team.position for team in roster.teams] == [0, 1]
        assert [team.lead for team in roster.teams] == [
            "emergency-physician",
            "internist",
        ]
        assert roster.graph.peer_edges == {
            frozenset({"emergency-physician", "radiologist"}),
            frozenset({"internist", "clinical-pharmacologist"}),
        }

    def test_team_without_lead(self):
        text = ICT_TEXT.replace("Emergency Physician (Lead)", "Emergency Physician")

        outcome = parse_roster(text, max_agents=3)

        assert outcome.confidence is Confidence.HEURISTIC
        assert outcome.value.teams[0].lead == "emergency-physician"
        assert outcome.value.teams[0].lead_agent.is_lead

    def test_team_headers(self):
        text = (
            "**Team 1: Diagnostic Team**\n"
            "- Pathologist (Lead) - Interprets tissue.\n"
            "- Microbiologist - Identifies organisms.\n"
            "**Team 2: Treatment Team**\n"
            "- Internist (Lead) - Treats."
        )

        roster = parse_roster(text, max_agents=3).value

        assert [team.name for team in roster.teams] == [
            "Diagnostic Team",
            "Treatment Team",
        ]
        assert [len(team.members) for team in roster.teams] == [2, 1]

    def test_teams_as_mdt(self):
        roster = parse_roster(ICT_TEXT, max_agents=4, kind=StructureKind.MDT).value

        assert roster.kind is StructureKind.MDT
        assert len(roster.agents) == 4
        assert not roster.teams


class TestParseStructure:
    def test_partial_role_names(self, mdt_roster):
        graph, warnings = parse_structure(
            "cardiologist > Pharmacologist", list(mdt_roster.agents)
        )

        assert warnings == []
        assert graph.directed_edges == {("cardiologist", "clinical-pharmacologist")}
        assert not graph.peer_edges


class TestParseParticipation:
    def test_role(self, mdt_roster):
        participation = parse_participation(
            "Yes. I want to talk to the Nephrologist about potassium.", mdt_roster
        )

        assert participation == Participation(True, "nephrologist")

    def test_earliest_mention(self, mdt_roster):
        participation = parse_participation(
            "Yes, the Clinical Pharmacologist first and then the Cardiologist.",
            mdt_roster,
        )

        assert participation.target == "clinical-pharmacologist"

    def test_numbered(self, mdt_roster):
        participation = parse_participation("yes, Agent 2 please", mdt_roster)

        assert participation.target == "nephrologist"

    def test_number_out_of_range(self, mdt_roster):
        participation = parse_participation("yes, Agent 7 please", mdt_roster)

        assert participation == Participation(True)

    def test_no(self, mdt_roster):
        assert parse_participation("No. **Answer:** (C)", mdt_roster) == Participation(
            False
        )

    def test_undecidable(self, mdt_roster):
        participation = parse_participation("I have nothing to add.", mdt_roster)

        assert not participation.wants_to_talk

    def test_target_requires_talking(self):
        with pytest.raises(ValueError):
            Participation(wants_to_talk=False, target="cardiologist")


class TestStructureEdgeCounts:
    ROLES = [
        "Cardiologist",
        "Nephrologist",
        "Neurologist",
        "Radiologist",
        "Oncologist",
        "Pediatrician",
        "Surgeon",
        "Dermatologist",
        "Hematologist",
        "Pulmonologist",
    ]

    def test_random_structures(self):
        rng = random.Random(0)

        for _ in range(500):
            roles = rng.sample(self.ROLES, rng.randint(2, 8))
            boundaries = range(1, len(roles))
            cuts = sorted(rng.sample(boundaries, rng.randint(0, len(boundaries))))
            groups = [roles[i:j] for i, j in zip([0] + cuts, cuts + [len(roles)])]
            lines = [f"{i}. {role} - Expert." for i, role in enumerate(roles, start=1)]
            lines.append(" > ".join(" == ".join(group) for group in groups))
            sizes = [len(group) for group in groups]

            outcome = parse_roster("\n".join(lines), max_agents=len(roles))
            graph = outcome.value.graph

            assert outcome.confidence is Confidence.EXACT
            assert len(graph.peer_edges) == sum(math.comb(g, 2) for g in sizes)
            assert len(graph.directed_edges) == sum(
                left * right for left, right in zip(sizes, sizes[1:])
            )
