import pytest

from docteam.agent import (
    AgentSpec,
    CommunicationGraph,
    ExpertRoster,
    StructureKind,
    TeamSpec,
    make_agent_id,
)


class TestMakeAgentId:
    def test_slug(self):
        assert make_agent_id("Medical Geneticist") == "medical-geneticist"
        assert make_agent_id("**Dr. Who**") == "dr-who"

    def test_collision(self):
        taken = ["cardiologist", "cardiologist-2"]

        assert make_agent_id("Cardiologist", taken) == "cardiologist-3"

    def test_reserved(self):
        assert make_agent_id("Moderator") == "moderator-2"
        assert make_agent_id("All") == "all-2"

    def test_empty_role(self):
        assert make_agent_id("???") == "agent"


class TestAgentSpec:
    def test_temperature_out_of_range(self):
        with pytest.raises(ValueError):
            AgentSpec(agent_id="a", role="A", temperature=2.5)


class TestCommunicationGraph:
    def test_neighbours(self, mdt_roster):
        graph = mdt_roster.graph
        order = mdt_roster.agent_ids

        assert graph.neighbours("cardiologist", order) == [
            "nephrologist",
            "clinical-pharmacologist",
        ]
        assert graph.neighbours("clinical-pharmacologist", order) == []

    def test_adjacency_is_directed(self, mdt_roster):
        graph = mdt_roster.graph

        assert graph.is_adjacent("nephrologist", "cardiologist")
        assert graph.is_adjacent("cardiologist", "clinical-pharmacologist")
        assert not graph.is_adjacent("clinical-pharmacologist", "cardiologist")

    def test_endpoints(self, mdt_roster):
        assert mdt_roster.graph.endpoints() == set(mdt_roster.agent_ids)

    def test_self_loop(self):
        with pytest.raises(ValueError):
            CommunicationGraph(directed_edges=frozenset({("a", "a")}))

    def test_has_edges(self):
        assert not CommunicationGraph().has_edges


class TestExpertRoster:
    def test_duplicate_ids(self, cardiologist):
        with pytest.raises(ValueError):
            ExpertRoster(agents=(cardiologist, cardiologist), kind=StructureKind.MDT)

    def test_single_pcp_size(self, cardiologist, nephrologist):
        with pytest.raises(ValueError):
            ExpertRoster(
                agents=(cardiologist, nephrologist), kind=StructureKind.SINGLE_PCP
            )

    def test_mdt_size(self, cardiologist):
        with pytest.raises(ValueError):
            ExpertRoster(agents=(cardiologist,), kind=StructureKind.MDT)

    def test_unknown_graph_agent(self, cardiologist, nephrologist):
        graph = CommunicationGraph(
            peer_edges=frozenset({frozenset({"cardiologist", "surgeon"})})
        )

        with pytest.raises(ValueError):
            ExpertRoster(
                agents=(cardiologist, nephrologist), kind=StructureKind.MDT, graph=graph
            )

    def test_team_without_lead(self, cardiologist, nephrologist):
        team = TeamSpec(
            name="Team", members=(cardiologist, nephrologist), lead="cardiologist"
        )

        with pytest.raises(ValueError):
            ExpertRoster(
                agents=(cardiologist, nephrologist),
                kind=StructureKind.ICT,
                teams=(team,),
            )

    def test_team_positions(self, ict_roster):
        first, second = ict_roster.teams

        with pytest.raises(ValueError):
            ExpertRoster(
                agents=ict_roster.agents, kind=StructureKind.ICT, teams=(second, first)
            )

    def test_teams_outside_ict(self, ict_roster, cardiologist, nephrologist):
        with pytest.raises(ValueError):
            ExpertRoster(
                agents=(cardiologist, nephrologist),
                kind=StructureKind.MDT,
                teams=ict_roster.teams[:1],
            )

    def test_get(self, mdt_roster, cardiologist):
        assert mdt_roster.get("cardiologist") == cardiologist
        assert mdt_roster.get("surgeon") is None

    def test_with_temperature(self, ict_roster):
        roster = ict_roster.with_temperature(0.7)

        assert all(agent.temperature == 0.7 for agent in roster.agents)
        assert all(
            member.temperature == 0.7
            for team in roster.teams
            for member in team.members
        )
        assert ict_roster.agents[0].temperature == 0.0


class TestTeamSpec:
    def test_lead_agent(self, ict_roster):
        assert ict_roster.teams[0].lead_agent.role == "Emergency Physician"

    def test_lead_not_a_member(self, cardiologist):
        with pytest.raises(ValueError):
            TeamSpec(name="Team", members=(cardiologist,), lead="surgeon")

    def test_no_members(self):
        with pytest.raises(ValueError):
            TeamSpec(name="Team", members=(), lead="surgeon")
