import json
from unittest.mock import patch

import pytest

from docteam.agent import StructureKind
from docteam.backend.scripted import ScriptedBackend, ScriptedScript
from docteam.config import RunConfig
from docteam.errors import ConfigError
from docteam.orchestrator import Orchestrator, default_roster
from docteam.parse.outcome import Confidence
from docteam.query import ComplexityLevel
from docteam.retrieval import KNOWLEDGE_HEADER, index_corpus
from docteam.solo import load_exemplars
from docteam.transcript import EventKind

LOW, MODERATE, HIGH = ComplexityLevel

TEAM_TEXT = (
    "Group 1 - Initial Assessment Team\n"
    "Member 1: Emergency Physician (Lead) - Performs the first evaluation.\n"
    "Group 2 - Final Review & Decision Team\n"
    "Member 1: Internist (Lead) - Integrates all findings."
)


@pytest.fixture
def orchestrator(scripted, run_config):
    def make(responses, **overrides):
        config = run_config.with_overrides(**overrides) if overrides else run_config
        return Orchestrator(scripted(responses), config)

    return make


@pytest.fixture
def toy_entries(toy_script):
    with toy_script.open(encoding="utf-8") as file:
        return json.load(file)["entries"]


class TestDefaultRoster:
    def test_low(self):
        roster = default_roster(LOW, 3)

        assert roster.kind is StructureKind.SINGLE_PCP
        assert roster.agents[0].role == "General Physician"

    def test_moderate(self):
        assert len(default_roster(MODERATE, 3).agents) == 3
        assert len(default_roster(MODERATE, 1).agents) == 2

    def test_high(self):
        roster = default_roster(HIGH, 2)

        assert len(roster.teams) == 3
        assert all(len(team.members) == 2 for team in roster.teams)
        assert all(team.lead_agent.is_lead for team in roster.teams)
        assert len({agent.agent_id for agent in roster.agents}) == 6


class TestClassifyComplexity:
    def test_exact(self, mcq_query, orchestrator):
        engine = orchestrator(["3) high"])

        assert engine.classify_complexity(mcq_query) is HIGH
        assert engine.backend.remaining == 0

    def test_records_level(self, mcq_query, orchestrator):
        engine = orchestrator(["1) low, though it could be high"])
        consultation = engine.consult(mcq_query)

        level = engine.classify_complexity(mcq_query, consultation)
        event = consultation.transcript[0]

        assert level is LOW
        assert consultation.metadata["complexity"] is LOW
        assert consultation.metadata["complexity_confidence"] is Confidence.HEURISTIC
        assert event.kind is EventKind.CLASSIFICATION
        assert event.flags == ("complexity:low", "heuristic")

    def test_retry(self, mcq_query, orchestrator):
        engine = orchestrator(["I cannot tell.", "2) moderate"], seed=10)
        consultation = engine.consult(mcq_query)

        with patch.object(
            engine.backend, "_generate", wraps=engine.backend._generate
        ) as spy:
            level = engine.classify_complexity(mcq_query, consultation)

        assert level is MODERATE
        assert [call.args[0].seed for call in spy.call_args_list] == [10, 11]
        assert consultation.flags == []

    def test_fallback(self, mcq_query, orchestrator):
        engine = orchestrator(["?", "??", "???"])
        consultation = engine.consult(mcq_query)

        level = engine.classify_complexity(mcq_query, consultation)

        assert level is MODERATE
        assert consultation.flags == ["complexity-fallback"]
        assert consultation.stats.calls == 3
        assert consultation.transcript[-1].flags == ("complexity:none", "fallback")


class TestRecruit:
    def test_low(self, mcq_query, orchestrator):
        engine = orchestrator(["1. Cardiologist - Focuses on the heart."])

        roster = engine.recruit(mcq_query, LOW)

        assert roster.kind is StructureKind.SINGLE_PCP
        assert roster.agents[0].role == "Cardiologist"
        assert roster.agents[0].temperature == engine.config.temperature("agent")

    def test_moderate(self, mcq_query, orchestrator):
        engine = orchestrator(
            [
                "1. Cardiologist - Heart.\n2. Nephrologist - Kidneys.\n"
                "Cardiologist > Nephrologist"
            ]
        )

        roster = engine.recruit(mcq_query, MODERATE)

        assert roster.kind is StructureKind.MDT
        assert roster.graph.directed_edges == {("cardiologist", "nephrologist")}

    def test_retry(self, mcq_query, orchestrator):
        single_team = TEAM_TEXT.split("Group 2")[0]
        engine = orchestrator(["1. Cardiologist - Heart.", single_team])
        consultation = engine.consult(mcq_query)

        roster = engine.recruit(mcq_query, MODERATE, consultation)

        assert consultation.flags == ["recruitment-fallback"]
        assert roster == default_roster(MODERATE, 3).with_temperature(
            engine.config.temperature("agent")
        )
        assert [event.flags for event in consultation.transcript] == [
            ("unusable",),
            ("unusable",),
        ]

    def test_teams_retry(self, mcq_query, orchestrator):
        engine = orchestrator([TEAM_TEXT.split("Group 2")[0], TEAM_TEXT])
        consultation = engine.consult(mcq_query)

        roster = engine.recruit(mcq_query, HIGH, consultation)

        assert len(roster.teams) == 2
        assert consultation.stats.calls == 2
        assert consultation.flags == []

    def test_no_experts(self, mcq_query, orchestrator):
        engine = orchestrator(["Nobody.", "Still nobody."])
        consultation = engine.consult(mcq_query)

        roster = engine.recruit(mcq_query, LOW, consultation)

        assert roster.agents[0].agent_id == "general-physician"
        assert consultation.flags == ["recruitment-fallback"]

    def test_roster_warning(self, mcq_query, orchestrator):
        engine = orchestrator(
            [
                "1. Cardiologist - Heart.\n2. Nephrologist - Kidneys.\n"
                "3. Surgeon - Cuts."
            ],
            n_max=2,
        )
        consultation = engine.consult(mcq_query)

        roster = engine.recruit(mcq_query, MODERATE, consultation)

        assert len(roster.agents) == 2
        assert consultation.flags == ["roster-warning"]


class TestProcessors:
    def test_none(self, orchestrator):
        engine = orchestrator([])

        assert len(engine.processors(engine.config)) == 0

    def test_without_corpus(self, mcq_query, orchestrator):
        engine = orchestrator([], retrieval_enabled=True)

        with pytest.raises(ConfigError):
            engine.run(mcq_query)

    def test_with_corpus(self, scripted, run_config, package_data_dir):
        engine = Orchestrator(
            scripted([]), run_config, index=index_corpus(package_data_dir / "corpus")
        )
        config = run_config.with_overrides(
            retrieval_enabled=True, knowledge_init_enabled=True
        )

        assert engine.processors(config).get_names() == ["retrieval", "knowledge"]

    def test_retrieval_reaches_classifier(
        self, mcq_query, scripted, run_config, package_data_dir
    ):
        backend = scripted(["1) low"])
        engine = Orchestrator(
            backend,
            run_config.with_overrides(retrieval_enabled=True),
            index=index_corpus(package_data_dir / "corpus"),
        )

        with patch.object(backend, "_generate", wraps=backend._generate) as spy:
            engine.classify_complexity(mcq_query)

        assert spy.call_args.args[0].messages[-1].text.startswith(KNOWLEDGE_HEADER)


class TestRun:
    @pytest.mark.parametrize(
        "mode, calls, method, complexity",
        [
            ("adaptive", 3, "pcp:direct", LOW),
            ("pcp", 2, "pcp:direct", LOW),
            ("mdt", 5, "mdt:direct", MODERATE),
            ("ict", 8, "ict:direct", HIGH),
            ("group:majority", 4, "group:majority", MODERATE),
            ("group:borda", 4, "group:borda", MODERATE),
            ("solo:zero-shot", 1, "solo:zero-shot", LOW),
            ("solo:cot-sc", 5, "solo:cot-sc", LOW),
            ("solo:er", 4, "solo:er", LOW),
            ("solo:medprompt", 5, "solo:medprompt", LOW),
        ],
    )
    def test_modes(  # pylint: disable=R0913
        self, mode, calls, method, complexity, toy_queries, toy_orchestrator
    ):
        config = toy_orchestrator.config.with_overrides(mode=mode)

        decision = toy_orchestrator.run(toy_queries[0], config)

        assert decision.answer == "B"
        assert decision.method == method
        assert decision.complexity is complexity
        assert decision.stats.calls == calls

    def test_default_config_deterministic(
        self, toy_queries, toy_script, package_data_dir
    ):
        exemplars = load_exemplars(package_data_dir / "exemplars.json")
        decisions = [
            Orchestrator(
                ScriptedBackend(ScriptedScript.from_file(toy_script)),
                RunConfig(),
                exemplars=exemplars,
            ).run(toy_queries[0])
            for _ in range(2)
        ]

        assert decisions[0] == decisions[1]
        assert decisions[0].elapsed == 0.0
        assert decisions[0].to_dict() == decisions[1].to_dict()
        assert decisions[0].transcript == decisions[1].transcript

    def test_adaptive_high(self, toy_queries, toy_entries, run_config):
        entries = [{"tag": "classify", "response": "3) high"}] + toy_entries
        backend = ScriptedBackend(
            ScriptedScript.from_data({"mode": "match", "entries": entries})
        )

        decision = Orchestrator(backend, run_config).run(toy_queries[0])

        assert decision.complexity is HIGH
        assert decision.stats.calls == 9
        assert decision.roster.teams[1].name == "Final Review & Decision Team"

    def test_low_path(self, toy_queries, toy_orchestrator):
        decision = toy_orchestrator.run(toy_queries[0])

        assert decision.roster.agents[0].role == "Primary Care Physician"
        assert decision.entropy_trace == ((0, 0.0),)
        assert [event.kind for event in decision.transcript] == [
            EventKind.CLASSIFICATION,
            EventKind.RECRUITMENT,
            EventKind.OPINION,
        ]
