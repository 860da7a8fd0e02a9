import os
from unittest.mock import patch

import pytest

from docteam.backend.factory import create_backend
from docteam.backend.scripted import ScriptedBackend, ScriptedScript
from docteam.config import BackendConfig, RunConfig
from docteam.harness import run_eval
from docteam.orchestrator import Orchestrator
from docteam.retrieval import KNOWLEDGE_HEADER, index_corpus
from docteam.solo import load_exemplars

TOY_MDT = (
    "1. Cardiologist - Focuses on the heart.\n"
    "2. Emergency Physician - Treats acute conditions.\n"
    "3. Clinical Pharmacologist - Reviews drugs.\n"
    "Cardiologist == Emergency Physician > Clinical Pharmacologist"
)


@pytest.fixture
def split_team():
    """An MDT in which the cardiologist never changes their mind."""

    return ScriptedBackend(
        ScriptedScript.from_data(
            {
                "mode": "match",
                "entries": [
                    {"tag": "recruit", "response": TOY_MDT, "repeat": True},
                    {
                        "tag": "mdt.feedback",
                        "response": "### Cardiologist\nReconsider the findings.",
                        "repeat": True,
                    },
                    {"tag": "decide", "response": "**Answer:** (B)", "repeat": True},
                    {
                        "tag": "mdt",
                        "contains": "You are a Cardiologist",
                        "response": "**Answer:** (A)",
                        "repeat": True,
                    },
                    {"tag": "mdt", "response": "**Answer:** (B)", "repeat": True},
                ],
            }
        )
    )


def read_outputs(directory):
    return {
        path.relative_to(directory).as_posix(): path.read_bytes()
        for path in sorted(directory.rglob("*"))
        if path.is_file()
    }


class TestModes:
    @pytest.mark.parametrize(
        "mode, mean_calls, complexity",
        [
            ("adaptive", 3, "low"),
            ("pcp", 2, "low"),
            ("mdt", 5, "moderate"),
            ("ict", 8, "high"),
            ("group:weighted", 4, "moderate"),
            ("solo:cot-sc", 5, "low"),
            ("solo:er", 4, "low"),
        ],
    )
    def test_toy(
        self, mode, mean_calls, complexity, toy_queries, toy_orchestrator, tmp_path
    ):
        config = toy_orchestrator.config.with_overrides(mode=mode)

        result = run_eval(toy_queries, toy_orchestrator, tmp_path, config=config)

        assert result.summary.mode == mode
        assert result.summary.accuracy == 0.5
        assert result.summary.mean_calls == mean_calls
        assert result.summary.complexity_distribution[complexity] == 4
        assert [record.predicted for record in result.records] == ["B"] * 4


class TestAblations:
    def test_review(self, toy_queries, split_team, run_config):
        engine = Orchestrator(split_team, run_config.with_overrides(mode="mdt"))

        decision = engine.run(toy_queries[1])

        assert decision.answer == "B"
        assert decision.method == "mdt:direct"
        assert decision.stats.calls == 1 + 3 + 3 * (3 * 2 + 1) + 1
        assert [r for r, _ in decision.entropy_trace] == [0, 1, 2, 3]

    def test_without_review(self, toy_queries, split_team, run_config):
        config = run_config.with_overrides(mode="mdt", review_enabled=False)
        engine = Orchestrator(split_team, config)

        decision = engine.run(toy_queries[1])

        assert decision.answer == "B"
        assert decision.stats.calls == 1 + 3 + 3 * 3 * 2 + 1
        assert not [e for e in decision.transcript if e.kind.value == "feedback"]

    def test_retrieval(self, toy_queries, toy_script, run_config, package_data_dir):
        backend = ScriptedBackend(ScriptedScript.from_file(toy_script))
        engine = Orchestrator(
            backend,
            run_config.with_overrides(mode="pcp", retrieval_enabled=True),
            index=index_corpus(package_data_dir / "corpus"),
        )

        with patch.object(backend, "_generate", wraps=backend._generate) as spy:
            decision = engine.run(toy_queries[3])

        expert = spy.call_args_list[-1].args[0].messages[-1].text

        assert decision.stats.calls == 2
        assert expert.startswith(KNOWLEDGE_HEADER)
        assert "(source: heparin.txt)" in expert


class TestReproducibility:
    def test_deterministic(self, toy_queries, toy_script, run_config, tmp_path):
        for run in ("first", "second"):
            engine = Orchestrator(
                ScriptedBackend(ScriptedScript.from_file(toy_script)),
                run_config.with_overrides(mode="ict"),
            )
            run_eval(toy_queries, engine, tmp_path / run)

        first = read_outputs(tmp_path / "first")

        assert first == read_outputs(tmp_path / "second")
        assert "summary.json" in first
        assert "transcripts/toy-4.json" in first

    def test_replay(self, toy_queries, toy_script, package_data_dir, tmp_path):
        session = tmp_path / "session.jsonl"
        config = RunConfig(mode="solo:medprompt")
        exemplars = load_exemplars(package_data_dir / "exemplars.json")
        recording = create_backend(
            BackendConfig(
                kind="scripted",
                script_path=str(toy_script),
                record_path=str(session),
            )
        )
        recorded = run_eval(
            toy_queries,
            Orchestrator(recording, config, exemplars=exemplars),
            tmp_path / "recorded",
        )
        replaying = create_backend(
            BackendConfig(kind="replay", session_path=str(session))
        )
        replayed = run_eval(
            toy_queries,
            Orchestrator(replaying, config, exemplars=exemplars),
            tmp_path / "replayed",
        )

        assert replayed == recorded
        assert read_outputs(tmp_path / "replayed") == read_outputs(
            tmp_path / "recorded"
        )


@pytest.mark.live
@pytest.mark.skipif(
    not os.environ.get("DOCTEAM_LIVE_API_KEY"),
    reason="DOCTEAM_LIVE_API_KEY is not set",
)
def test_live(toy_queries, run_config):
    backend = create_backend(
        BackendConfig(
            kind="http",
            base_url=os.environ.get("DOCTEAM_LIVE_BASE_URL"),
            model=os.environ.get("DOCTEAM_LIVE_MODEL", "gpt-4o-mini"),
            api_key_env="DOCTEAM_LIVE_API_KEY",
        )
    )
    engine = Orchestrator(backend, run_config.with_overrides(mode="pcp"))

    decision = engine.run(toy_queries[3])

    assert decision.answer in toy_queries[3].options
    assert decision.stats.calls == 2
