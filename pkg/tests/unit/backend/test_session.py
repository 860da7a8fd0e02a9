import json

import pytest

from docteam.backend.base import ChatRequest, Message
from docteam.backend.cache import ResponseCache
from docteam.backend.scripted import ScriptedBackend
from docteam.backend.session import ReplayBackend, record_and_replay
from docteam.errors import ReplayMissError


def chat(text, tag="classify"):
    return ChatRequest(system="System", messages=(Message("user", text),), tag=tag)


@pytest.fixture
def session(tmp_path):
    path = tmp_path / "session.jsonl"
    backend = record_and_replay(path, ScriptedBackend.from_responses(["one", "two"]))
    backend.complete(chat("first"))
    backend.complete(chat("second", tag="recruit"))

    return path


class TestSessionRecorder:
    def test_lines(self, session):
        lines = [json.loads(line) for line in session.read_text().splitlines()]

        assert [line["response_text"] for line in lines] == ["one", "two"]
        assert [line["tag"] for line in lines] == ["classify", "recruit"]
        assert lines[0]["endpoint"] == "scripted"
        assert lines[0]["model"] == "scripted"
        assert lines[0]["completion_chars"] == 3

    def test_truncates(self, session):
        record_and_replay(session, ScriptedBackend.from_responses([]))

        assert session.read_text() == ""

    def test_records_cache_hits(self, tmp_path):
        cache = ResponseCache()
        ScriptedBackend.from_responses(["one"], cache=cache).complete(chat("first"))
        path = tmp_path / "warm.jsonl"
        backend = record_and_replay(
            path, ScriptedBackend.from_responses([], cache=cache)
        )

        assert backend.complete(chat("first")).from_cache
        assert json.loads(path.read_text())["from_cache"] is True
        assert record_and_replay(path).complete(chat("first")).text == "one"

    def test_returns_backend(self, tmp_path):
        backend = ScriptedBackend.from_responses([])

        assert record_and_replay(tmp_path / "s.jsonl", backend) is backend
        assert backend.recorder is not None


class TestReplayBackend:
    def test_replay(self, session):
        backend = record_and_replay(session)

        assert isinstance(backend, ReplayBackend)
        assert backend.complete(chat("second")).text == "two"
        assert backend.complete(chat("first")).text == "one"
        assert backend.endpoint_id == "scripted"
        assert backend.snapshot_stats().calls == 2

    def test_miss(self, session):
        with pytest.raises(ReplayMissError):
            ReplayBackend(session).complete(chat("third"))

    def test_other_model_misses(self, session):
        backend = ReplayBackend(session, model="gpt-4o-mini")

        with pytest.raises(ReplayMissError):
            backend.complete(chat("first"))

    def test_repeated_request(self, tmp_path):
        path = tmp_path / "session.jsonl"
        recording = record_and_replay(path, ScriptedBackend.from_responses(["a", "b"]))
        recording.complete(chat("same"))
        recording.complete(chat("same"))

        backend = ReplayBackend(path)

        assert [backend.complete(chat("same")).text for _ in range(3)] == [
            "a",
            "b",
            "b",
        ]

    def test_unknown_endpoint(self, tmp_path):
        path = tmp_path / "session.jsonl"
        path.write_text(
            json.dumps({"request_hash": "h", "response_text": "x"}) + "\n",
            encoding="utf-8",
        )

        with pytest.raises(ValueError):
            ReplayBackend(path)

        assert ReplayBackend(path, endpoint_id="e", model="m").model == "m"
