from pathlib import Path

import pytest
from frozendict import frozendict

from docteam.agent import (
    AgentSpec,
    CommunicationGraph,
    ExpertRoster,
    StructureKind,
    TeamSpec,
)
from docteam.backend.scripted import ScriptedBackend, ScriptedScript
from docteam.config import RunConfig
from docteam.consultation import Consultation
from docteam.harness import load_dataset
from docteam.orchestrator import Orchestrator
from docteam.query import Query
from docteam.solo import load_exemplars

DATA_DIR = Path(__file__).parent.parent / "data"
PACKAGE_DATA_DIR = Path(__file__).parent.parent.parent / "docteam" / "data"


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def package_data_dir():
    return PACKAGE_DATA_DIR


@pytest.fixture
def mcq_query():
    return Query(
        id="heparin",
        question="Which drug reverses the effect of heparin?",
        options=frozendict(
            {
                "A": "Vitamin K",
                "B": "Idarucizumab",
                "C": "Protamine sulfate",
                "D": "Andexanet alfa",
            }
        ),
        gold="C",
    )


@pytest.fixture
def closed_query():
    return Query(
        id="aspirin",
        question="Does aspirin reduce the risk of a second myocardial infarction?",
        gold="yes",
    )


@pytest.fixture
def run_config():
    return RunConfig()


@pytest.fixture
def cardiologist():
    return AgentSpec(
        agent_id="cardiologist",
        role="Cardiologist",
        description="Focuses on the heart.",
    )


@pytest.fixture
def nephrologist():
    return AgentSpec(
        agent_id="nephrologist",
        role="Nephrologist",
        description="Focuses on the kidneys.",
    )


@pytest.fixture
def pharmacologist():
    return AgentSpec(
        agent_id="clinical-pharmacologist",
        role="Clinical Pharmacologist",
        description="Reviews drugs.",
    )


@pytest.fixture
def mdt_roster(cardiologist, nephrologist, pharmacologist):
    graph = CommunicationGraph(
        peer_edges=frozenset({frozenset({"cardiologist", "nephrologist"})}),
        directed_edges=frozenset(
            {
                ("cardiologist", "clinical-pharmacologist"),
                ("nephrologist", "clinical-pharmacologist"),
            }
        ),
    )

    return ExpertRoster(
        agents=(cardiologist, nephrologist, pharmacologist),
        kind=StructureKind.MDT,
        graph=graph,
    )


@pytest.fixture
def ict_roster():
    emergency = AgentSpec(
        agent_id="emergency-physician", role="Emergency Physician", is_lead=True
    )
    radiologist = AgentSpec(agent_id="radiologist", role="Radiologist")
    internist = AgentSpec(agent_id="internist", role="Internist", is_lead=True)

    return ExpertRoster(
        agents=(emergency, radiologist, internist),
        kind=StructureKind.ICT,
        teams=(
            TeamSpec(
                name="Triage Team",
                members=(emergency, radiologist),
                lead="emergency-physician",
                position=0,
            ),
            TeamSpec(
                name="Decision Team", members=(internist,), lead="internist", position=1
            ),
        ),
    )


@pytest.fixture
def scripted():
    """Make a scripted backend from a list of responses, or from script data."""

    def make(script, **kwargs):
        if isinstance(script, list) and all(isinstance(s, str) for s in script):
            return ScriptedBackend.from_responses(script, **kwargs)

        return ScriptedBackend(ScriptedScript.from_data(script), **kwargs)

    return make


@pytest.fixture
def consult(run_config):
    """Start a consultation on a query with a backend."""

    def make(query, backend, **overrides):
        config = run_config.with_overrides(**overrides) if overrides else run_config
        return Consultation(query=query, backend=backend, config=config)

    return make


@pytest.fixture
def toy_script():
    return PACKAGE_DATA_DIR / "toy_script.json"


@pytest.fixture
def toy_dataset():
    return PACKAGE_DATA_DIR / "toy_dataset.jsonl"


@pytest.fixture
def toy_config():
    return PACKAGE_DATA_DIR / "config.toml"


@pytest.fixture
def toy_queries(toy_dataset):
    return load_dataset(toy_dataset)


@pytest.fixture
def toy_orchestrator(toy_script, run_config):
    """An orchestrator on the toy script, which always answers B."""

    return Orchestrator(
        ScriptedBackend(ScriptedScript.from_file(toy_script)),
        run_config,
        exemplars=load_exemplars(PACKAGE_DATA_DIR / "exemplars.json"),
    )
