import docteam.backend
import docteam.parse
import docteam.process

from .agent import AgentSpec, CommunicationGraph, ExpertRoster, StructureKind, TeamSpec
from .config import RunConfig, Settings, load_settings
from .consultation import Consultation, MetaData
from .decision import CallStats, Decision
from .orchestrator import Orchestrator
from .query import ComplexityLevel, Query
from .transcript import EventKind, Report, Transcript, TranscriptEvent
