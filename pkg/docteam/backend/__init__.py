from .base import Backend, ChatRequest, ChatResponse, Message, estimate_cost
from .cache import ResponseCache
from .factory import create_backend
from .http import HttpBackend
from .scripted import ScriptedBackend, ScriptedScript, ScriptEntry
from .session import ReplayBackend, SessionRecorder, record_and_replay
