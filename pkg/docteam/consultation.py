import threading
import time
from typing import Any, Callable, Mapping, Optional, Sequence

from docteam.agent import AgentSpec, ExpertRoster
from docteam.backend.base import Backend, ChatRequest, ChatResponse, Message
from docteam.config import RunConfig
from docteam.decision import CallStats, Decision
from docteam.parse.answer import extract_answer
from docteam.parse.outcome import ParseOutcome
from docteam.process.prompt_processor import (
    InjectionSite,
    PromptDraft,
    PromptProcessorGroup,
)
from docteam.query import ComplexityLevel, Query
from docteam.transcript import Report, Transcript

ANSWER_FALLBACK = "answer-fallback"


class MetaData:
    """
    Information on a consultation that steps store for later steps, e.g. the
    confidence of the complexity classification. Keys cannot be overwritten, so that
    steps do not accidentally interfere with each other.

    Args:
        items: A ``dict`` of items to initialize with.
    """

    def __init__(self, items: Optional[dict] = None) -> None:
        self._items = dict(items or {})

    def __getitem__(self, key: str) -> Optional[Any]:
        """Get an item, with ``None`` as default."""
        return self._items.get(key, None)

    def __setitem__(self, key: str, value: Any) -> None:
        """
        Add an item.

        Raises:
            RuntimeError: When the key is already present.
        """

        if key in self._items:
            raise RuntimeError(
                f"Key {key} already present in {self.__class__}, cannot overwrite "
                f"(read only)"
            )

        self._items[key] = value

    def __contains__(self, key: str) -> bool:
        return key in self._items


class Consultation:  # pylint: disable=R0902
    """
    Everything that happens while one query is answered: the requests that are sent
    on its behalf, the transcript, the flags that were raised, and the calls that
    were spent. A consultation is used by one query only, so that the stats stay
    exact when queries are answered concurrently on a shared backend.

    Args:
        query: The query.
        backend: The backend to send requests to.
        config: The run configuration.
        processors: The prompt processors to apply at the injection sites.
        clock: A monotonic clock, in seconds.
        metadata: Items to initialize the metadata with.
    """

    def __init__(  # pylint: disable=R0913
        self,
        query: Query,
        backend: Backend,
        config: Optional[RunConfig] = None,
        processors: Optional[PromptProcessorGroup] = None,
        clock: Callable[[], float] = time.perf_counter,
        metadata: Optional[dict] = None,
    ) -> None:
        self.query = query
        self.backend = backend
        self.config = config or RunConfig()
        self.processors = processors or PromptProcessorGroup()
        self.transcript = Transcript()
        self.metadata = MetaData(metadata)
        self.flags: list[str] = []

        self._clock = clock
        self._started = clock()
        self._stats = CallStats()
        self._lock = threading.Lock()

    @property
    def stats(self) -> CallStats:
        with self._lock:
            return self._stats

    def flag(self, flag: str) -> None:
        """Raise a flag on the consultation. Flags are kept once, in order."""

        if flag not in self.flags:
            self.flags.append(flag)

    def prepare(
        self, text: str, site: InjectionSite, agent: Optional[AgentSpec] = None
    ) -> str:
        """
        Pass a prompt through the prompt processors.

        Args:
            text: The prompt.
            site: Where in the consultation the prompt is used.
            agent: The agent the prompt is for, if any.

        Returns:
            The processed prompt.
        """

        draft = PromptDraft(text=text, site=site, query=self.query, agent=agent)
        self.processors.process(draft)

        return draft.text

    def request(  # pylint: disable=R0913
        self,
        tag: str,
        prompt: str,
        system: str,
        step: str,
        history: Sequence[Message] = (),
        temperature: Optional[float] = None,
        seed: Optional[int] = None,
    ) -> ChatRequest:
        """
        Build a request about the query. The query's attachment, if any, is sent with
        the prompt.

        Args:
            tag: The pipeline step that issues the request, e.g. ``"mdt.turn"``.
            prompt: The user prompt.
            system: The system prompt.
            step: The temperature step, e.g. ``"agent"``.
            history: Earlier messages of the conversation.
            temperature: Overrides the temperature of the step.
            seed: Overrides the configured seed.

        Returns:
            The request.
        """

        return ChatRequest(
            system=system,
            messages=tuple(history)
            + (Message("user", prompt, attachment=self.query.attachment),),
            temperature=(
                self.config.temperature(step) if temperature is None else temperature
            ),
            max_tokens=self.config.max_tokens_for(tag),
            seed=self.config.seed if seed is None else seed,
            tag=tag,
        )

    def _account(self, response: ChatResponse) -> None:
        if response.from_cache:
            return

        with self._lock:
            self._stats = self._stats + CallStats(
                calls=1,
                prompt_chars=response.prompt_chars,
                completion_chars=response.completion_chars,
                estimated_cost=response.estimated_cost,
            )

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.backend.complete(request)
        self._account(response)

        return response

    def complete_many(self, requests: Sequence[ChatRequest]) -> list[ChatResponse]:
        """Complete independent requests, concurrently if the backend allows it."""

        responses = self.backend.complete_many(requests)

        for response in responses:
            self._account(response)

        return responses

    def extract(self, text: str) -> ParseOutcome[str]:
        """Extract an answer to the query from model output."""

        return extract_answer(text, self.query.option_keys, self.query.options)

    def resolve(self, outcome: ParseOutcome[str]) -> tuple[str, tuple[str, ...]]:
        """
        Get an answer from an extraction outcome, using the fallback answer (and
        raising the ``answer-fallback`` flag) when extraction failed.

        Returns:
            The answer, and the flags for the event it was extracted from.
        """

        if outcome.value is not None:
            return outcome.value, ()

        self.flag(ANSWER_FALLBACK)

        return self.query.fallback_answer(), (ANSWER_FALLBACK,)

    def conclude(  # pylint: disable=R0913
        self,
        answer: str,
        method: str,
        complexity: ComplexityLevel,
        votes: Optional[Mapping[str, tuple[str, Optional[float]]]] = None,
        entropy_trace: Sequence[tuple[int, float]] = (),
        reports: Sequence[Report] = (),
        roster: Optional[ExpertRoster] = None,
    ) -> Decision:
        """
        Wrap up the consultation into a decision.

        Raises:
            ValueError: If the answer is not a valid answer to the query.
        """

        if answer not in self.query.option_keys:
            raise ValueError(
                f"Answer {answer} is not one of {', '.join(self.query.option_keys)}."
            )

        elapsed = self._clock() - self._started if self.config.record_timing else 0.0

        return Decision(
            answer=answer,
            method=method,
            complexity=complexity,
            votes=dict(votes or {}),
            entropy_trace=tuple(entropy_trace),
            stats=self.stats,
            elapsed=max(0.0, elapsed),
            flags=tuple(self.flags),
            transcript=self.transcript,
            reports=tuple(reports),
            roster=roster,
        )
