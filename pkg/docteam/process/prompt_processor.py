from abc import ABC, abstractmethod
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from docteam.agent import AgentSpec
from docteam.query import Query


class InjectionSite(Enum):
    """The places in a consultation where a prompt can be modified."""

    CLASSIFICATION = "classification"
    """The complexity classification prompt."""

    EXPERT_PROMPT = "expert_prompt"
    """The first prompt an expert receives on a query."""

    AGENT_SYSTEM = "agent_system"
    """The system prompt that initializes an agent in its role."""


@dataclass
class PromptDraft:
    """A prompt on its way to the backend, that processors may rewrite."""

    text: str
    site: InjectionSite
    query: Query
    agent: Optional[AgentSpec] = None
    """The agent the prompt is for, if any."""


class PromptProcessor(ABC):  # pylint: disable=R0903
    """Something that rewrites a prompt."""

    @abstractmethod
    def process(self, draft: PromptDraft) -> None:
        """
        Process the prompt, by modifying ``draft.text`` in place.

        Args:
            draft: The prompt as input.
        """


class PromptProcessorGroup:
    """A named, ordered group of :class:`.PromptProcessor`, executed in order."""

    def __init__(self) -> None:
        self._processors: OrderedDict[str, PromptProcessor] = OrderedDict()

    def get_names(self) -> list[str]:
        return list(self._processors)

    def add_processor(self, name: str, processor: PromptProcessor) -> None:
        """
        Append a prompt processor to the group.

        Args:
            name: The name of the processor.
            processor: The processor.

        Raises:
            ValueError: If a processor with the same name is already in the group.
        """

        if name in self._processors:
            raise ValueError(f"A processor named {name} is already in the group.")

        self._processors[name] = processor

    def __len__(self) -> int:
        return len(self._processors)

    def process(self, draft: PromptDraft) -> None:
        """
        Process a prompt, by passing it to each processor in turn.

        Args:
            draft: The prompt to be processed.
        """

        for processor in self._processors.values():
            processor.process(draft)
