from typing import Iterable, Optional

from docteam.process.prompt_processor import InjectionSite, PromptDraft, PromptProcessor
from docteam.prompts import format_options
from docteam.retrieval import CorpusIndex, augment_prompt, retrieve


class RetrievalAugmenter(PromptProcessor):
    """
    Prepends snippets retrieved for the query to prompts at some injection sites.

    Args:
        index: The corpus to retrieve from.
        k: The number of snippets to prepend.
        sites: The sites to augment. Defaults to the classification prompt and the
            first prompt of every expert.
    """

    def __init__(
        self,
        index: CorpusIndex,
        k: int = 3,
        sites: Optional[Iterable[InjectionSite]] = None,
    ) -> None:
        self.index = index
        self.k = k
        self.sites = frozenset(
            sites or (InjectionSite.CLASSIFICATION, InjectionSite.EXPERT_PROMPT)
        )

    def process(self, draft: PromptDraft) -> None:
        if draft.site not in self.sites:
            return

        query = draft.query
        query_text = "\n".join(
            part
            for part in (query.context, query.question, format_options(query.options))
            if part
        )

        snippets = retrieve(self.index, query_text, self.k)
        draft.text = augment_prompt(draft.text, snippets)


class KnowledgeInitializer(PromptProcessor):
    """
    Extends the system prompt of every agent with snippets retrieved for its role
    and description.

    Args:
        index: The corpus to retrieve from.
        k: The number of snippets per agent.
    """

    def __init__(self, index: CorpusIndex, k: int = 3) -> None:
        self.index = index
        self.k = k

    def process(self, draft: PromptDraft) -> None:
        if draft.site is not InjectionSite.AGENT_SYSTEM or draft.agent is None:
            return

        snippets = retrieve(
            self.index, f"{draft.agent.role} {draft.agent.description}", self.k
        )

        if snippets:
            knowledge = "\n".join(f"- {snippet.text}" for snippet in snippets)
            draft.text += f"\n\nYou know the following:\n{knowledge}"
