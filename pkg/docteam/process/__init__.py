from .augmenter import KnowledgeInitializer, RetrievalAugmenter
from .prompt_processor import (
    InjectionSite,
    PromptDraft,
    PromptProcessor,
    PromptProcessorGroup,
)
