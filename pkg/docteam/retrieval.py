"""Lexical retrieval over a local corpus of reference snippets."""

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.metrics.pairwise import linear_kernel

from docteam.text import lexical_tokens

logger = logging.getLogger(__name__)

KNOWLEDGE_HEADER = "Reference knowledge:"


@dataclass(frozen=True)
class Snippet:
    """A document from the corpus."""

    doc_id: str
    text: str
    source: str
    """Where the text comes from, shown with the text in prompts."""

    score: float = field(default=0.0, compare=False)
    """The retrieval score, for snippets returned by :func:`retrieve`."""

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError(f"Snippet {self.doc_id} has no text.")


class CorpusIndex:
    """
    A tf-idf index over snippets, with cosine scoring. Immutable after it is built,
    and safe to read from concurrently.

    Args:
        snippets: The documents to index, with unique ``doc_id``.
    """

    def __init__(self, snippets: Sequence[Snippet] = ()) -> None:
        self.snippets = tuple(snippets)

        doc_ids = [snippet.doc_id for snippet in self.snippets]

        if len(set(doc_ids)) != len(doc_ids):
            raise ValueError("Snippet doc ids must be unique.")

        self._vectorizer: Optional[TfidfVectorizer] = None
        self._matrix = None

        if self.snippets:
            vectorizer = TfidfVectorizer(analyzer=lexical_tokens)

            try:
                self._matrix = vectorizer.fit_transform(
                    [snippet.text for snippet in self.snippets]
                )
                self._vectorizer = vectorizer
            except ValueError:
                logger.warning("Corpus has no indexable tokens, all scores are zero")

    def __len__(self) -> int:
        return len(self.snippets)

    @property
    def vocabulary(self) -> dict[str, int]:
        if self._vectorizer is None:
            return {}

        return dict(self._vectorizer.vocabulary_)

    def scores(self, query_text: str) -> np.ndarray:
        """The cosine similarity of the query to every snippet, in index order."""

        if self._vectorizer is None:
            return np.zeros(len(self.snippets))

        query_vector = self._vectorizer.transform([query_text])

        return linear_kernel(query_vector, self._matrix).ravel()


def index_corpus(directory: Union[str, Path]) -> CorpusIndex:
    """
    Index a directory of UTF-8 ``.txt`` files, one document per file.

    Args:
        directory: The corpus directory.

    Returns:
        The index. Documents are identified by file stem and indexed in file name
        order. Files without text are skipped.

    Raises:
        NotADirectoryError: If the directory does not exist or is not a directory.
    """

    path = Path(directory)

    if not path.is_dir():
        raise NotADirectoryError(f"Corpus directory {path} is not a directory.")

    snippets = []

    for file in sorted(path.glob("*.txt")):
        text = file.read_text(encoding="utf-8")

        if not text.strip():
            logger.info("Skipping empty corpus file %s", file.name)
            continue

        snippets.append(Snippet(doc_id=file.stem, text=text.strip(), source=file.name))

    return CorpusIndex(snippets)


def retrieve(index: CorpusIndex, query_text: str, k: int) -> list[Snippet]:
    """
    Get the snippets most similar to a query.

    Args:
        index: The index.
        query_text: The query.
        k: The number of snippets to return.

    Returns:
        At most ``k`` snippets, by descending score and then by ``doc_id``.

    Raises:
        ValueError: If ``k`` is negative.
    """

    if k < 0:
        raise ValueError(f"Cannot retrieve {k} snippets.")

    if k == 0 or len(index) == 0:
        return []

    scores = index.scores(query_text)
    ranked = sorted(
        range(len(index)), key=lambda i: (-scores[i], index.snippets[i].doc_id)
    )

    return [
        dataclasses.replace(index.snippets[i], score=float(scores[i]))
        for i in ranked[:k]
    ]


def augment_prompt(prompt: str, snippets: Sequence[Snippet]) -> str:
    """
    Prepend snippets to a prompt, under a ``Reference knowledge`` block.

    Augmenting an augmented prompt adds a second block.
    """

    if not snippets:
        return prompt

    lines = [KNOWLEDGE_HEADER]
    lines += [f"- {snippet.text} (source: {snippet.source})" for snippet in snippets]

    return "\n".join(lines) + "\n\n" + prompt
