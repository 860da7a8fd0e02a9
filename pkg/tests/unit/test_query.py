import pytest
from frozendict import frozendict

from docteam.query import (
    CLOSED_ANSWERS,
    ComplexityLevel,
    Query,
    canonical_answer,
    validate_query,
)


class TestCanonicalAnswer:
    def test_letter(self):
        assert canonical_answer("(b)") == "B"
        assert canonical_answer(" C. ") == "C"
        assert canonical_answer("**D**") == "D"

    def test_closed(self):
        assert canonical_answer("Yes") == "yes"
        assert canonical_answer("MAYBE") == "maybe"

    def test_not_an_answer(self):
        assert canonical_answer("Aortic dissection") is None
        assert canonical_answer("") is None


class TestComplexityLevel:
    def test_order(self):
        assert ComplexityLevel.LOW < ComplexityLevel.MODERATE < ComplexityLevel.HIGH
        assert max(ComplexityLevel) is ComplexityLevel.HIGH

    def test_rank(self):
        assert [level.rank for level in ComplexityLevel] == [0, 1, 2]


class TestQuery:
    def test_options_frozen(self):
        query = Query(id="q", question="Which?", options={"A": "x", "B": "y"})

        assert isinstance(query.options, frozendict)

    def test_gold_canonical(self):
        query = Query(id="q", question="Which?", options={"A": "x"}, gold="(a)")

        assert query.gold == "A"

    def test_option_keys(self, mcq_query, closed_query):
        assert mcq_query.option_keys == ("A", "B", "C", "D")
        assert closed_query.option_keys == CLOSED_ANSWERS

    def test_fallback_answer(self, mcq_query, closed_query):
        assert mcq_query.fallback_answer() == "A"
        assert closed_query.fallback_answer() == "maybe"

    def test_dict_with_image_bytes(self, mcq_query):
        query = Query(
            id="xray",
            question="What does the image show?",
            options={"A": "Pneumonia", "B": "Normal"},
            attachment=b"\x89PNG",
        )

        data = query.to_dict()

        assert data["attachment"] == {"base64": "iVBORw=="}
        assert Query.from_dict(data) == query
        assert Query.from_dict(mcq_query.to_dict()) == mcq_query


class TestValidateQuery:
    def test_valid(self, mcq_query, closed_query):
        assert validate_query(mcq_query) == []
        assert validate_query(closed_query) == []

    def test_empty_question(self):
        query = Query(id="q", question="  ", options={"A": "x", "B": "y"})

        assert validate_query(query) == ["empty question"]

    def test_non_contiguous(self):
        query = Query(id="q", question="Which?", options={"A": "x", "C": "y"})

        assert validate_query(query) == ["non-contiguous letters"]

    def test_lowercase_letters(self):
        query = Query(id="q", question="Which?", options={"a": "x", "b": "y"})

        assert "option letters must be single uppercase letters" in validate_query(
            query
        )

    def test_gold_not_an_option(self):
        query = Query(id="q", question="Which?", options={"A": "x", "B": "y"}, gold="E")

        assert validate_query(query) == ["gold not an option"]

    def test_closed_gold(self):
        query = Query(id="q", question="Does it?", gold="B")

        assert validate_query(query) == ["gold not an option"]
