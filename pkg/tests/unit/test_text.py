import pytest

from docteam.text import (
    CasefoldString,
    CollapseWhitespace,
    ReplaceNonAsciiCharacters,
    ReplaceValueRegexp,
    find_mention,
    lexical_tokens,
    normalize,
    roles_match,
    token_overlap,
)


class TestStringModifiers:
    def test_casefold(self):
        assert CasefoldString().process("Cardiologist") == "cardiologist"

    def test_non_ascii(self):
        assert ReplaceNonAsciiCharacters().process("Renée") == "Renee"

    def test_regexp(self):
        modifier = ReplaceValueRegexp(r"\(lead\)", "")

        assert modifier.process("Internist (lead)") == "Internist "

    def test_collapse_whitespace(self):
        assert CollapseWhitespace().process("  Emergency \n Physician ") == (
            "Emergency Physician"
        )


class TestRoles:
    def test_normalize(self):
        assert normalize("**Dr. Smith, Cardiologist**") == "dr smith cardiologist"
        assert normalize("Orthopédiste") == "orthopediste"

    @pytest.mark.parametrize(
        "role, mention, expected",
        [
            ("Cardiologist", "cardiologist", True),
            ("Pediatric Cardiologist", "Cardiologist", True),
            ("Cardiologist", "**Pediatric Cardiologist**", True),
            ("Cardiologist", "Cardiology", False),
            ("Cardiologist", "", False),
        ],
    )
    def test_roles_match(self, role, mention, expected):
        assert roles_match(role, mention) is expected

    def test_find_mention(self):
        text = "Yes. I want to talk to the Nephrologist, then the cardiologist."

        assert 0 <= find_mention(text, "Nephrologist") < find_mention(
            text, "Cardiologist"
        )
        assert find_mention(text, "Radiologist") == -1
        assert find_mention(text, "") == -1


class TestLexical:
    def test_tokens(self):
        assert lexical_tokens("Heparin-induced, thrombocytopenia_2") == [
            "heparin",
            "induced",
            "thrombocytopenia",
            "2",
        ]

    def test_overlap(self):
        assert token_overlap("heparin reversal", "reversal of heparin") == 2 / 3
        assert token_overlap("heparin", "warfarin") == 0.0
        assert token_overlap("", "warfarin") == 0.0
