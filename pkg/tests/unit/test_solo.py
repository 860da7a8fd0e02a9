import random
from unittest.mock import patch

import pytest

from docteam.query import OPTION_LETTERS
from docteam.solo import (
    Exemplar,
    load_exemplars,
    run_solo,
    select_exemplars,
    shuffle_permutation,
    shuffled_options,
    solve_cot,
    solve_cot_sc,
    solve_direct,
    solve_er,
    solve_medprompt_lite,
    unshuffle,
)
from docteam.transcript import EventKind


@pytest.fixture
def exemplars(package_data_dir):
    return load_exemplars(package_data_dir / "exemplars.json")


@pytest.fixture
def pool():
    return [
        Exemplar(
            "Which drug treats malaria?", {"A": "Chloroquine", "B": "Aspirin"}, "A"
        ),
        Exemplar(
            "Which drug reverses the effect of warfarin?",
            {"A": "Protamine", "B": "Vitamin K"},
            "B",
        ),
        Exemplar("Is smoking a risk factor for lung cancer?", answer="yes"),
    ]


def shown_letter(answer, seed, index):
    """The letter under which an original option is shown in a shuffle."""

    permutation = shuffle_permutation("ABCD", seed, index)

    return OPTION_LETTERS[permutation.index(answer)]


class TestExemplar:
    def test_canonical_answer(self):
        exemplar = Exemplar("Question?", {"A": "One", "B": "Two"}, "(b)")

        assert exemplar.answer == "B"

    def test_closed_answer(self):
        assert Exemplar("Question?", answer="Yes").answer == "yes"

    def test_answer_not_an_option(self):
        with pytest.raises(ValueError):
            Exemplar("Question?", {"A": "One", "B": "Two"}, "C")

    def test_letter_without_options(self):
        with pytest.raises(ValueError):
            Exemplar("Question?", answer="A")

    def test_no_answer(self):
        with pytest.raises(ValueError):
            Exemplar("Question?", {"A": "One"}, "")

    def test_load_exemplars(self, exemplars):
        assert len(exemplars) >= 3
        assert all(exemplar.rationale for exemplar in exemplars)

    def test_load_exemplars_not_a_list(self, tmp_path):
        path = tmp_path / "exemplars.json"
        path.write_text('{"question": "Q?"}', encoding="utf-8")

        with pytest.raises(ValueError):
            load_exemplars(path)


class TestSelectExemplars:
    def test_most_similar_first(self, pool):
        selected = select_exemplars("Which drug reverses heparin?", pool, 2)

        assert [exemplar.answer for exemplar in selected] == ["B", "A"]

    def test_ties_keep_pool_order(self, pool):
        assert select_exemplars("Unrelated words", pool, 3) == pool

    def test_more_than_pool(self, pool):
        assert len(select_exemplars("drug", pool, 10)) == 3


class TestShuffles:
    def test_first_keeps_order(self):
        assert shuffle_permutation("ABCD", 7, 0) == ("A", "B", "C", "D")

    def test_seeded(self):
        assert shuffle_permutation("ABCD", 7, 3) == shuffle_permutation("ABCD", 7, 3)
        assert sorted(shuffle_permutation("ABCD", 7, 3)) == ["A", "B", "C", "D"]

    def test_shuffled_options(self, mcq_query):
        options = shuffled_options(mcq_query.options, ("C", "A", "D", "B"))

        assert options["A"] == "Protamine sulfate"
        assert options["D"] == "Idarucizumab"

    def test_unshuffle(self):
        assert unshuffle("A", ("C", "A", "D", "B")) == "C"
        assert unshuffle("E", ("C", "A", "D", "B")) is None
        assert unshuffle("yes", ("C", "A")) is None

    def test_random_round_trip(self):
        rng = random.Random(0)

        for _ in range(500):
            keys = OPTION_LETTERS[: rng.randint(2, 10)]
            options = {key: f"option {key}" for key in keys}
            seed = rng.randrange(10_000)
            index = rng.randint(0, 8)

            permutation = shuffle_permutation(keys, seed, index)
            shown = shuffled_options(options, permutation)

            assert sorted(permutation) == list(keys)
            assert shuffle_permutation(keys, seed, 0) == tuple(keys)

            for key in keys:
                letter = OPTION_LETTERS[permutation.index(key)]

                assert unshuffle(letter, permutation) == key
                assert shown[letter] == options[key]


class TestSolveDirect:
    def test_zero_shot(self, mcq_query, scripted, consult):
        backend = scripted(["**Answer:** (C)"])
        consultation = consult(mcq_query, backend)

        with patch.object(backend, "_generate", wraps=backend._generate) as spy:
            outcome = solve_direct(consultation)

        request = spy.call_args.args[0]

        assert outcome.answer == "C"
        assert outcome.votes == {"medical-expert": ("C", None)}
        assert request.tag == "solo.answer"
        assert "**Explanation:**" not in request.text()

    def test_few_shot(self, mcq_query, scripted, consult, exemplars):
        backend = scripted(["**Answer:** (C)"])

        with patch.object(backend, "_generate", wraps=backend._generate) as spy:
            solve_direct(consult(mcq_query, backend), exemplars[:2])

        assert spy.call_args.args[0].text().count("**Question:**") == 3

    def test_fallback(self, closed_query, scripted, consult):
        consultation = consult(closed_query, scripted(["Hard to say."]))

        outcome = solve_direct(consultation)

        assert outcome.answer == "maybe"
        assert consultation.flags == ["answer-fallback"]

    def test_cot(self, mcq_query, scripted, consult, exemplars):
        backend = scripted(["Protamine binds heparin. **Answer:** (C)"])

        with patch.object(backend, "_generate", wraps=backend._generate) as spy:
            outcome = solve_cot(consult(mcq_query, backend), exemplars[:1])

        request = spy.call_args.args[0]

        assert outcome.answer == "C"
        assert request.tag == "solo.cot"
        assert "**Explanation:**" in request.text()
        assert "step by step" in request.text()


class TestSolveCotSc:
    def test_majority(self, mcq_query, scripted, consult):
        backend = scripted(["(C)", "(A)", "(C)", "no answer", "(A)"])
        consultation = consult(mcq_query, backend)

        outcome = solve_cot_sc(consultation, k=5)

        assert outcome.answer == "A"
        assert "sample-4" not in outcome.votes
        assert outcome.votes["sample-1"] == ("C", None)
        assert consultation.stats.calls == 5
        assert len(consultation.transcript.filter(kind=EventKind.OPINION)) == 5

    def test_distinct_seeds(self, mcq_query, scripted, consult):
        backend = scripted(["(C)", "(C)", "(C)"])

        with patch.object(backend, "_generate", wraps=backend._generate) as spy:
            solve_cot_sc(consult(mcq_query, backend, seed=4), k=3)

        assert [call.args[0].seed for call in spy.call_args_list] == [4, 5, 6]

    def test_no_answers(self, mcq_query, scripted, consult):
        consultation = consult(mcq_query, scripted(["?", "?"]))

        assert solve_cot_sc(consultation, k=2).answer == "A"
        assert "answer-fallback" in consultation.flags

    def test_k(self, mcq_query, scripted, consult):
        with pytest.raises(ValueError):
            solve_cot_sc(consult(mcq_query, scripted([])), k=0)


class TestSolveEr:
    def test_refinement_decides(self, mcq_query, scripted, consult):
        backend = scripted(["(A)", "(A)", "(B)", "Weighing the paths: **Answer:** (C)"])
        consultation = consult(mcq_query, backend)

        with patch.object(backend, "_generate", wraps=backend._generate) as spy:
            outcome = solve_er(consultation, m=3)

        refine = spy.call_args.args[0]

        assert outcome.answer == "C"
        assert consultation.stats.calls == 4
        assert refine.tag == "solo.er.refine"
        assert "Reasoning path 3:\n(B)" in refine.text()
        assert consultation.transcript[-1].turn == 1

    def test_m(self, mcq_query, scripted, consult):
        with pytest.raises(ValueError):
            solve_er(consult(mcq_query, scripted([])), m=0)


class TestSolveMedpromptLite:
    def test_answers_are_unshuffled(self, mcq_query, scripted, consult, pool):
        backend = scripted(
            [f"**Answer:** ({shown_letter('C', 0, index)})" for index in range(5)]
        )
        consultation = consult(mcq_query, backend)

        outcome = solve_medprompt_lite(consultation, pool, s=5, shot_count=1)

        assert outcome.answer == "C"
        assert set(outcome.votes.values()) == {("C", None)}
        assert consultation.stats.calls == 5

    def test_shows_most_similar_exemplar(self, mcq_query, scripted, consult, pool):
        backend = scripted(["**Answer:** (C)"])

        with patch.object(backend, "_generate", wraps=backend._generate) as spy:
            solve_medprompt_lite(consult(mcq_query, backend), pool, s=1, shot_count=1)

        request = spy.call_args.args[0]

        assert "warfarin" in request.text()
        assert "malaria" not in request.text()

    def test_closed_question(self, closed_query, scripted, consult):
        backend = scripted(["Yes.", "**Answer:** yes", "No."])

        outcome = solve_medprompt_lite(consult(closed_query, backend), s=3)

        assert outcome.answer == "yes"

    def test_s(self, mcq_query, scripted, consult):
        with pytest.raises(ValueError):
            solve_medprompt_lite(consult(mcq_query, scripted([])), s=0)


class TestRunSolo:
    @pytest.mark.parametrize(
        "strategy, calls",
        [
            ("zero-shot", 1),
            ("few-shot", 1),
            ("cot", 1),
            ("cot-sc", 5),
            ("er", 4),
            ("medprompt", 5),
        ],
    )
    def test_calls(self, strategy, calls, mcq_query, scripted, consult, exemplars):
        backend = scripted(["**Answer:** (C)"] * calls)
        consultation = consult(mcq_query, backend)

        run_solo(consultation, strategy, exemplars)

        assert consultation.stats.calls == calls
        assert backend.remaining == 0

    def test_configured_samples(self, mcq_query, scripted, consult):
        consultation = consult(mcq_query, scripted(["(C)"] * 2), sc_samples=2)

        assert run_solo(consultation, "cot-sc").answer == "C"
        assert consultation.stats.calls == 2

    def test_unknown_strategy(self, mcq_query, scripted, consult):
        with pytest.raises(ValueError):
            run_solo(consult(mcq_query, scripted([])), "tree-of-thought")
