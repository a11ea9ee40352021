"""Scorer pinned against an independent brute-force count on crafted fixture
pairs, plus ablation summary math."""

from pathlib import Path

import numpy as np
import pytest

from metatagger import data, evaluation

FIXTURES = Path(__file__).parent / "fixtures" / "scorer"

# (name, task, expected accuracy as exact fraction)
SCORER_PAIRS = [
    ("pair1", "xpos", (4, 4)),
    ("pair2", "xpos", (3, 4)),
    ("pair3", "feats", (2, 3)),
    ("pair4", "xpos", (4, 5)),
    ("pair5", "xpos", (2, 4)),
]


def brute_force_accuracy(gold_text, pred_text, task):
    """Independent counting: minimal line-level parse, no shared code with
    the package scorer."""
    col = {"upos": 3, "xpos": 4, "feats": 5}[task]

    def columns(text):
        out = []
        for line in text.split("\n"):
            if not line or line.startswith("#"):
                continue
            cells = line.split("\t")
            if not cells[0].isdigit():  # range or empty-node line
                continue
            value = cells[col]
            if task == "feats" and value != "_":
                value = "|".join(sorted(value.split("|")))
            out.append(value)
        return out

    g, p = columns(gold_text), columns(pred_text)
    assert len(g) == len(p)
    return sum(1 for a, b in zip(g, p) if a == b), len(g)


class TestScorerFixtures:
    @pytest.mark.parametrize("name,task,expected", SCORER_PAIRS)
    def test_pair_matches_brute_force(self, name, task, expected):
        gold_text = (FIXTURES / f"{name}_gold.conllu").read_text()
        pred_text = (FIXTURES / f"{name}_pred.conllu").read_text()
        report = evaluation.score(data.parse_conllu(gold_text),
                                  data.parse_conllu(pred_text), task)
        bf_correct, bf_total = brute_force_accuracy(gold_text, pred_text, task)
        assert (report.correct, report.total) == (bf_correct, bf_total)
        assert (report.correct, report.total) == expected

    def test_pair3_reversed_feats_is_correct(self):
        gold = data.parse_conllu((FIXTURES / "pair3_gold.conllu").read_text())
        pred = data.parse_conllu((FIXTURES / "pair3_pred.conllu").read_text())
        report = evaluation.score(gold, pred, "feats")
        # token 1: same pairs, different order in the raw files
        assert ("Case=Nom|Number=Sing", "Case=Nom|Number=Sing") \
            in report.confusion


def tiny_gold():
    text = ("1\ta\ta\tX\tA\t_\t0\t_\t_\t_\n"
            "2\tb\tb\tX\tB\t_\t0\t_\t_\t_\n\n"
            "1\tc\tc\tX\tC\t_\t0\t_\t_\t_\n")
    return data.parse_conllu(text)


class TestScoreSemantics:
    def test_gold_vs_gold_is_one(self):
        gold = tiny_gold()
        assert evaluation.score(gold, gold, "xpos").accuracy == 1.0

    def test_tag_lists_accepted(self):
        gold = tiny_gold()
        report = evaluation.score(gold, [["A", "B"], ["WRONG"]], "xpos")
        assert report.correct == 2 and report.total == 3

    def test_sentence_order_agnostic_counting(self):
        gold = tiny_gold()
        fwd = evaluation.score(gold, [["A", "X"], ["C"]], "xpos")
        rev = evaluation.score(gold[::-1], [["C"], ["A", "X"]], "xpos")
        assert fwd.accuracy == rev.accuracy

    def test_sentence_count_mismatch(self):
        gold = tiny_gold()
        with pytest.raises(evaluation.AlignmentError):
            evaluation.score(gold, [["A", "B"]], "xpos")

    def test_token_count_mismatch(self):
        gold = tiny_gold()
        with pytest.raises(evaluation.AlignmentError, match="sentence 1"):
            evaluation.score(gold, [["A"], ["C"]], "xpos")

    def test_report_lines_render(self):
        gold = tiny_gold()
        report = evaluation.score(gold, [["A", "A"], ["C"]], "xpos")
        text = "\n".join(report.lines())
        assert "accuracy: 0.6667" in text
        assert "B -> A" in text


class TestAblationMath:
    def test_mean_stdev_basic(self):
        m, sd = evaluation.mean_stdev([1.0, 2.0, 3.0])
        assert m == 2.0
        assert abs(sd - 1.0) < 1e-12

    def test_single_value_stdev_zero(self):
        m, sd = evaluation.mean_stdev([0.7])
        assert (m, sd) == (0.7, 0.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            evaluation.mean_stdev([])

    def test_report_rows(self):
        rows = evaluation.ablation_report(
            {"char": [0.9, 0.92], "word": [0.8]})
        assert [r.config for r in rows] == ["char", "word"]
        assert rows[0].n_seeds == 2
        assert abs(rows[0].mean - 0.91) < 1e-12
        assert rows[1].stdev == 0.0

    def test_csv_row_count_and_shape(self):
        rows = evaluation.ablation_report({"a": [0.5, 0.6], "b": [0.7]})
        csv = evaluation.render_csv(rows, "xpos")
        lines = csv.strip().split("\n")
        assert lines[0] == "config,seed,task,accuracy"
        assert len(lines) == 4
        assert lines[1] == "a,0,xpos,0.500000"

    def test_table_renders(self):
        rows = evaluation.ablation_report({"meta": [0.95, 0.97]})
        table = evaluation.render_table(rows)
        assert "meta" in table and "96.00" in table


class TestPairedT:
    def test_hand_computed_case(self):
        xs = [1.0, 2.0, 3.0, 4.0]
        ys = [0.0, 1.0, 1.0, 2.0]
        t, p = evaluation.paired_t(xs, ys)
        # diffs [1,1,2,2]: mean 1.5, sd sqrt(1/3), t = 1.5/(sd/2) = 3*sqrt(3)
        assert abs(t - 3 * np.sqrt(3)) < 1e-9
        assert 0.012 < p < 0.015

    def test_antisymmetric(self):
        xs = [0.5, 0.6, 0.9]
        ys = [0.4, 0.7, 0.5]
        t1, p1 = evaluation.paired_t(xs, ys)
        t2, p2 = evaluation.paired_t(ys, xs)
        assert abs(t1 + t2) < 1e-12
        assert abs(p1 - p2) < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            evaluation.paired_t([1, 2], [1])

    def test_too_few_pairs(self):
        with pytest.raises(ValueError):
            evaluation.paired_t([1], [2])
