from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpusgen import generate_corpus, scan_corpus
from proofforge.census import proof_size_report, structure_census, tactic_census
from proofforge.model import ProofStep, SourceAnnotation, TacticCall, make_tactic
from proofforge.parser import parse_theory


def docs_of(texts):
    return [parse_theory(t, n) for n, t in texts.items()]


def test_tactic_census_counts_each_category():
    doc = parse_theory(
        'lemma a: "P"\nproof -\n'
        '  have x: "A" by blast\n  have y: "B" by (simp add: f)\n'
        '  have z: "C" unfolding g_def by auto\n  have w: "D" by force\n'
        '  have v: "E" done\n  show ?thesis sorry\nqed\n',
        "T",
    )
    c = tactic_census([doc])
    assert c.counts["blast"] == 1 and c.counts["simp"] == 1 and c.counts["auto"] == 1
    assert c.counts["other"] == 2  # force and done
    assert c.counts["sorry"] == 1
    assert c.unfolding_count == 1
    assert c.total == 6
    assert set(c.to_dict()) >= {"blast", "meson", "unfolding"}


def test_structure_census():
    doc = parse_theory(
        'lemma a: "P"\nproof -\n  obtain x where h: "Q x" sorry\n'
        '  have "R"\n  proof -\n    show ?thesis sorry\n  qed\n  show ?thesis sorry\nqed\n',
        "S",
    )
    s = structure_census([doc]).to_dict()
    assert s == {"have": 1, "show": 2, "obtain": 1, "proof_block": 2}


def test_census_is_additive():
    texts, _ = generate_corpus(3, files=4, max_lines=120)
    docs = docs_of(texts)
    whole = tactic_census(docs)
    parts = tactic_census(docs[:2]) + tactic_census(docs[2:])
    assert whole == parts
    assert structure_census(docs) == structure_census(docs[:1]) + structure_census(docs[1:])


def test_census_matches_generator_tally():
    texts, tally = generate_corpus(11, files=5, max_lines=200)
    c = tactic_census(docs_of(texts))
    expected_other = tally.methods["force"] + tally.methods["done"]
    assert c.counts["other"] == expected_other
    for head in ("sorry", "blast", "simp", "metis", "meson"):
        assert c.counts[head] == tally.methods[head]
    assert c.unfolding_count == tally.unfolding
    s = structure_census(docs_of(texts))
    assert (s.have_count, s.show_count, s.obtain_count, s.proof_block_count) == (
        tally.have,
        tally.show,
        tally.obtain,
        tally.proof_block,
    )


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_census_agrees_with_line_scanner(seed):
    texts, _ = generate_corpus(seed, files=2, max_lines=120)
    docs = docs_of(texts)
    tactics, structure = scan_corpus(texts.values())
    assert tactic_census(docs).to_dict() == tactics
    assert structure_census(docs).to_dict() == structure


# proof sizes

SIZES = """theory Sizes
  imports Main
begin

lemma helper_one: "A"
proof -
  show ?thesis by simp
qed

lemma helper_two: "B"
proof -
  show ?thesis by simp
qed

(** from §17 Theorem 17.2 [munkres.tex:4000] **)
theorem main_result:
  assumes a: "A"
  and b: "B"
  shows "C"
proof -
  have h1: "A" using a by simp
  have h2: "B" using b by simp
  have h3: "A ∧ B" using h1 h2 by blast
  have h4: "C"
  proof -
    show ?thesis using h3 by blast
  qed
  show ?thesis using h4 by simp
qed

end
"""


def test_proof_size_fixture():
    doc = parse_theory(SIZES)
    report = proof_size_report([doc])
    (entry,) = report.per_result
    assert entry.name == "main_result" and entry.section == 17
    assert entry.direct_lines == 10
    assert entry.helper_count == 2
    # 4 statement lines + 10 proof lines, plus two 4-line helpers
    assert entry.section_lines == 14 + 4 + 4
    assert report.helper_ratio == Fraction(2, 1)
    assert report.orphans == ()


def test_definitions_count_lines_but_are_not_helpers():
    text = (
        'definition d :: "nat" where "d = 1"\n\n'
        "(** from §5 Lemma 5.1 [x.tex:1] **)\n"
        'lemma l: "P"\n  by simp\n'
    )
    report = proof_size_report([parse_theory(text, "D")])
    (entry,) = report.per_result
    assert entry.helper_count == 0
    assert entry.section_lines == 1 + 2
    assert report.helper_ratio == 0


def test_orphans_and_attach_direction():
    text = (
        "(** from §5 Lemma 5.1 [x.tex:1] **)\n"
        'lemma l: "P"\n  by simp\n\n'
        'lemma trailing: "Q"\n  by simp\n'
    )
    doc = parse_theory(text, "O")
    following = proof_size_report([doc])
    assert following.orphans == ("O.trailing",)
    preceding = proof_size_report([doc], attach="preceding")
    assert preceding.orphans == ()
    assert preceding.per_result[0].helper_count == 1
    with pytest.raises(ValueError):
        proof_size_report([doc], attach="sideways")


def test_section_map_overrides_annotation():
    text = "(** from §5 Lemma 5.1 [x.tex:1] **)\n" 'lemma l: "P"\n  by simp\n'
    report = proof_size_report([parse_theory(text, "M")], section_map={"l": 9})
    assert report.per_result[0].section == 9


def test_no_results_gives_no_ratio():
    assert proof_size_report([]).helper_ratio is None


# model invariants


def test_sorry_takes_no_arguments():
    with pytest.raises(ValueError):
        TacticCall("sorry", ("x",))
    with pytest.raises(ValueError):
        TacticCall("sorry", (), ("f_def",))


def test_tactic_render_and_category():
    assert make_tactic("simp", ("add:", "x")).raw_text == "by (simp add: x)"
    assert make_tactic("blast", ("+",)).raw_text == "by blast+"
    assert make_tactic("force").category == "other"
    assert make_tactic("metis", ("a",)).with_head("meson").raw_text == "by (meson a)"


def test_step_invariants():
    with pytest.raises(ValueError):
        ProofStep("terminal")
    with pytest.raises(ValueError):
        ProofStep("have", goal_text=None, method=make_tactic("simp"))
    with pytest.raises(ValueError):
        ProofStep("proof_block", children=(ProofStep("have", goal_text="A", method=make_tactic("simp")),))


def test_annotation_render_parse():
    ann = SourceAnnotation(31, "Lemma 31.1", "chap4.tex", 77)
    assert SourceAnnotation.from_comment(ann.render()) == ann
    assert SourceAnnotation.from_comment("(** from \\<section>31 Lemma 31.1 [chap4.tex:77] **)") == ann
    assert SourceAnnotation.from_comment("(* ordinary *)") is None
