from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpusgen import generate_corpus
from proofforge.model import SourceAnnotation
from proofforge.parser import (
    TheorySyntaxError,
    canonicalize,
    parse_tactic,
    parse_theory,
    parse_theory_with_diagnostics,
    serialize,
    split_arguments,
    tokenize,
)

SIMPLE = """theory Simple
  imports Main
begin

(** from §12 Theorem 12.1 [munkres.tex:100] **)
lemma conj_example: "A ∧ B"
proof -
  have a: "A" by blast
  have b: "B" using a by (simp add: foo)
  show ?thesis using a b by blast
qed

lemma direct: "C"
  sorry

end
"""


def diag_of(text: str):
    doc, diags = parse_theory_with_diagnostics(text, "X")
    assert doc is None
    return [d for d in diags if d.severity == "error"][0]


def test_parse_simple_structure():
    doc = parse_theory(SIMPLE)
    assert doc.name == "Simple"
    assert doc.imports == ("Main",)
    assert [b.name for b in doc.blocks] == ["conj_example", "direct"]
    ann = doc.blocks[0].annotation
    assert ann == SourceAnnotation(12, "Theorem 12.1", "munkres.tex", 100)
    steps = doc.blocks[0].proof.steps[0].children
    assert [s.kind for s in steps] == ["have", "have", "show", "qed"]
    assert steps[1].using_facts == ("a",)
    assert steps[1].method.head == "simp"
    assert steps[1].method.arguments == ("add:", "foo")
    assert doc.blocks[1].proof.steps[0].kind == "terminal"
    assert doc.blocks[1].proof.steps[0].method.is_sorry


def test_simple_text_is_canonical():
    assert serialize(parse_theory(SIMPLE)) == SIMPLE


def test_spans_are_one_based_lines():
    doc = parse_theory(SIMPLE)
    assert doc.blocks[0].span == (6, 11)
    assert doc.blocks[0].proof.steps[0].children[0].span == (8, 8)
    assert doc.blocks[1].span == (13, 14)
    assert doc.raw_line_count == len(SIMPLE.splitlines())


def test_empty_input_is_an_empty_document():
    doc = parse_theory("", "Empty")
    assert doc.blocks == () and doc.name == "Empty" and not doc.header


def test_headerless_fragment_uses_given_name():
    doc = parse_theory('lemma x: "P" by simp\n', "Frag")
    assert doc.name == "Frag"
    assert serialize(doc) == 'lemma x: "P"\n  by simp\n'


def test_noncanonical_layout_normalises_idempotently():
    messy = 'theory M imports Main begin\nlemma x: "P"   by   simp lemma y: "Q" proof - show ?thesis by blast qed end'
    once = serialize(parse_theory(messy))
    assert serialize(parse_theory(once)) == once
    assert parse_theory(once) == canonicalize(parse_theory(messy))


def test_sledgehammer_directive_roundtrips():
    text = 'lemma x: "P"\nproof -\n  have h: "Q"\n    sledgehammer [timeout = 10]\n    sorry\n  show ?thesis using h sorry\nqed\n'
    doc = parse_theory(text, "D")
    assert doc.blocks[0].proof.steps[0].children[0].hammer_timeout == 10
    assert serialize(doc) == text


def test_obtain_and_nested_blocks():
    text = (
        'lemma x: "∃y. P y"\nproof -\n'
        '  obtain y z where yz: "P y ∧ Q z" sorry\n'
        '  have h: "P y"\n  proof -\n    show ?thesis using yz by blast\n  qed\n'
        "  show ?thesis using h by blast\nqed\n"
    )
    doc = parse_theory(text, "O")
    steps = doc.blocks[0].proof.steps[0].children
    assert steps[0].kind == "obtain" and steps[0].variables == ("y", "z")
    assert steps[2].kind == "proof_block"
    assert serialize(doc) == text


def test_definition_and_assumes_statement():
    text = (
        'definition sq :: "nat ⇒ nat" where "sq n = n * n"\n\n'
        'lemma m:\n  assumes h: "A"\n  shows "B"\n  using h by simp\n'
    )
    doc = parse_theory(text, "Def")
    assert doc.blocks[0].kind == "definition" and doc.blocks[0].proof is None
    assert "assumes" in doc.blocks[1].statement_text
    assert doc.blocks[1].proof.steps[0].using_facts == ("h",)
    assert serialize(parse_theory(serialize(doc), "Def")) == serialize(doc)


def test_cartouche_goal_and_quote_inside():
    doc = parse_theory("lemma q: ‹x = ''a\"b''›\n  by simp\n", "C")
    assert doc.blocks[0].conclusion_text == "x = ''a\"b''"
    again = parse_theory(serialize(doc), "C")
    assert again.blocks[0].statement_text == doc.blocks[0].statement_text


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ('lemma x: "P\n  by simp\n', 1, "unterminated quote"),
        ('lemma x: "P"\nproof -\n  have "Q" by simp\n', 2, "unbalanced 'proof'"),
        ('lemma x: "P"\n  by simp\nqed\n', 3, "unbalanced 'qed'"),
        ('frobnicate x: "P"\n', 1, "unknown top-level keyword 'frobnicate'"),
        ('lemma x: "P"\nproof -\n  fix y\n  show ?thesis sorry\nqed\n', 3, "unsupported proof command 'fix'"),
        ('lemma x: "P"\n  by simp blast\n', 2, "second closing method"),
        ('lemma x: "P"\n  unfolding a_def sorry\n', 2, "'unfolding' before sorry"),
        ('lemma x: "P"\nproof -\n  have h: "A" sorry\n  have h: "B" sorry\n  show ?thesis sorry\nqed\n', 4, "duplicate label 'h'"),
        ('lemma x [simp]: "P"\n  by simp\n', 1, "attributes are not supported"),
        ('lemma x: "P"\n  by sorry\n', 2, "expected method after 'by'"),
        ('theory T imports Main begin\nlemma x: "P" by simp\n', 3, "missing 'end'"),
    ],
)
def test_diagnostics_locate_errors(text, line, fragment):
    d = diag_of(text)
    assert d.line == line
    assert fragment in d.message
    assert d.format("f.thy").startswith(f"f.thy:{line}:")


def test_distinct_errors_have_distinct_messages():
    a = diag_of('lemma x: "P\n').message
    b = diag_of('lemma x: "P"\nproof -\n').message
    assert a != b


def test_parse_theory_raises_with_diagnostics():
    with pytest.raises(TheorySyntaxError) as info:
        parse_theory('lemma x: "P"\nproof -\n', "E")
    assert info.value.diagnostics[0].line == 2


def test_plain_comment_is_dropped_with_warning():
    doc, diags = parse_theory_with_diagnostics('(* note *)\nlemma x: "P"\n  by simp\n', "W")
    assert doc is not None
    assert [d.severity for d in diags] == ["warning"]
    assert doc.blocks[0].annotation is None


def test_stray_annotation_warns():
    doc, diags = parse_theory_with_diagnostics(
        'lemma x: "P"\n  (** from §3 Lemma 1 [a.tex:1] **)\n  by simp\n', "W"
    )
    assert doc is not None and diags and diags[0].severity == "warning"


@pytest.mark.parametrize(
    "text, head, args, unfolding",
    [
        ("by blast", "blast", (), ()),
        ("by blast+", "blast", ("+",), ()),
        ("by (simp add: a b)", "simp", ("add:", "a", "b"), ()),
        ("by (auto simp: x intro: (y z))", "auto", ("simp:", "x", "intro:", "(y z)"), ()),
        ("unfolding f_def g_def by (metis h)", "metis", ("h",), ("f_def", "g_def")),
        ("sorry", "sorry", (), ()),
        ("done", "done", (), ()),
        ("by force", "force", (), ()),
    ],
)
def test_parse_tactic(text, head, args, unfolding):
    call = parse_tactic(text)
    assert (call.head, call.arguments, call.unfolding_facts) == (head, args, unfolding)
    assert parse_tactic(call.raw_text) == call


def test_parse_tactic_rejects_trailing_text():
    with pytest.raises(TheorySyntaxError):
        parse_tactic("by simp extra")


def test_split_arguments_keeps_nested_groups():
    assert split_arguments(' add: f (g x) "a b" del: h') == ("add:", "f", "(g x)", '"a b"', "del:", "h")


def test_tokenize_nested_comment():
    toks = tokenize("(* a (* b *) c *) lemma")
    assert [t.kind for t in toks] == ["comment", "word"]


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_generated_text_roundtrips_exactly(seed):
    texts, _ = generate_corpus(seed, files=1, max_lines=150)
    for name, text in texts.items():
        doc = parse_theory(text, name)
        assert serialize(doc) == text
        assert parse_theory(serialize(doc), name) == doc
