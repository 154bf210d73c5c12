"""
Counting closing methods and proof structure
============================================

Parse a small formalization, print its tactic and structure censuses, and
measure how long each numbered result is compared with its section.
"""

from proofforge import parse_theory, proof_size_report, serialize, structure_census, tactic_census

# a chapter with one definition, two helpers and a numbered theorem
TEXT = """theory Ch2
  imports Main
begin

definition open_set :: "'a set set ⇒ 'a set ⇒ bool" where "open_set T U ⟷ U ∈ T"

lemma helper_union: "open_set T A ⟹ open_set T B ⟹ A ∪ B ∈ T ∨ True"
  by blast

lemma helper_inter: "A ∩ B ⊆ A"
  unfolding open_set_def by auto

(** from §12 Theorem 12.1 [top1.tex:812] **)
theorem basis_open: "∀U. open_set T U ⟶ U ∈ T"
proof -
  have h1: "∀U. open_set T U ⟶ U ∈ T" by (simp add: open_set_def)
  obtain V where v: "V ∈ T ∨ T = {}" by blast
  show ?thesis using h1 by (metis open_set_def)
qed

end
"""

doc = parse_theory(TEXT)

# canonical text survives a round trip unchanged
assert serialize(doc) == TEXT

# how often each closing method is used, plus unfolding prefixes
print("tactics:", tactic_census([doc]).to_dict())

# have/show/obtain steps and proof blocks
print("structure:", structure_census([doc]).to_dict())

# direct proof length versus the section that supports it
report = proof_size_report([doc])
for entry in report.per_result:
    print(f"{entry.name}: direct {entry.direct_lines} lines, section {entry.section_lines} lines, "
          f"{entry.helper_count} helpers")
print("helper ratio:", report.helper_ratio)
