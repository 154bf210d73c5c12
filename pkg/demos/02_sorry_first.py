"""
Closing a proof skeleton with harvested suggestions
===================================================

Start from a skeleton in which every step is a placeholder, then let the
loop annotate, harvest, substitute and decompose until nothing is left.
A scripted mock checker stands in for the real prover.
"""

from collections import Counter

from proofforge import MockBackend, locate_sorries, parse_theory, run_to_zero, serialize, validate_skeleton

SKELETON = """theory Compact
  imports Main
begin

lemma closed_image: "closed K ∧ (compact K ⟶ bounded K)"
  sorry

lemma tube: "open W"
proof -
  have a: "x ∈ W" sorry
  have b: "W ⊆ X" using a sorry
  show ?thesis using a b sorry
qed

end
"""

doc = parse_theory(SKELETON)

# the skeleton discipline: only placeholders as terminal steps
assert validate_skeleton(doc) == []
print("placeholders before:", len(locate_sorries([doc])))

# which (goal, method) pairs the mock checker accepts, with simulated ms
table = {
    ("closed K", "auto"): ("proved", 180),
    ("compact K ⟶ bounded K", "blast"): ("proved", 95),
    ("compact K ⟶ bounded K", "metis"): ("proved", 1200),
    ("x ∈ W", "simp"): ("proved", 40),
    ("W ⊆ X", "fast"): ("proved", 60),
    ("open W", "meson"): ("proved", 110),
}
backend = MockBackend(table)


def observe(phase, state):
    counts = Counter(site.status for site in state.sites)
    print(f"  iteration {state.iteration}: {phase:<10} {dict(sorted(counts.items()))}")


docs, report = run_to_zero([doc], backend, observer=observe)

# the conjunction was split into two sub-goals and every leaf got its fastest method
print(serialize(docs[0]))
print("placeholders after:", len(locate_sorries(docs)))
print("report:", report.to_dict())
