"""
Finding slow steps and swapping metis for meson
===============================================

Profile a chapter whose steps are closed by slow metis calls, propose
verified swaps on equality-free goals, and check the session budget.
"""

from proofforge import MockBackend, apply_swaps, budget_check, is_equality_free, parse_theory, profile, propose_swaps
from proofforge.profiler import format_profile

lines = ["theory Ch5_8", "  imports Main", "begin"]
table = {}
for i in range(10):
    goal = f"open U{i} ⟶ U{i} ∈ T"
    lines += ["", f'lemma open_step_{i}: "{goal}"', f"  by (metis open_def T{i})"]
    table[(goal, "metis")] = ("proved", 11_500)
    table[(goal, "meson")] = ("proved", 1_150)
# one step with an equality, which the heuristic leaves alone
lines += ["", 'lemma eq_step: "f x = g x ⟶ g x = f x"', "  by metis"]
table[("f x = g x ⟶ g x = f x", "metis")] = ("proved", 3_000)
table[("f x = g x ⟶ g x = f x", "meson")] = ("proved", 10)
lines += ["", "end"]
doc = parse_theory("\n".join(lines) + "\n")

backend = MockBackend(table)
before = profile([doc], backend)
print(format_profile(before, 120_000))

print("equality-free?", is_equality_free("open U0 ⟶ U0 ∈ T"), is_equality_free("f x = g x ⟶ g x = f x"))

# every proposal is re-checked before it may be applied
proposals = propose_swaps(before, [doc], backend)
for p in proposals:
    print(f"{p.goal}: {p.from_head} {p.old_ms} ms -> {p.to_head} {p.new_ms} ms (x{p.speedup:.1f})")

after = profile(apply_swaps([doc], proposals), backend)
print(f"total {before.total_ms} ms -> {after.total_ms} ms")
print("budget 120 s after swaps (pass, margin):", budget_check(after, 120_000))
