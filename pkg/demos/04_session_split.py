"""
Choosing which chapters to freeze into a cached image
=====================================================

Given build times along a dependency chain and where edits happen, find
the prefix that minimizes the expected rebuild after an edit.
"""

from fractions import Fraction

from proofforge import BuildUnit, plan_split
from proofforge.planner import edit_cost, format_plan

# all editing happens in the last chapter
chain = [
    BuildUnit("Ch2", 14_000, Fraction(0)),
    BuildUnit("Ch3", 15_000, Fraction(0)),
    BuildUnit("Ch4", 14_000, Fraction(0)),
    BuildUnit("Ch5_8", 12_500, Fraction(1)),
]
plan = plan_split(chain)
print(format_plan(plan))
print("no cache:", edit_cost(plan.units, 0), "ms per edit")

# the cost of every possible cut, for comparison
for cut in range(len(chain) + 1):
    print(f"cut {cut}: {float(edit_cost(plan.units, cut)):.0f} ms")

# if edits spread across chapters, caching less becomes better
spread = [BuildUnit(u.name, u.build_ms, Fraction(1)) for u in chain]
print(format_plan(plan_split(spread)))
