from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixtures import random_swap_case, swap_scenario_table, swap_scenario_text
from proofforge.backend import GoalId, MockBackend
from proofforge.parser import parse_theory, serialize
from proofforge.profiler import (
    TimingEntry,
    TimingProfile,
    apply_swaps,
    budget_check,
    format_profile,
    is_equality_free,
    profile,
    propose_swaps,
)

THREE = """lemma s1: "A"
  by blast

lemma s2: "B"
  by simp

lemma s3: "open U ⟶ U ∈ T"
  by (metis open_def)
"""


@pytest.fixture
def three():
    return parse_theory(THREE, "P3")


def three_table():
    return {
        ("A", "blast"): ("proved", 40),
        ("B", "simp"): ("proved", 95),
        ("open U ⟶ U ∈ T", "metis"): ("proved", 1200),
        ("open U ⟶ U ∈ T", "meson"): ("proved", 110),
    }


def test_profile_totals_and_slow(three):
    prof = profile([three], MockBackend(three_table()), slow_threshold_ms=1000)
    assert prof.total_ms == 1335
    assert prof.slow == (GoalId("P3", "s3", (0,)),)
    assert [e.elapsed_ms for e in prof.entries] == [40, 95, 1200]


def test_profile_empty():
    prof = profile([parse_theory("", "E")], MockBackend({}))
    assert prof.total_ms == 0 and prof.slow == ()


def test_profile_skips_sorries_and_flags_regressions():
    d = parse_theory('lemma a: "A"\n  sorry\n\nlemma b: "B"\n  by auto\n', "R")
    prof = profile([d], MockBackend({}))
    assert prof.skipped_sorries == 1
    assert prof.regressions == (GoalId("R", "b", (0,)),)


def test_profile_invariant_enforced():
    with pytest.raises(ValueError):
        TimingProfile((TimingEntry(GoalId("a", "b", (0,)), "simp", 5),), 6, ())


def test_profile_deterministic_with_workers(three):
    a = profile([three], MockBackend(three_table()), slow_threshold_ms=1000, workers=1)
    b = profile([three], MockBackend(three_table()), slow_threshold_ms=1000, workers=6)
    assert a == b


@pytest.mark.parametrize(
    "goal, free",
    [
        ("open U ⟶ U ∈ T", True),
        ("x = y ⟶ f x = f y", False),
        ("P (a = b)", False),
        ("x ≠ y", False),
        ("A ⟷ B", False),
        ("A <-> B", False),
        ("x \\<noteq> y", False),
        ("A ==> B", True),
        ("A --> B", True),
        ("x <= y", True),
        ("f ''a = b'' ∈ S", True),
        ("a ~= b", False),
    ],
)
def test_is_equality_free(goal, free):
    assert is_equality_free(goal) is free


@settings(max_examples=100)
@given(st.text(alphabet="ab =⟶∈()≠ \t\n", min_size=1).filter(lambda s: s.strip()))
def test_equality_free_ignores_whitespace(text):
    squashed = " ".join(text.split())
    assert is_equality_free(text) == is_equality_free(squashed)


def test_is_equality_free_rejects_empty():
    with pytest.raises(ValueError):
        is_equality_free("  ")


def test_verified_swap_proposal(three):
    mb = MockBackend(three_table())
    prof = profile([three], mb, slow_threshold_ms=1000)
    (p,) = propose_swaps(prof, [three], mb)
    assert p.verified and (p.old_ms, p.new_ms) == (1200, 110)
    assert p.speedup == pytest.approx(10.909, abs=1e-3)
    (new,) = apply_swaps([three], [p])
    assert "by (meson open_def)" in serialize(new)


def test_no_proposal_for_equality_goal():
    d = parse_theory('lemma a: "x = y ⟶ f x = f y"\n  by metis\n', "Q")
    mb = MockBackend({("x = y ⟶ f x = f y", "metis"): ("proved", 5000), ("x = y ⟶ f x = f y", "meson"): ("proved", 5)})
    assert propose_swaps(profile([d], mb), [d], mb) == []


def test_no_slow_entries_no_proposals(three):
    mb = MockBackend(three_table())
    prof = profile([three], mb, slow_threshold_ms=5000)
    assert propose_swaps(prof, [three], mb) == []


def test_unverified_is_not_applied(three):
    t = three_table()
    del t[("open U ⟶ U ∈ T", "meson")]
    mb = MockBackend(t)
    prof = profile([three], mb, slow_threshold_ms=1000)
    (p,) = propose_swaps(prof, [three], mb)
    assert not p.verified
    assert [serialize(d) for d in apply_swaps([three], [p])] == [serialize(three)]


@pytest.mark.parametrize("total, budget, ok, margin", [(11_500, 120_000, True, 108_500), (120_000, 120_000, True, 0), (125_000, 120_000, False, -5_000)])
def test_budget_check(total, budget, ok, margin):
    prof = TimingProfile((TimingEntry(GoalId("f", "b", (0,)), "simp", total),), total, ())
    assert budget_check(prof, budget) == (ok, margin)


def test_budget_must_be_positive():
    with pytest.raises(ValueError):
        budget_check(TimingProfile((), 0, ()), 0)


def test_scenario_ratio():
    d = parse_theory(swap_scenario_text(), "Ch5_8")
    mb = MockBackend(swap_scenario_table())
    before = profile([d], mb)
    after = profile(apply_swaps([d], propose_swaps(before, [d], mb)), mb)
    assert (before.total_ms, after.total_ms) == (115_000, 11_500)


def test_format_profile_mentions_budget(three):
    prof = profile([three], MockBackend(three_table()), slow_threshold_ms=1000)
    text = format_profile(prof, 120_000)
    assert "slow" in text and "pass" in text


def test_swaps_never_slow_down_random_profiles():
    rng = random.Random(7)
    for _ in range(50):
        d, table = random_swap_case(rng)
        mb = MockBackend(table)
        before = profile([d], mb, slow_threshold_ms=rng.choice((500, 2000, 8000)))
        props = propose_swaps(before, [d], mb)
        after = profile(apply_swaps([d], props), mb, slow_threshold_ms=before.slow_threshold_ms)
        assert after.total_ms <= before.total_ms
