from __future__ import annotations

import json
import random
from datetime import datetime, timezone
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loggen import CORRECTIONS, generate_log, oracle_median
from proofforge.logs import (
    ThemeRule,
    classify,
    command_matches,
    compute_stats,
    ingest,
    ingest_path,
    intervention_report,
    load_theme_rules,
    parse_timestamp,
)


def rec(ts, role, text="", tools=None):
    d = {"ts": ts, "role": role, "text": text}
    if tools is not None:
        d["tools"] = tools
    return json.dumps(d)


def test_parse_timestamp_variants():
    a = parse_timestamp("2025-01-01T10:00:00Z")
    b = parse_timestamp("2025-01-01T10:00:00")
    c = parse_timestamp("2025-01-01T12:00:00.123456+02:00")
    assert a == b
    assert c == datetime(2025, 1, 1, 10, 0, 0, 123000, tzinfo=timezone.utc)


def test_ingest_counts_and_malformed_lines():
    lines = [
        rec("2025-01-01T10:00:00Z", "user", "Read CLAUDE.md"),
        "{broken",
        json.dumps({"role": "user"}),
        rec("2025-01-01T10:01:00Z", "robot"),
        "",
        rec("2025-01-01T10:02:00Z", "assistant", "hi"),
    ]
    res = ingest(lines)
    assert res.count == 2 and res.malformed == 3
    assert [d.line for d in res.diagnostics] == [2, 3, 4]
    assert all(d.severity == "warning" for d in res.diagnostics)


def test_count_only_retains_nothing():
    lines = [rec("2025-01-01T10:00:00Z", "user", "x")] * 5
    res = ingest(lines, count_only=True)
    assert res.count == 5 and res.records == []


def test_field_map():
    line = json.dumps({"time": "2025-01-01T10:00:00Z", "who": "user", "msg": "Read CLAUDE.md now"})
    res = ingest([line], field_map={"ts": "time", "role": "who", "text": "msg"})
    assert res.records[0].text == "Read CLAUDE.md now"


def test_ingest_path(tmp_path):
    p = tmp_path / "log.jsonl"
    p.write_text(rec("2025-01-01T10:00:00Z", "user", "hi") + "\n")
    assert ingest_path(p).count == 1
    with pytest.raises(OSError):
        ingest_path(tmp_path / "missing.jsonl")


def test_ten_users_eight_automated():
    lines = []
    for i in range(10):
        text = "Read CLAUDE.md" if i < 8 else "please stop"
        lines.append(rec(f"2025-01-01T10:{i * 5:02d}:00Z", "user", text))
    lines.append(rec("2025-01-01T11:00:00Z", "assistant", "done"))
    stats = compute_stats(ingest(lines).records)
    assert stats.automation_ratio == Fraction(4, 5)
    assert stats.manual_msgs == 2
    # eight sessions of five minutes each
    assert [s.duration_min for s in stats.sessions] == [5] * 8
    assert stats.duration_median_min == oracle_median([5] * 8)


def test_no_user_messages():
    stats = compute_stats(ingest([rec("2025-01-01T10:00:00Z", "assistant", "x")]).records)
    assert stats.automation_ratio is None
    assert stats.sessions == () and stats.duration_median_min is None


def test_empty_log():
    stats = compute_stats([])
    assert stats.user_msgs_nonsystem == 0 and stats.automation_ratio is None


def test_system_messages_are_not_user_messages():
    lines = [rec("2025-01-01T10:00:00Z", "system", "Read CLAUDE.md"), rec("2025-01-01T10:01:00Z", "user", "Read CLAUDE.md")]
    stats = compute_stats(ingest(lines).records)
    assert stats.user_msgs_nonsystem == 1 and stats.automated_prompts == 1


def test_tool_counts_and_command_segments():
    tools = [
        {"kind": "bash", "payload": "cd a && isabelle build -D ."},
        {"kind": "bash", "payload": "echo isabelle build"},
        {"kind": "bash", "payload": "process_theories -O X.thy | tee out"},
        {"kind": "edit", "payload": "X.thy"},
        {"kind": "read", "payload": "X.thy"},
    ]
    stats = compute_stats(ingest([rec("2025-01-01T10:00:00Z", "assistant", "", tools)]).records)
    assert (stats.bash_cmds, stats.build_cmds, stats.process_theories_cmds) == (3, 1, 1)
    assert (stats.edits, stats.reads) == (1, 1)
    assert not command_matches("isabelle builder", ["isabelle build"])


def test_synthetic_log_against_oracle():
    log = generate_log(seed=3, total=5000, users=101, automated=81, median=9, malformed=4)
    res = ingest(log.lines)
    assert res.malformed == 4
    stats = compute_stats(res.records)
    assert stats.automation_ratio == Fraction(81, 101)
    assert stats.duration_median_min == oracle_median(log.durations) == 9
    assert stats.duration_mean_min == Fraction(sum(log.durations), len(log.durations))
    assert stats.duration_max_min == max(log.durations)
    assert (stats.bash_cmds, stats.build_cmds, stats.process_theories_cmds) == (log.bash, log.builds, log.process)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_stats_invariant_under_line_permutation(seed):
    log = generate_log(seed=seed % 7, total=400, users=21, automated=15, median=5)
    base = compute_stats(ingest(log.lines).records)
    lines = list(log.lines)
    random.Random(seed).shuffle(lines)
    assert compute_stats(ingest(lines).records) == base


@pytest.mark.parametrize("text, theme", CORRECTIONS)
def test_default_theme_phrases(text, theme):
    assert classify(text, load_theme_rules())[0] == theme


def test_classify_case_insensitive_first_rule_wins():
    rules = [ThemeRule("cherry_picking", ("jumping",)), ThemeRule("tactic_explosion", ("jumping",))]
    assert classify("Stop JUMPING around", rules) == ("cherry_picking", "jumping")


def test_empty_rules_send_everything_to_other():
    assert classify("low hanging fruit", []) == ("other", None)


def test_unknown_theme_rejected():
    with pytest.raises(ValueError):
        ThemeRule("vibes", ("x",))


def test_custom_rules_file(tmp_path):
    p = tmp_path / "rules.json"
    p.write_text(json.dumps([{"theme": "resource_management", "phrases": ["ram"]}]))
    assert classify("too much RAM", load_theme_rules(p))[0] == "resource_management"


def test_intervention_report_counts():
    log = generate_log(seed=1, total=3000, users=60, automated=40, median=7)
    records = ingest(log.lines).records
    counts = intervention_report(records).counts()
    assert counts == log.themes
    assert sum(counts.values()) == 20
