"""
Reading an agent session log
============================

Stream a JSONL session log, compute automation and duration statistics,
and tag each manual correction with a theme.
"""

import json
from datetime import datetime, timedelta, timezone

from proofforge import compute_stats, ingest, intervention_report
from proofforge.logs import format_stats

t0 = datetime(2025, 3, 1, 9, 0, tzinfo=timezone.utc)


def at(minutes):
    return (t0 + timedelta(minutes=minutes)).isoformat().replace("+00:00", "Z")


# minutes after the start, role, text, tool calls
events = [
    (0, "user", "Read CLAUDE.md and continue", []),
    (1, "assistant", "building", [{"kind": "bash", "payload": "isabelle build -d . Top"}]),
    (9, "assistant", "editing", [{"kind": "edit", "payload": "Ch5.thy"}]),
    (13, "user", "No uncontrolled slow by calls, use sorry first", []),
    (14, "user", "Read CLAUDE.md and continue", []),
    (20, "assistant", "checking", [{"kind": "bash", "payload": "cd src && isabelle process_theories -O Ch5.thy"}]),
    (30, "user", "Stop picking low hanging fruit", []),
    (31, "user", "Read CLAUDE.md and continue", []),
    (44, "assistant", "done", []),
]
lines = [json.dumps({"ts": at(m), "role": r, "text": x, "tools": tools}) for m, r, x, tools in events]
lines.insert(3, "{ this line is not json")

result = ingest(lines)
print(f"{result.count} records, {result.malformed} malformed")
for d in result.diagnostics:
    print("  warning:", d.format("session.jsonl"))

stats = compute_stats(result.records)
print(format_stats(stats))

report = intervention_report(result.records)
print("themes:", {k: v for k, v in report.counts().items() if v})
