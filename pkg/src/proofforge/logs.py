"""Agent session logs: streaming JSONL ingest, session statistics, intervention themes."""

from __future__ import annotations

import json
import re
import statistics
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .model import ParseDiagnostic

ROLES = ("assistant", "user", "system")
TOOL_KINDS = ("bash", "edit", "read", "other")
THEMES = ("tactic_explosion", "inefficient_tooling", "cherry_picking", "resource_management", "other")
DEFAULT_PREFIX = "Read CLAUDE.md"
DEFAULT_FIELDS = {"ts": "ts", "role": "role", "text": "text", "tools": "tools"}
DEFAULT_BUILD_PREFIXES = ("isabelle build",)
DEFAULT_PROCESS_PREFIXES = ("isabelle process_theories", "process_theories")
# documented ceiling for count-only ingest, independent of input size
COUNT_MODE_MEMORY_BOUND_BYTES = 4 * 1024 * 1024

_SEGMENT_RE = re.compile(r"&&|\|\||[;|\n]")


@dataclass(frozen=True)
class ToolCall:
    kind: str
    payload: str


@dataclass(frozen=True)
class SessionLogRecord:
    timestamp: datetime
    role: str
    text: str
    tool_calls: tuple[ToolCall, ...] = ()
    line: int = 0


@dataclass(frozen=True)
class IngestResult:
    records: list[SessionLogRecord]
    diagnostics: list[ParseDiagnostic]
    count: int

    @property
    def malformed(self) -> int:
        return len(self.diagnostics)


def parse_timestamp(value: str) -> datetime:
    """ISO-8601 to an aware UTC instant truncated to milliseconds; naive means UTC."""
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    ts = ts.astimezone(timezone.utc)
    return ts.replace(microsecond=ts.microsecond // 1000 * 1000)


def _record(obj, fields: Mapping[str, str], line: int) -> SessionLogRecord:
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    try:
        raw_ts = obj[fields["ts"]]
        role = obj[fields["role"]]
    except KeyError as exc:
        raise ValueError(f"missing field {exc.args[0]!r}") from None
    if not isinstance(raw_ts, str):
        raise ValueError("timestamp is not a string")
    ts = parse_timestamp(raw_ts)
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}")
    text = obj.get(fields["text"], "")
    if text is None:
        text = ""
    if not isinstance(text, str):
        raise ValueError("text is not a string")
    tools = []
    for t in obj.get(fields["tools"]) or ():
        if not isinstance(t, dict):
            raise ValueError("tool call is not an object")
        kind = str(t.get("kind", "other")).lower()
        tools.append(ToolCall(kind if kind in TOOL_KINDS else "other", str(t.get("payload", ""))))
    return SessionLogRecord(ts, role, text, tuple(tools), line)


def ingest(
    lines: Iterable[str],
    field_map: Optional[Mapping[str, str]] = None,
    count_only: bool = False,
) -> IngestResult:
    """Single pass over JSONL lines; malformed lines become warnings.

    Records come back sorted by timestamp (stable for equal instants). In
    ``count_only`` mode nothing is retained beyond the count and the
    diagnostics.
    """
    fields = dict(DEFAULT_FIELDS)
    fields.update(field_map or {})
    records: list[SessionLogRecord] = []
    diags: list[ParseDiagnostic] = []
    count = 0
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = _record(json.loads(line), fields, n)
        except (ValueError, TypeError) as exc:
            diags.append(ParseDiagnostic(n, 1, f"malformed record: {exc}", "warning"))
            continue
        count += 1
        if not count_only:
            records.append(rec)
    records.sort(key=lambda r: r.timestamp)
    return IngestResult(records, diags, count)


def ingest_path(path: Union[str, Path], **kwargs) -> IngestResult:
    """Stream a file from disk; an unreadable path raises OSError."""
    with open(path, encoding="utf-8", errors="replace") as fp:
        return ingest(fp, **kwargs)


@dataclass(frozen=True)
class Session:
    start: datetime
    end: datetime

    @property
    def duration_min(self) -> Fraction:
        delta = self.end - self.start
        ms = delta.days * 86_400_000 + delta.seconds * 1000 + delta.microseconds // 1000
        return Fraction(ms, 60_000)


@dataclass(frozen=True)
class SessionStats:
    assistant_msgs: int
    user_msgs_nonsystem: int
    bash_cmds: int
    build_cmds: int
    process_theories_cmds: int
    edits: int
    reads: int
    automated_prompts: int
    manual_msgs: int
    automation_ratio: Optional[Fraction]
    sessions: tuple[Session, ...]
    duration_median_min: Optional[Fraction]
    duration_mean_min: Optional[Fraction]
    duration_max_min: Optional[Fraction]

    def to_dict(self) -> dict:
        def num(x):
            return None if x is None else float(x)

        return {
            "assistant_msgs": self.assistant_msgs,
            "user_msgs_nonsystem": self.user_msgs_nonsystem,
            "bash_cmds": self.bash_cmds,
            "build_cmds": self.build_cmds,
            "process_theories_cmds": self.process_theories_cmds,
            "edits": self.edits,
            "reads": self.reads,
            "automated_prompts": self.automated_prompts,
            "manual_msgs": self.manual_msgs,
            "automation_ratio": num(self.automation_ratio),
            "sessions": [
                {
                    "start": s.start.isoformat(timespec="milliseconds"),
                    "end": s.end.isoformat(timespec="milliseconds"),
                    "duration_min": float(s.duration_min),
                }
                for s in self.sessions
            ],
            "session_count": len(self.sessions),
            "duration_median_min": num(self.duration_median_min),
            "duration_mean_min": num(self.duration_mean_min),
            "duration_max_min": num(self.duration_max_min),
        }


def command_matches(payload: str, prefixes: Sequence[str]) -> bool:
    """True when any shell segment of ``payload`` starts with one of ``prefixes``."""
    for seg in _SEGMENT_RE.split(payload):
        seg = seg.strip()
        if any(seg == p or seg.startswith(p + " ") or seg.startswith(p + "\t") for p in prefixes):
            return True
    return False


def is_automated(record: SessionLogRecord, prefix: str = DEFAULT_PREFIX) -> bool:
    return record.role == "user" and record.text.lstrip().startswith(prefix)


def compute_stats(
    records: Sequence[SessionLogRecord],
    automated_prompt_prefix: str = DEFAULT_PREFIX,
    build_prefixes: Sequence[str] = DEFAULT_BUILD_PREFIXES,
    process_prefixes: Sequence[str] = DEFAULT_PROCESS_PREFIXES,
) -> SessionStats:
    """Counts and session durations over timestamp-sorted records.

    Each automated prompt opens a session that ends at the next user record
    (automated or not) or, failing that, at the last record of the log.
    """
    assistant = users = bash = build = proc = edits = reads = automated = 0
    sessions: list[Session] = []
    open_at: Optional[datetime] = None
    for rec in records:
        if rec.role == "assistant":
            assistant += 1
        for call in rec.tool_calls:
            if call.kind == "bash":
                bash += 1
                if command_matches(call.payload, build_prefixes):
                    build += 1
                if command_matches(call.payload, process_prefixes):
                    proc += 1
            elif call.kind == "edit":
                edits += 1
            elif call.kind == "read":
                reads += 1
        if rec.role != "user":
            continue
        users += 1
        if open_at is not None:
            sessions.append(Session(open_at, rec.timestamp))
            open_at = None
        if is_automated(rec, automated_prompt_prefix):
            automated += 1
            open_at = rec.timestamp
    if open_at is not None:
        sessions.append(Session(open_at, records[-1].timestamp))

    durations = [s.duration_min for s in sessions]
    return SessionStats(
        assistant_msgs=assistant,
        user_msgs_nonsystem=users,
        bash_cmds=bash,
        build_cmds=build,
        process_theories_cmds=proc,
        edits=edits,
        reads=reads,
        automated_prompts=automated,
        manual_msgs=users - automated,
        automation_ratio=Fraction(automated, users) if users else None,
        sessions=tuple(sessions),
        duration_median_min=Fraction(statistics.median(durations)) if durations else None,
        duration_mean_min=Fraction(sum(durations), len(durations)) if durations else None,
        duration_max_min=max(durations) if durations else None,
    )


@dataclass(frozen=True)
class ThemeRule:
    theme: str
    phrases: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.theme not in THEMES:
            raise ValueError(f"unknown theme {self.theme!r}")


def load_theme_rules(path: Optional[Union[str, Path]] = None) -> list[ThemeRule]:
    """Rules from ``path``, or the packaged defaults."""
    if path is None:
        text = resources.files("proofforge").joinpath("data/theme_rules.json").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text)
    items = data["rules"] if isinstance(data, dict) else data
    return [ThemeRule(r["theme"], tuple(r["phrases"])) for r in items]


@dataclass(frozen=True)
class InterventionReport:
    themed: Mapping[str, tuple[tuple[int, Optional[str]], ...]]

    def counts(self) -> dict[str, int]:
        return {t: len(self.themed.get(t, ())) for t in THEMES}

    def to_dict(self) -> dict:
        return {
            "themed": {
                t: [{"record": i, "phrase": p} for i, p in self.themed.get(t, ())] for t in THEMES
            },
            "counts": self.counts(),
        }


def classify(text: str, rules: Sequence[ThemeRule]) -> tuple[str, Optional[str]]:
    """First rule with a case-insensitive phrase hit wins; otherwise ``other``."""
    low = text.casefold()
    for rule in rules:
        for phrase in rule.phrases:
            if phrase.casefold() in low:
                return rule.theme, phrase
    return "other", None


def intervention_report(
    records: Sequence[SessionLogRecord],
    rules: Optional[Sequence[ThemeRule]] = None,
    automated_prompt_prefix: str = DEFAULT_PREFIX,
) -> InterventionReport:
    """Theme every manual user message; indices refer to ``records``."""
    if rules is None:
        rules = load_theme_rules()
    themed: dict[str, list[tuple[int, Optional[str]]]] = {t: [] for t in THEMES}
    for i, rec in enumerate(records):
        if rec.role != "user" or is_automated(rec, automated_prompt_prefix):
            continue
        theme, phrase = classify(rec.text, rules)
        themed[theme].append((i, phrase))
    return InterventionReport({t: tuple(v) for t, v in themed.items()})


def format_stats(stats: SessionStats) -> str:
    def num(x):
        return "n/a" if x is None else f"{float(x):.1f}"

    ratio = "n/a" if stats.automation_ratio is None else f"{float(stats.automation_ratio):.1%}"
    rows = [
        ("assistant messages", stats.assistant_msgs),
        ("user messages (non-system)", stats.user_msgs_nonsystem),
        ("automated prompts", f"{stats.automated_prompts} ({ratio})"),
        ("manual messages", stats.manual_msgs),
        ("bash commands", stats.bash_cmds),
        ("build commands", stats.build_cmds),
        ("process_theories runs", stats.process_theories_cmds),
        ("file edits", stats.edits),
        ("file reads", stats.reads),
        ("sessions", len(stats.sessions)),
        ("duration median/mean/max (min)", f"{num(stats.duration_median_min)} / "
         f"{num(stats.duration_mean_min)} / {num(stats.duration_max_min)}"),
    ]
    return "\n".join(f"{k:<32} {v}" for k, v in rows)


__all__ = [
    "COUNT_MODE_MEMORY_BOUND_BYTES",
    "DEFAULT_PREFIX",
    "IngestResult",
    "InterventionReport",
    "Session",
    "SessionLogRecord",
    "SessionStats",
    "THEMES",
    "ThemeRule",
    "ToolCall",
    "classify",
    "command_matches",
    "compute_stats",
    "format_stats",
    "ingest",
    "ingest_path",
    "intervention_report",
    "is_automated",
    "load_theme_rules",
    "parse_timestamp",
]
