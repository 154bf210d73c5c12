"""Command-line entry point: ``proofforge <subcommand> ...``.

Exit codes: 0 success, 1 domain failure (violations, regressions,
unresolved or remaining sorries, budget exceeded), 2 usage or parse error.
Reports go to stdout and diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .backend import ExternalBackend, MockBackend, TransportError, UnresolvedGoalError, resolve
from .census import proof_size_report, structure_census, tactic_census
from .config import Config, ConfigError, load_config
from .logs import (
    compute_stats,
    format_stats,
    ingest_path,
    intervention_report,
    load_theme_rules,
)
from .model import TheoryDocument
from .parser import parse_theory_with_diagnostics, serialize
from .planner import MODELS, format_plan, parse_units, plan_split
from .profiler import apply_swaps, budget_check, format_profile, profile, propose_swaps
from .workflow import CommandDecomposer, WorkflowConfig, locate_sorries, run_to_zero, validate_skeleton

SCHEMA_VERSION = 1
EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# option plumbing

# flag dest -> Config field
_OVERRIDES = {
    "hammer_timeout": "hammer_timeout_s",
    "slow_threshold_ms": "slow_threshold_ms",
    "budget_ms": "session_budget_ms",
    "workers": "workers",
    "max_iterations": "max_iterations",
    "prefix": "automated_prompt_prefix",
    "backend_command": "backend_command",
    "check_command": "check_command",
    "decomposer": "decomposer_command",
    "theme_rules": "theme_rules_path",
    "mock": "mock_table_path",
}


def _shared() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subcommand's unset flags from clobbering top-level ones
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = p.add_argument_group("shared options")
    g.add_argument("--format", choices=("text", "json"), help="output format (default text)")
    g.add_argument("--config", metavar="PATH", help="config file (default $PROOFFORGE_CONFIG)")
    g.add_argument("--show-config", action="store_true", help="print the effective config and exit")
    g.add_argument("--hammer-timeout", type=int, metavar="S", help="per-goal hammer timeout in seconds")
    g.add_argument("--slow-threshold-ms", type=int, metavar="MS")
    g.add_argument("--budget-ms", type=int, metavar="MS", help="session build budget")
    g.add_argument("--workers", type=int)
    g.add_argument("--max-iterations", type=int)
    g.add_argument("--prefix", metavar="TEXT", help="automated prompt prefix")
    g.add_argument("--backend-command", metavar="CMD", help="external hammer command template")
    g.add_argument("--check-command", metavar="CMD", help="external check command template")
    g.add_argument("--decomposer", metavar="CMD", help="external decomposer command")
    g.add_argument("--theme-rules", metavar="PATH")
    g.add_argument("--mock", metavar="TABLE", help="use the mock backend with this JSON table")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    shared = _shared()
    parser = argparse.ArgumentParser(
        prog="proofforge",
        description="Structured-proof tooling: census, sorry-first workflow, profiling, build planning, log analytics.",
        parents=[shared],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="<command>")

    def add(name: str, help: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, help=help, description=help, parents=[shared])

    p = add("parse", "parse theory files and report blocks or diagnostics")
    p.add_argument("paths", nargs="+")
    p.add_argument("--canonical", action="store_true", help="print the canonical serialization")

    p = add("census", "count closing methods and proof structure")
    p.add_argument("paths", nargs="+")

    p = add("sizes", "direct and section proof sizes of annotated results")
    p.add_argument("paths", nargs="+")
    p.add_argument("--attach", choices=("following", "preceding"), default="following")

    p = add("sorries", "list sorry placeholders (exit 1 if any remain)")
    p.add_argument("paths", nargs="+")

    p = add("validate", "check skeleton discipline: only sorry in new code")
    p.add_argument("paths", nargs="+")
    p.add_argument("--new-region", metavar="A:B", help="1-based inclusive line range")

    p = add("run", "iterate the sorry-first loop until no placeholder is left")
    p.add_argument("paths", nargs="+")
    out = p.add_mutually_exclusive_group()
    out.add_argument("--in-place", action="store_true", help="rewrite the input files")
    out.add_argument("--output-dir", metavar="DIR", help="write resulting theories here")

    p = add("profile", "time every closing method and check the build budget")
    p.add_argument("paths", nargs="+")

    p = add("swap", "propose (and optionally apply) faster method swaps for slow steps")
    p.add_argument("paths", nargs="+")
    p.add_argument("--heads", default="metis", help="comma-separated heads eligible for swapping")
    p.add_argument("--target", default="meson")
    out = p.add_mutually_exclusive_group()
    out.add_argument("--in-place", action="store_true")
    out.add_argument("--output-dir", metavar="DIR")

    p = add("plan-split", "choose the build-chain prefix to cache")
    p.add_argument("units", help="file of 'name build_ms [edit_weight]' lines, or - for stdin")
    p.add_argument("--model", choices=MODELS, default="session")

    p = add("analyze-log", "session statistics and intervention themes from a JSONL log")
    p.add_argument("log")
    p.add_argument("--count-only", action="store_true", help="stream and count records only")
    p.add_argument("--themes", action="store_true", help="include the intervention report")
    p.add_argument(
        "--field", action="append", default=[], metavar="NAME=SOURCE", help="map a schema field to a source key"
    )
    return parser


def _config(args: argparse.Namespace) -> Config:
    overrides = {cfg: getattr(args, flag) for flag, cfg in _OVERRIDES.items() if hasattr(args, flag)}
    return load_config(getattr(args, "config", None), overrides)


def _emit(args: argparse.Namespace, data: dict, text: str) -> None:
    if getattr(args, "format", "text") == "json":
        payload = {"schema_version": SCHEMA_VERSION, **data}
        print(json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False))
    else:
        print(text)


# inputs


def _theory_files(paths: Sequence[str]) -> list[Path]:
    out = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            out.extend(sorted(p.rglob("*.thy")))
        elif p.is_file():
            out.append(p)
        else:
            raise UsageError(f"no such file or directory: {raw}")
    if not out:
        raise UsageError("no theory files found")
    return out


def _load(paths: Sequence[str]) -> list[tuple[Path, TheoryDocument]]:
    loaded, failed = [], False
    for path in _theory_files(paths):
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc.strerror}") from None
        doc, diags = parse_theory_with_diagnostics(text, path.stem)
        for d in diags:
            print(d.format(str(path)), file=sys.stderr)
        if doc is None:
            failed = True
        else:
            loaded.append((path, doc))
    if failed:
        raise _ParseFailed()
    names = [d.name for _, d in loaded]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise UsageError(f"duplicate theory names: {', '.join(dupes)}")
    return loaded


class _ParseFailed(Exception):
    pass


def _backend(cfg: Config):
    if cfg.mock_table_path:
        try:
            data = json.loads(Path(cfg.mock_table_path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot load mock table {cfg.mock_table_path}: {exc}") from None
        return MockBackend.from_json(data)
    if cfg.backend_command or cfg.check_command:
        return ExternalBackend(cfg.backend_command, cfg.check_command)
    raise UsageError("no backend configured: pass --mock TABLE or set backend_command/check_command")


def _write_back(args, pairs: list[tuple[Path, TheoryDocument]], docs: list[TheoryDocument]) -> list[str]:
    by_name = {d.name: d for d in docs}
    written = []
    if getattr(args, "in_place", False):
        targets = [(path, by_name[doc.name]) for path, doc in pairs]
    elif getattr(args, "output_dir", None):
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        targets = [(out / path.name, by_name[doc.name]) for path, doc in pairs]
    else:
        return written
    for path, doc in targets:
        path.write_text(serialize(doc), encoding="utf-8")
        written.append(str(path))
    return written


# subcommands


def cmd_parse(args, cfg) -> int:
    pairs = _load(args.paths)
    if args.canonical:
        if getattr(args, "format", "text") == "json":
            _emit(args, {"files": {str(p): serialize(d) for p, d in pairs}}, "")
        else:
            for _, d in pairs:
                sys.stdout.write(serialize(d))
        return EXIT_OK
    files = []
    for path, d in pairs:
        files.append(
            {
                "path": str(path),
                "theory": d.name,
                "imports": list(d.imports),
                "lines": d.raw_line_count,
                "blocks": [
                    {"kind": b.kind, "name": b.name, "span": list(b.span), "annotated": b.annotation is not None}
                    for b in d.blocks
                ],
            }
        )
    text = "\n".join(
        f"{f['path']}: theory {f['theory']}, {len(f['blocks'])} blocks, {f['lines']} lines" for f in files
    )
    _emit(args, {"files": files}, text)
    return EXIT_OK


def cmd_census(args, cfg) -> int:
    docs = [d for _, d in _load(args.paths)]
    tc, sc = tactic_census(docs), structure_census(docs)
    text = "\n".join(
        [f"{k:<12} {v}" for k, v in tc.to_dict().items()]
        + [""]
        + [f"{k:<12} {v}" for k, v in sc.to_dict().items()]
    )
    _emit(args, {"tactics": tc.to_dict(), "structure": sc.to_dict()}, text)
    return EXIT_OK


def cmd_sizes(args, cfg) -> int:
    report = proof_size_report([d for _, d in _load(args.paths)], attach=args.attach)
    rows = [f"{'result':<24} {'section':>7} {'direct':>7} {'section_lines':>13} {'helpers':>7}"]
    for e in report.per_result:
        rows.append(f"{e.name:<24} {e.section:>7} {e.direct_lines:>7} {e.section_lines:>13} {e.helper_count:>7}")
    ratio = "n/a" if report.helper_ratio is None else f"{float(report.helper_ratio):.2f}"
    rows.append(f"helper ratio {ratio}; orphans {len(report.orphans)}")
    _emit(args, report.to_dict(), "\n".join(rows))
    return EXIT_OK


def cmd_sorries(args, cfg) -> int:
    sites = locate_sorries([d for _, d in _load(args.paths)])
    data = {"count": len(sites), "sites": [{"goal": str(s.goal), "goal_text": s.goal_text} for s in sites]}
    text = "\n".join([str(len(sites))] + [f"{s.goal}  {s.goal_text}" for s in sites])
    _emit(args, data, text)
    return EXIT_DOMAIN if sites else EXIT_OK


def _region(text: Optional[str]) -> Optional[tuple[int, int]]:
    if text is None:
        return None
    try:
        a, b = (int(x) for x in text.split(":", 1))
    except ValueError:
        raise UsageError(f"--new-region expects A:B, got {text!r}") from None
    if a < 1 or b < a:
        raise UsageError(f"--new-region {text}: need 1 <= A <= B")
    return a, b


def cmd_validate(args, cfg) -> int:
    region = _region(args.new_region)
    violations = []
    lines = []
    for path, doc in _load(args.paths):
        for v in validate_skeleton(doc, region):
            _, _, step = resolve(doc, v.goal)
            violations.append(
                {"file": str(path), "line": step.span[1], "goal": str(v.goal), "method": v.offending_method.raw_text}
            )
            lines.append(f"{path}:{step.span[1]}: '{v.offending_method.raw_text}' not allowed ({v.rule_text})")
    lines.append(f"{len(violations)} violation(s)")
    _emit(args, {"violations": violations, "count": len(violations)}, "\n".join(lines))
    return EXIT_DOMAIN if violations else EXIT_OK


def cmd_run(args, cfg) -> int:
    pairs = _load(args.paths)
    backend = _backend(cfg)
    decomposer = CommandDecomposer(cfg.decomposer_command) if cfg.decomposer_command else None
    wcfg = WorkflowConfig(cfg.hammer_timeout_s, cfg.workers, cfg.max_iterations)
    docs, report = run_to_zero([d for _, d in pairs], backend, decomposer, wcfg)
    written = _write_back(args, pairs, docs)
    remaining = len(locate_sorries(docs))
    data = report.to_dict()
    data["remaining_sorries"] = remaining
    data["written"] = written
    lines = [
        f"iterations {report.iterations}, resolved {len(report.resolved)}, "
        f"unresolved {len(report.unresolved)}, check time {report.total_check_ms} ms"
    ]
    lines += [f"unresolved {g}  {t}" for g, t in report.unresolved]
    lines += [f"violation {v.describe()}" for v in report.violations]
    if report.exhausted:
        lines.append(f"stopped after max_iterations={cfg.max_iterations}")
    lines += [f"wrote {w}" for w in written]
    _emit(args, data, "\n".join(lines))
    return EXIT_OK if report.success and not report.violations else EXIT_DOMAIN


def cmd_profile(args, cfg) -> int:
    docs = [d for _, d in _load(args.paths)]
    prof = profile(docs, _backend(cfg), slow_threshold_ms=cfg.slow_threshold_ms, workers=cfg.workers)
    passed, _ = budget_check(prof, cfg.session_budget_ms)
    _emit(args, prof.to_dict(cfg.session_budget_ms), format_profile(prof, cfg.session_budget_ms))
    return EXIT_OK if passed and not prof.regressions else EXIT_DOMAIN


def cmd_swap(args, cfg) -> int:
    pairs = _load(args.paths)
    docs = [d for _, d in pairs]
    backend = _backend(cfg)
    prof = profile(docs, backend, slow_threshold_ms=cfg.slow_threshold_ms, workers=cfg.workers)
    heads = tuple(h.strip() for h in args.heads.split(",") if h.strip())
    proposals = propose_swaps(prof, docs, backend, heads=heads, target=args.target)
    new_docs = apply_swaps(docs, proposals)
    after = profile(new_docs, backend, slow_threshold_ms=cfg.slow_threshold_ms, workers=cfg.workers)
    written = _write_back(args, pairs, new_docs)
    passed, margin = budget_check(after, cfg.session_budget_ms)
    data = {
        "proposals": [p.to_dict() for p in proposals],
        "total_ms_before": prof.total_ms,
        "total_ms_after": after.total_ms,
        "budget_pass": passed,
        "budget_margin_ms": margin,
        "written": written,
    }
    lines = []
    for p in proposals:
        state = "verified" if p.verified else "unverified"
        new = "-" if p.new_ms is None else f"{p.new_ms} ms"
        lines.append(f"{p.goal}  {p.from_head} -> {p.to_head}  {p.old_ms} ms -> {new}  {state}")
    ratio = f" ({prof.total_ms / after.total_ms:.1f}x)" if after.total_ms else ""
    lines.append(f"total {prof.total_ms} ms -> {after.total_ms} ms{ratio}")
    lines.append(f"budget {cfg.session_budget_ms} ms: {'pass' if passed else 'FAIL'} (margin {margin} ms)")
    lines += [f"wrote {w}" for w in written]
    _emit(args, data, "\n".join(lines))
    return EXIT_OK if passed and not after.regressions else EXIT_DOMAIN


def cmd_plan_split(args, cfg) -> int:
    try:
        if args.units == "-":
            units = parse_units(sys.stdin)
        else:
            units = parse_units(Path(args.units).read_text(encoding="utf-8").splitlines())
    except OSError as exc:
        raise UsageError(f"cannot read {args.units}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    plan = plan_split(units, args.model)
    _emit(args, plan.to_dict(), format_plan(plan))
    return EXIT_OK


def cmd_analyze_log(args, cfg) -> int:
    fmap = {}
    for item in args.field:
        if "=" not in item:
            raise UsageError(f"--field expects NAME=SOURCE, got {item!r}")
        k, v = item.split("=", 1)
        fmap[k.strip()] = v.strip()
    try:
        result = ingest_path(args.log, field_map=fmap, count_only=args.count_only)
    except OSError as exc:
        print(f"proofforge: cannot read {args.log}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    for d in result.diagnostics[:20]:
        print(d.format(args.log), file=sys.stderr)
    if len(result.diagnostics) > 20:
        print(f"... {len(result.diagnostics) - 20} more malformed lines", file=sys.stderr)
    if args.count_only:
        _emit(
            args,
            {"records": result.count, "malformed": result.malformed},
            f"{result.count} records, {result.malformed} malformed",
        )
        return EXIT_OK
    stats = compute_stats(result.records, cfg.automated_prompt_prefix)
    data = {"stats": stats.to_dict(), "records": result.count, "malformed": result.malformed}
    text = format_stats(stats)
    if args.themes:
        rules = load_theme_rules(cfg.theme_rules_path)
        report = intervention_report(result.records, rules, cfg.automated_prompt_prefix)
        data["interventions"] = report.to_dict()
        text += "\n\n" + "\n".join(f"{t:<24} {n}" for t, n in report.counts().items())
    _emit(args, data, text)
    return EXIT_OK


COMMANDS = {
    "parse": cmd_parse,
    "census": cmd_census,
    "sizes": cmd_sizes,
    "sorries": cmd_sorries,
    "validate": cmd_validate,
    "run": cmd_run,
    "profile": cmd_profile,
    "swap": cmd_swap,
    "plan-split": cmd_plan_split,
    "analyze-log": cmd_analyze_log,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = _config(args)
    except ConfigError as exc:
        print(f"proofforge: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "show_config", False):
        _emit(args, {"config": cfg.to_dict()}, cfg.render())
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("proofforge: error: a subcommand is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, cfg)
    except _ParseFailed:
        return EXIT_USAGE
    except (UsageError, ConfigError) as exc:
        print(f"proofforge: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TransportError, UnresolvedGoalError) as exc:
        print(f"proofforge: backend error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
