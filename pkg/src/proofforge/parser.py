"""Tokenizer, parser and canonical serializer for the theory subset.

The grammar is documented in ``docs/grammar.md``. Statements and goals are
kept as opaque text; only proof structure and closing methods are parsed.
Anything outside the subset is reported as a diagnostic with a line and
column. Serialization is canonical: ``parse(serialize(d)) == d`` holds for
every document obtained from canonical text, and serialization is an
idempotent normal form for everything else.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass
from typing import Optional

from .model import (
    Block,
    ParseDiagnostic,
    ProofStep,
    ProofTree,
    SourceAnnotation,
    TacticCall,
    TheoryDocument,
)

TOP_KEYWORDS = frozenset({"definition", "lemma", "theorem", "corollary"})
STEP_KEYWORDS = frozenset({"have", "show", "obtain"})
# recognised by name only, so the diagnostic can say what is unsupported
UNSUPPORTED_COMMANDS = frozenset(
    {
        "fix",
        "assume",
        "presume",
        "then",
        "hence",
        "thus",
        "from",
        "with",
        "moreover",
        "ultimately",
        "note",
        "let",
        "define",
        "case",
        "next",
        "also",
        "finally",
        "apply",
        "oops",
        "consider",
        "interpret",
        "include",
        "including",
    }
)
_PROOF_WORDS = frozenset({"proof", "by", "sorry", "done", "using", "unfolding", "sledgehammer"})
_BOUNDARY_WORDS = (
    TOP_KEYWORDS
    | STEP_KEYWORDS
    | UNSUPPORTED_COMMANDS
    | _PROOF_WORDS
    | {"qed", "end", "theory", "imports", "begin"}
)


class TheorySyntaxError(ValueError):
    """Raised by :func:`parse_theory` when the text is outside the subset."""

    def __init__(self, diagnostics: list[ParseDiagnostic]):
        self.diagnostics = diagnostics
        first = next((d for d in diagnostics if d.severity == "error"), diagnostics[0])
        super().__init__(f"line {first.line}, column {first.column}: {first.message}")


class _Fail(Exception):
    def __init__(self, line: int, column: int, message: str):
        self.diag = ParseDiagnostic(line, column, message, "error")


@dataclass(frozen=True)
class Token:
    kind: str  # word | quoted | cartouche | comment | sym
    text: str
    start: int
    end: int
    line: int
    col: int


_WORD_RE = re.compile(r"\??[A-Za-z_][A-Za-z0-9_'.]*|\d+")
_SPACE_RE = re.compile(r"\s+")


class _Lines:
    def __init__(self, text: str):
        self.starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def pos(self, offset: int) -> tuple[int, int]:
        i = bisect.bisect_right(self.starts, offset) - 1
        return i + 1, offset - self.starts[i] + 1


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into tokens; quotes, cartouches and comments are atomic."""
    lines = _Lines(text)
    tokens: list[Token] = []
    i, n = 0, len(text)

    def tok(kind: str, value: str, start: int, end: int) -> None:
        line, col = lines.pos(start)
        tokens.append(Token(kind, value, start, end, line, col))

    while i < n:
        c = text[i]
        if c.isspace():
            i = _SPACE_RE.match(text, i).end()
        elif text.startswith("(*", i):
            depth, j = 0, i
            while j < n:
                if text.startswith("(*", j):
                    depth += 1
                    j += 2
                elif text.startswith("*)", j):
                    depth -= 1
                    j += 2
                    if depth == 0:
                        break
                else:
                    j += 1
            if depth:
                raise _Fail(*lines.pos(i), "unterminated comment")
            tok("comment", text[i:j], i, j)
            i = j
        elif c == '"':
            j = text.find('"', i + 1)
            if j < 0:
                raise _Fail(*lines.pos(i), "unterminated quote")
            tok("quoted", text[i + 1 : j], i, j + 1)
            i = j + 1
        elif c == "‹":
            depth, j = 0, i
            while j < n:
                if text[j] == "‹":
                    depth += 1
                elif text[j] == "›":
                    depth -= 1
                    if depth == 0:
                        break
                j += 1
            if depth:
                raise _Fail(*lines.pos(i), "unterminated cartouche")
            tok("cartouche", text[i + 1 : j], i, j + 1)
            i = j + 1
        else:
            m = _WORD_RE.match(text, i)
            if m:
                tok("word", m.group(), i, m.end())
                i = m.end()
            elif text.startswith("::", i):
                tok("sym", "::", i, i + 2)
                i += 2
            else:
                tok("sym", c, i, i + 1)
                i += 1
    return tokens


def split_arguments(text: str) -> tuple[str, ...]:
    """Whitespace split that keeps brackets, quotes and cartouches intact."""
    out: list[str] = []
    cur: list[str] = []
    depth = 0
    quote = False
    cart = 0
    for ch in text:
        if quote:
            cur.append(ch)
            quote = ch != '"'
            continue
        if cart:
            cur.append(ch)
            cart += {"‹": 1, "›": -1}.get(ch, 0)
            continue
        if ch == '"':
            quote = True
        elif ch == "‹":
            cart = 1
        elif ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if ch.isspace() and depth == 0:
            if cur:
                out.append("".join(cur))
                cur = []
            continue
        cur.append(ch)
    if cur:
        out.append("".join(cur))
    return tuple(out)


class _Parser:
    def __init__(self, text: str, name: str):
        self.text = text
        self.default_name = name
        self.warnings: list[ParseDiagnostic] = []
        raw = tokenize(text)
        self.toks: list[Token] = []
        self.annotations: dict[int, SourceAnnotation] = {}
        self._sort_comments(raw)
        self.i = 0

    # comments are dropped with a warning unless they annotate the next block
    def _sort_comments(self, raw: list[Token]) -> None:
        pending: Optional[tuple[Token, SourceAnnotation]] = None
        for t in raw:
            if t.kind != "comment":
                if pending is not None:
                    ctok, ann = pending
                    if t.kind == "word" and t.text in TOP_KEYWORDS:
                        self.annotations[len(self.toks)] = ann
                    else:
                        self._warn(ctok, "source annotation not followed by a block; dropped")
                    pending = None
                self.toks.append(t)
                continue
            if pending is not None:
                self._warn(pending[0], "source annotation not followed by a block; dropped")
                pending = None
            ann = SourceAnnotation.from_comment(t.text)
            if ann is not None:
                pending = (t, ann)
            else:
                self._warn(t, "comment dropped")
        if pending is not None:
            self._warn(pending[0], "source annotation at end of file; dropped")

    def _warn(self, t: Token, message: str) -> None:
        self.warnings.append(ParseDiagnostic(t.line, t.col, message, "warning"))

    # token helpers
    def peek(self, k: int = 0) -> Optional[Token]:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def at_word(self, *words: str) -> bool:
        t = self.peek()
        return t is not None and t.kind == "word" and t.text in words

    def at_sym(self, sym: str) -> bool:
        t = self.peek()
        return t is not None and t.kind == "sym" and t.text == sym

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, message: str, t: Optional[Token] = None) -> _Fail:
        t = t or self.peek()
        if t is None:
            line, col = _Lines(self.text).pos(len(self.text))
            return _Fail(line, col, message)
        return _Fail(t.line, t.col, message)

    def expect_word(self, what: str) -> Token:
        t = self.peek()
        if t is None or t.kind != "word" or t.text in _BOUNDARY_WORDS:
            raise self.fail(f"expected {what}")
        return self.advance()

    def expect_keyword(self, word: str) -> Token:
        if not self.at_word(word):
            raise self.fail(f"expected '{word}'")
        return self.advance()

    def last_line(self) -> int:
        return self.toks[self.i - 1].line

    # grammar
    def parse(self) -> TheoryDocument:
        name, imports, header = self.default_name, (), False
        if self.at_word("theory"):
            header = True
            self.advance()
            name = self.expect_word("theory name").text
            imps = []
            if self.at_word("imports"):
                self.advance()
                while (t := self.peek()) is not None and not (
                    t.kind == "word" and t.text == "begin"
                ):
                    if t.kind not in ("word", "quoted"):
                        raise self.fail("expected import name")
                    self.advance()
                    imps.append(self.text[t.start : t.end])
            self.expect_keyword("begin")
            imports = tuple(imps)
        blocks: list[Block] = []
        while True:
            t = self.peek()
            if t is None:
                if header:
                    raise self.fail("missing 'end' of theory")
                break
            if t.kind == "word" and t.text == "end" and header:
                self.advance()
                if self.peek() is not None:
                    raise self.fail("text after 'end' of theory")
                break
            if t.kind == "word" and t.text == "qed":
                raise self.fail("unbalanced 'qed' without matching 'proof'", t)
            if t.kind == "word" and t.text == "proof":
                raise self.fail("'proof' outside of a lemma", t)
            if t.kind != "word" or t.text not in TOP_KEYWORDS:
                shown = t.text if t.kind != "quoted" else '"…"'
                raise self.fail(f"unknown top-level keyword '{shown}'", t)
            ann = self.annotations.get(self.i)
            if t.text == "definition":
                blocks.append(self._definition(ann))
            else:
                blocks.append(self._result(ann))
        return TheoryDocument(
            name=name,
            imports=imports,
            blocks=tuple(blocks),
            raw_line_count=len(self.text.splitlines()),
            header=header,
        )

    def _definition(self, ann: Optional[SourceAnnotation]) -> Block:
        kw = self.advance()
        name = self.expect_word("definition name").text
        first = self.peek()
        if self.at_sym("::"):
            self.advance()
            t = self.peek()
            if t is None or t.kind not in ("quoted", "cartouche", "word"):
                raise self.fail("expected type after '::'")
            self.advance()
        self.expect_keyword("where")
        body = self.peek()
        if body is None or body.kind not in ("quoted", "cartouche"):
            raise self.fail("expected quoted definition body after 'where'")
        self.advance()
        stmt = self.text[first.start : body.end]
        return Block("definition", name, stmt, None, ann, (kw.line, body.line))

    def _result(self, ann: Optional[SourceAnnotation]) -> Block:
        kw = self.advance()
        name = self.expect_word(f"{kw.text} name").text
        if self.at_sym("["):
            raise self.fail("theorem attributes are not supported")
        if not self.at_sym(":"):
            raise self.fail(f"expected ':' after {kw.text} name")
        self.advance()
        first = self.peek()
        last = None
        saw_prop = False
        while True:
            t = self.peek()
            if t is not None and t.kind == "word" and t.text == "qed":
                raise self.fail("unbalanced 'qed' without matching 'proof'", t)
            if t is None or (t.kind == "word" and t.text in TOP_KEYWORDS | {"end"}):
                raise self.fail(f"{kw.text} {name} has no proof", t)
            if t.kind == "word" and t.text in _PROOF_WORDS:
                break
            saw_prop = saw_prop or t.kind in ("quoted", "cartouche")
            last = self.advance()
        if last is None or not saw_prop:
            raise self.fail(f"{kw.text} {name} has no quoted statement", first)
        stmt = self.text[first.start : last.end]
        if self.at_word("proof"):
            proof = ProofTree(tuple(self._proof_block()))
        else:
            start = self.peek().line
            steps = self._tail("terminal", start)
            proof = ProofTree(tuple(steps))
        self._check_labels(proof)
        return Block(kw.text, name, stmt, proof, ann, (kw.line, proof.span[1]))

    def _check_labels(self, tree: ProofTree) -> None:
        seen: set[str] = set()
        for _, step in tree.walk():
            if step.label is None:
                continue
            if step.label in seen:
                raise _Fail(step.span[0], 1, f"duplicate label '{step.label}'")
            seen.add(step.label)

    def _facts(self) -> tuple[str, ...]:
        facts: list[str] = []
        while (t := self.peek()) is not None:
            if t.kind == "cartouche":
                self.advance()
                facts.append(self.text[t.start : t.end])
                continue
            if t.kind != "word" or t.text in _BOUNDARY_WORDS:
                break
            self.advance()
            end = t.end
            # adjacent [OF ...] / (1) suffixes belong to the fact
            while (s := self.peek()) is not None and s.start == end and s.text in ("[", "("):
                end = self._skip_group()
            facts.append(self.text[t.start : end])
        if not facts:
            raise self.fail("expected fact names")
        return tuple(facts)

    def _skip_group(self) -> int:
        open_tok = self.advance()
        close = {"[": "]", "(": ")"}[open_tok.text]
        depth = 1
        while depth:
            t = self.peek()
            if t is None:
                raise self.fail(f"unbalanced '{open_tok.text}'", open_tok)
            self.advance()
            if t.kind == "sym" and t.text == open_tok.text:
                depth += 1
            elif t.kind == "sym" and t.text == close:
                depth -= 1
        return self.toks[self.i - 1].end

    def _tail(
        self,
        kind: str,
        start_line: int,
        label: Optional[str] = None,
        goal: Optional[str] = None,
        variables: tuple[str, ...] = (),
    ) -> list[ProofStep]:
        using: tuple[str, ...] = ()
        if self.at_word("using"):
            self.advance()
            using = self._facts()
        timeout = None
        if self.at_word("sledgehammer"):
            timeout = self._directive()
        if self.at_word("proof"):
            if kind == "terminal":
                raise self.fail("'using' before a top-level proof block is not supported")
            if timeout is not None:
                raise self.fail("sledgehammer directive before a proof block")
            step = ProofStep(
                kind,
                label,
                goal,
                using,
                None,
                (),
                (start_line, self.last_line()),
                variables,
            )
            return [step] + self._proof_block()
        method = self._tactic()
        step = ProofStep(
            kind,
            label,
            goal,
            using,
            method,
            (),
            (start_line, self.last_line()),
            variables,
            timeout,
        )
        return [step]

    def _directive(self) -> int:
        self.advance()
        if not self.at_sym("["):
            return 0
        open_tok = self.advance()
        if not self.at_word("timeout"):
            raise self.fail("only the timeout parameter is supported for sledgehammer")
        self.advance()
        if not self.at_sym("="):
            raise self.fail("expected '=' in sledgehammer parameters")
        self.advance()
        t = self.peek()
        if t is None or t.kind != "word" or not t.text.isdigit():
            raise self.fail("expected a timeout in seconds")
        self.advance()
        if not self.at_sym("]"):
            raise self.fail("unbalanced '['", open_tok)
        self.advance()
        return int(t.text)

    def _tactic(self) -> TacticCall:
        unfolding: tuple[str, ...] = ()
        if self.at_word("unfolding"):
            self.advance()
            unfolding = self._facts()
        t = self.peek()
        if t is not None and t.kind == "word" and t.text in ("sorry", "done"):
            if t.text == "sorry" and unfolding:
                raise self.fail("'unfolding' before sorry is not supported", t)
            self.advance()
            return TacticCall(t.text, (), unfolding)
        if not self.at_word("by"):
            raise self.fail("expected proof method ('by', 'sorry' or 'done')")
        self.advance()
        t = self.peek()
        if t is not None and t.kind == "sym" and t.text == "(":
            open_tok = t
            end = self._skip_group()
            inner = self.text[open_tok.end : end - 1]
            m = re.match(r"\s*([A-Za-z_][A-Za-z0-9_'.]*)", inner)
            if m is None:
                raise self.fail("expected method name inside parentheses", open_tok)
            head = m.group(1)
            args = split_arguments(inner[m.end() :])
        elif t is not None and t.kind == "word" and t.text not in _BOUNDARY_WORDS:
            self.advance()
            head = t.text
            args = ()
            s = self.peek()
            if s is not None and s.kind == "sym" and s.text in "+?" and s.start == t.end:
                self.advance()
                args = (s.text,)
        else:
            raise self.fail("expected method after 'by'")
        if head == "sorry":
            raise self.fail("'by sorry' is not supported; use sorry", t)
        nxt = self.peek()
        if nxt is not None and (
            (nxt.kind == "sym" and nxt.text == "(")
            or (nxt.kind == "word" and nxt.text not in _BOUNDARY_WORDS)
        ):
            raise self.fail("a second closing method after 'by' is not supported", nxt)
        return TacticCall(head, args, unfolding)

    def _goal(self) -> str:
        t = self.peek()
        if t is not None and t.kind in ("quoted", "cartouche"):
            self.advance()
            return t.text
        if t is not None and t.kind == "word" and t.text == "?thesis":
            self.advance()
            return "?thesis"
        raise self.fail("expected quoted goal")

    def _label(self) -> Optional[str]:
        t, s = self.peek(), self.peek(1)
        if (
            t is not None
            and t.kind == "word"
            and t.text not in _BOUNDARY_WORDS
            and not t.text.startswith("?")
            and s is not None
        ):
            if s.kind == "sym" and s.text == ":":
                self.advance()
                self.advance()
                return t.text
            if s.kind == "sym" and s.text == "[":
                raise self.fail("fact attributes are not supported", s)
        return None

    def _proof_block(self) -> list[ProofStep]:
        open_tok = self.expect_keyword("proof")
        opener = ""
        if self.at_sym("-"):
            self.advance()
            opener = "-"
        elif self.at_sym("(") or (
            (t := self.peek()) is not None and t.kind == "word" and t.text not in _BOUNDARY_WORDS
        ):
            raise self.fail("'proof' with an initial method is not supported")
        children: list[ProofStep] = []
        while True:
            t = self.peek()
            if t is None or (t.kind == "word" and t.text in TOP_KEYWORDS | {"end"}):
                raise _Fail(
                    open_tok.line,
                    open_tok.col,
                    f"unbalanced 'proof' at line {open_tok.line}: no matching 'qed'",
                )
            if t.kind != "word":
                raise self.fail("expected proof step")
            if t.text == "qed":
                self.advance()
                children.append(ProofStep("qed", span=(t.line, t.line)))
                nxt = self.peek()
                if nxt is not None and (
                    (nxt.kind == "sym" and nxt.text == "(")
                    or (nxt.kind == "word" and nxt.text not in _BOUNDARY_WORDS)
                ):
                    raise self.fail("'qed' with a closing method is not supported", nxt)
                break
            if t.text in ("have", "show"):
                self.advance()
                label = self._label()
                goal = self._goal()
                children.extend(self._tail(t.text, t.line, label, goal))
            elif t.text == "obtain":
                self.advance()
                names = []
                while not self.at_word("where"):
                    v = self.peek()
                    if v is None or v.kind != "word" or v.text in _BOUNDARY_WORDS:
                        raise self.fail("expected variable names and 'where' after obtain")
                    names.append(self.advance().text)
                if not names:
                    raise self.fail("obtain needs at least one variable")
                self.advance()
                label = self._label()
                goal = self._goal()
                children.extend(self._tail("obtain", t.line, label, goal, tuple(names)))
            elif t.text == "proof":
                raise self.fail("proof block without a preceding goal")
            elif t.text in UNSUPPORTED_COMMANDS:
                raise self.fail(f"unsupported proof command '{t.text}'")
            else:
                raise self.fail(f"unexpected '{t.text}' in proof")
        end_line = children[-1].span[1]
        return [ProofStep("proof_block", children=tuple(children), span=(open_tok.line, end_line), opener=opener)]


def parse_theory_with_diagnostics(
    source_text: str, name: str = ""
) -> tuple[Optional[TheoryDocument], list[ParseDiagnostic]]:
    """Parse ``source_text``; returns ``(document or None, diagnostics)``.

    ``name`` is used only when the text has no ``theory`` header. A
    document is returned iff no diagnostic has error severity.
    """
    try:
        p = _Parser(source_text, name)
    except _Fail as exc:
        return None, [exc.diag]
    try:
        doc = p.parse()
    except _Fail as exc:
        return None, p.warnings + [exc.diag]
    return doc, p.warnings


def parse_theory(source_text: str, name: str = "") -> TheoryDocument:
    doc, diags = parse_theory_with_diagnostics(source_text, name)
    if doc is None:
        raise TheorySyntaxError(diags)
    return doc


def parse_tactic(text: str) -> TacticCall:
    """Parse a standalone method such as ``by (simp add: foo)`` or ``sorry``."""
    try:
        p = _Parser(text, "")
        call = p._tactic()
        if p.peek() is not None:
            raise p.fail("trailing text after method")
    except _Fail as exc:
        raise TheorySyntaxError([exc.diag]) from None
    return call


# serialization


def _quote(goal: str) -> str:
    if goal == "?thesis":
        return goal
    if '"' in goal:
        return f"‹{goal}›"
    return f'"{goal}"'


def _step_lines(step: ProofStep, indent: int) -> list[str]:
    pad = "  " * indent
    if step.kind == "proof_block":
        head = pad + ("proof -" if step.opener == "-" else "proof")
        out = [head]
        for child in step.children[:-1]:
            out.extend(_step_lines(child, indent + 1))
        out.append(pad + "qed")
        return out
    if step.kind == "qed":
        return [pad + "qed"]
    parts: list[str] = []
    if step.kind in ("have", "show"):
        label = f" {step.label}:" if step.label else ""
        parts.append(f"{step.kind}{label} {_quote(step.goal_text)}")
    elif step.kind == "obtain":
        label = f" {step.label}:" if step.label else ""
        parts.append(
            f"obtain {' '.join(step.variables)} where{label} {_quote(step.goal_text)}"
        )
    if step.using_facts:
        parts.append("using " + " ".join(step.using_facts))
    if step.method is None:
        return [pad + " ".join(parts)]
    if step.hammer_timeout is not None:
        directive = (
            "sledgehammer"
            if step.hammer_timeout == 0
            else f"sledgehammer [timeout = {step.hammer_timeout}]"
        )
        inner = pad + "  " if step.kind != "terminal" else pad
        out = [pad + " ".join(parts)] if parts else []
        return out + [inner + directive, inner + step.method.raw_text]
    parts.append(step.method.raw_text)
    return [pad + " ".join(parts)]


def block_lines(block: Block) -> list[str]:
    if block.kind == "definition":
        return f"definition {block.name} {block.statement_text}".split("\n")
    if "\n" in block.statement_text:
        out = [f"{block.kind} {block.name}:"] + ("  " + block.statement_text).split("\n")
    else:
        out = [f"{block.kind} {block.name}: {block.statement_text}"]
    steps = block.proof.steps
    indent = 1 if steps[0].kind == "terminal" else 0
    for step in steps:
        out.extend(_step_lines(step, indent))
    return out


def serialize(document: TheoryDocument) -> str:
    """Render ``document`` in canonical layout (trailing newline included)."""
    lines: list[str] = []
    if document.header:
        lines.append(f"theory {document.name}")
        if document.imports:
            lines.append("  imports " + " ".join(document.imports))
        lines.append("begin")
    for block in document.blocks:
        if lines:
            lines.append("")
        if block.annotation is not None:
            lines.append(block.annotation.render())
        lines.extend(block_lines(block))
    if document.header:
        lines.extend(["", "end"])
    return "\n".join(lines) + "\n" if lines else ""


def canonicalize(document: TheoryDocument) -> TheoryDocument:
    """Re-parse the canonical rendering so spans match serialized text."""
    return parse_theory(serialize(document), document.name)


__all__ = [
    "TheorySyntaxError",
    "Token",
    "block_lines",
    "canonicalize",
    "parse_tactic",
    "parse_theory",
    "parse_theory_with_diagnostics",
    "serialize",
    "split_arguments",
    "tokenize",
]
