"""Corpus censuses: closing-method counts, proof-structure counts, proof sizes."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional

from .model import CENSUS_CATEGORIES, TheoryDocument


@dataclass(frozen=True)
class TacticCensus:
    counts: Mapping[str, int] = field(default_factory=dict)
    unfolding_count: int = 0

    def __post_init__(self) -> None:
        full = {c: 0 for c in CENSUS_CATEGORIES}
        full.update(self.counts)
        object.__setattr__(self, "counts", full)

    def __add__(self, other: "TacticCensus") -> "TacticCensus":
        counts = Counter(self.counts)
        counts.update(other.counts)
        return TacticCensus(dict(counts), self.unfolding_count + other.unfolding_count)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict:
        out = {c: self.counts[c] for c in CENSUS_CATEGORIES}
        out["unfolding"] = self.unfolding_count
        return out


@dataclass(frozen=True)
class StructureCensus:
    have_count: int = 0
    show_count: int = 0
    obtain_count: int = 0
    proof_block_count: int = 0

    def __add__(self, other: "StructureCensus") -> "StructureCensus":
        return StructureCensus(
            self.have_count + other.have_count,
            self.show_count + other.show_count,
            self.obtain_count + other.obtain_count,
            self.proof_block_count + other.proof_block_count,
        )

    def to_dict(self) -> dict:
        return {
            "have": self.have_count,
            "show": self.show_count,
            "obtain": self.obtain_count,
            "proof_block": self.proof_block_count,
        }


def tactic_census(documents: Iterable[TheoryDocument]) -> TacticCensus:
    counts: Counter[str] = Counter()
    unfolding = 0
    for doc in documents:
        for call in doc.tactic_calls():
            counts[call.category] += 1
            if call.unfolding_facts:
                unfolding += 1
    return TacticCensus(dict(counts), unfolding)


def structure_census(documents: Iterable[TheoryDocument]) -> StructureCensus:
    kinds: Counter[str] = Counter()
    for doc in documents:
        for block in doc.blocks:
            if block.proof is None:
                continue
            kinds.update(step.kind for _, step in block.proof.walk())
    return StructureCensus(kinds["have"], kinds["show"], kinds["obtain"], kinds["proof_block"])


@dataclass(frozen=True)
class ProofSizeEntry:
    name: str
    section: int
    direct_lines: int
    section_lines: int
    helper_count: int


@dataclass(frozen=True)
class ProofSizeReport:
    per_result: tuple[ProofSizeEntry, ...]
    helper_ratio: Optional[Fraction]
    orphans: tuple[str, ...] = ()
    section_lines: Mapping[int, int] = field(default_factory=dict)
    section_helpers: Mapping[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "per_result": [
                {
                    "name": e.name,
                    "section": e.section,
                    "direct_lines": e.direct_lines,
                    "section_lines": e.section_lines,
                    "helper_count": e.helper_count,
                }
                for e in self.per_result
            ],
            "helper_ratio": None if self.helper_ratio is None else float(self.helper_ratio),
            "orphans": list(self.orphans),
        }


def proof_size_report(
    documents: Iterable[TheoryDocument],
    section_map: Optional[Mapping[str, int]] = None,
    attach: str = "following",
) -> ProofSizeReport:
    """Direct and section-level proof sizes for every annotated result.

    Unannotated blocks join the section of the nearest following annotated
    result in the same document (``attach="preceding"`` flips this). A
    block that finds no such result is an orphan and counts nowhere.
    ``helper_count`` is the number of unannotated lemmas/theorems/corollaries
    in the section; definitions add to the line total but are not helpers.
    """
    if attach not in ("following", "preceding"):
        raise ValueError("attach must be 'following' or 'preceding'")
    section_map = dict(section_map or {})
    lines: Counter[int] = Counter()
    helpers: Counter[int] = Counter()
    results: list[tuple[str, int, int]] = []
    orphans: list[str] = []

    for doc in documents:
        blocks = list(doc.blocks)
        anchor: list[Optional[int]] = [None] * len(blocks)
        for i, b in enumerate(blocks):
            if b.annotation is not None:
                anchor[i] = section_map.get(b.name, b.annotation.section)
        order = range(len(blocks)) if attach == "preceding" else range(len(blocks) - 1, -1, -1)
        current: Optional[int] = None
        assigned: list[Optional[int]] = [None] * len(blocks)
        for i in order:
            b = blocks[i]
            if b.annotation is not None:
                assigned[i] = anchor[i]
                if b.is_result:
                    current = anchor[i]
            else:
                assigned[i] = current
        for i, b in enumerate(blocks):
            sec = assigned[i]
            if sec is None:
                orphans.append(f"{doc.name}.{b.name}" if doc.name else b.name)
                continue
            lines[sec] += b.extent
            if b.annotation is None and b.is_result:
                helpers[sec] += 1
            if b.annotation is not None and b.is_result:
                start, end = b.proof.span
                results.append((b.name, sec, end - start + 1))

    entries = tuple(
        ProofSizeEntry(name, sec, direct, lines[sec], helpers[sec]) for name, sec, direct in results
    )
    total_helpers = sum(helpers.values())
    ratio = Fraction(total_helpers, len(results)) if results else None
    return ProofSizeReport(entries, ratio, tuple(orphans), dict(lines), dict(helpers))


__all__ = [
    "ProofSizeEntry",
    "ProofSizeReport",
    "StructureCensus",
    "TacticCensus",
    "proof_size_report",
    "structure_census",
    "tactic_census",
]
