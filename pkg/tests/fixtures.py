"""Workflow and profiler fixtures shared by unit and acceptance tests."""

from __future__ import annotations

import random
import threading

from proofforge.backend import MockBackend
from proofforge.goals import goal_text_at, normalize_goal
from proofforge.parser import parse_theory

LEAF_HEADS = ("simp", "blast", "auto", "metis", "fast")


class SkeletonCorpus:
    """Sorry-only theories whose leaves are known to the generator.

    Goals are either a single leaf or a conjunction of 2-4 leaves; leaves
    are atoms or implications, which the built-in splitter leaves whole.
    """

    def __init__(self, seed: int, n_sites: int, files: int = 4):
        self.rng = random.Random(seed)
        self.leaves: dict[str, tuple[str, int]] = {}
        self.texts: dict[str, str] = {}
        self.sites = 0
        self._counter = 0
        per_file = [n_sites // files + (1 if i < n_sites % files else 0) for i in range(files)]
        for i, n in enumerate(per_file):
            name = f"Sk{seed}_{i}"
            self.texts[name] = self._theory(name, n)

    def _leaf(self) -> str:
        self._counter += 1
        k = self._counter
        leaf = f"p{k} x" if self.rng.random() < 0.7 else f"q{k} x ⟶ r{k} x"
        self.leaves[leaf] = (self.rng.choice(LEAF_HEADS), self.rng.randint(5, 3000))
        return leaf

    def _goal(self) -> str:
        if self.rng.random() < 0.5:
            return self._leaf()
        leaves = [self._leaf() for _ in range(self.rng.randint(2, 4))]
        return " ∧ ".join(f"({l})" if "⟶" in l else l for l in leaves)

    def _theory(self, name: str, n_sites: int) -> str:
        lines = [f"theory {name}", "  imports Main", "begin"]
        left, b = n_sites, 0
        while left > 0:
            lines.append("")
            if left == 1 or self.rng.random() < 0.3:
                lines += [f'lemma t{b}: "{self._goal()}"', "  sorry"]
                left -= 1
            else:
                k = min(left - 1, self.rng.randint(1, 4))
                lines += [f'lemma t{b}: "{self._goal()}"', "proof -"]
                for j in range(k):
                    lines.append(f'  have h{j}: "{self._goal()}" sorry')
                facts = " ".join(f"h{j}" for j in range(k))
                lines.append(f"  show ?thesis using {facts} sorry")
                lines.append("qed")
                left -= k + 1
            b += 1
        self.sites += n_sites
        lines += ["", "end"]
        return "\n".join(lines) + "\n"

    def documents(self):
        return [parse_theory(t, n) for n, t in self.texts.items()]

    def table(self, omit: tuple[str, ...] = ()) -> dict:
        return {(leaf, head): ("proved", ms) for leaf, (head, ms) in self.leaves.items() if leaf not in omit}


class RecordingBackend:
    """Wraps a backend and remembers every (file, block, goal, method) it proved."""

    def __init__(self, inner: MockBackend):
        self.inner = inner
        self.verified: set[tuple[str, str, str, str]] = set()
        self._lock = threading.Lock()

    def check(self, document, goal, method, timeout_ms):
        r = self.inner.check(document, goal, method, timeout_ms)
        if r.proved:
            block = document.block(goal.block)
            key = (goal.file, goal.block, normalize_goal(goal_text_at(block, goal.step_path)), method.raw_text)
            with self._lock:
                self.verified.add(key)
        return r

    def hammer(self, documents, goals, per_goal_timeout_ms=10_000, workers=1):
        return self.inner.hammer(documents, goals, per_goal_timeout_ms, workers)

    @property
    def calls(self) -> int:
        return self.inner.calls


def unverified_methods(documents, verified, baseline=frozenset()):
    """Methods present in ``documents`` that are neither sorry nor verified."""
    bad = []
    for doc in documents:
        for block in doc.blocks:
            if block.proof is None:
                continue
            for path, step in block.proof.walk():
                if step.method is None or step.method.is_sorry:
                    continue
                key = (doc.name, block.name, normalize_goal(goal_text_at(block, path)), step.method.raw_text)
                if key not in verified and key not in baseline:
                    bad.append(key)
    return bad


def swap_scenario_text(steps: int = 10, name: str = "Ch5_8") -> str:
    """Equality-free topology-style goals, each currently closed by a slow metis."""
    lines = [f"theory {name}", "  imports Main", "begin"]
    for i in range(steps):
        lines += ["", f'lemma open_step_{i}: "open U{i} ⟶ U{i} ∈ T"', f"  by (metis open_def T{i})"]
    lines += ["", "end"]
    return "\n".join(lines) + "\n"


def swap_scenario_table(steps: int = 10, metis_ms: int = 11_500, meson_ms: int = 1_150) -> dict:
    t = {}
    for i in range(steps):
        g = f"open U{i} ⟶ U{i} ∈ T"
        t[(g, "metis")] = ("proved", metis_ms)
        t[(g, "meson")] = ("proved", meson_ms)
    return t


def random_swap_case(rng: random.Random):
    """A short theory mixing equality and equality-free goals with scripted timings."""
    n = rng.randint(1, 12)
    lines, table = [], {}
    for i in range(n):
        eq = rng.random() < 0.3
        goal = f"f{i} x = g{i} x" if eq else f"open U{i} ⟶ U{i} ∈ T"
        head = rng.choice(("metis", "metis", "blast", "simp"))
        lines += [f'lemma s{i}: "{goal}"', f"  by {head}", ""]
        table[(goal, head)] = ("proved", rng.randint(1, 20_000))
        if rng.random() < 0.7:
            table[(goal, "meson")] = ("proved", rng.randint(1, 25_000))
    return parse_theory("\n".join(lines), "Rnd"), table


def brute_force_split(ms, weights, model="session"):
    """Independent objective: enumerate every (cut, edited unit) pair directly."""
    from fractions import Fraction

    n = len(ms)
    total_w = sum(weights)
    w = [Fraction(x) / total_w for x in weights]
    best = None
    for cut in range(n + 1):
        cost = Fraction(0)
        for i in range(n):
            if model == "session":
                rebuilt = range(cut, n) if i >= cut else range(n)
                cost += w[i] * sum(ms[j] for j in rebuilt)
            else:
                refreeze = sum(ms[:cut]) if i < cut else 0
                cost += w[i] * (sum(ms[max(i, cut) if i >= cut else i:]) + refreeze)
        if best is None or cost <= best[1]:
            best = (cut, cost)
    return best


def mock_json(table: dict) -> dict:
    return {"entries": [{"goal": g, "method": m, "verdict": v, "ms": ms} for (g, m), (v, ms) in table.items()]}
