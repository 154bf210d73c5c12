"""Choose how much of a linear build chain to freeze into a cached image.

Two cost models are offered for an edit landing on unit ``i`` with the
chain cached up to (not including) ``cut``:

``session`` (default)
    an edit at ``i >= cut`` rebuilds ``units[cut:]``; an edit inside the
    cache invalidates the image, and the next build re-freezes the prefix
    and rebuilds everything after it, i.e. the whole chain.

``suffix``
    an edit at ``i >= cut`` rebuilds ``units[max(i, cut):]``; an edit inside
    the cache rebuilds ``units[i:]`` and additionally re-freezes the prefix,
    charged at the prefix build cost.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

Number = Union[int, Fraction]
MODELS = ("session", "suffix")


@dataclass(frozen=True)
class BuildUnit:
    name: str
    build_ms: int
    edit_weight: Optional[Fraction] = None
    lines: Optional[int] = None

    def __post_init__(self) -> None:
        if self.build_ms < 0:
            raise ValueError(f"{self.name}: negative build time")
        if self.edit_weight is not None:
            w = Fraction(self.edit_weight)
            if w < 0:
                raise ValueError(f"{self.name}: negative edit weight")
            object.__setattr__(self, "edit_weight", w)


@dataclass(frozen=True)
class SplitPlan:
    units: tuple[BuildUnit, ...]
    cut_index: int
    expected_incremental_ms: Fraction
    model: str = "session"

    @property
    def cached(self) -> tuple[BuildUnit, ...]:
        return self.units[: self.cut_index]

    def to_dict(self) -> dict:
        return {
            "units": [
                {"name": u.name, "build_ms": u.build_ms, "edit_weight": float(u.edit_weight)}
                for u in self.units
            ],
            "cut_index": self.cut_index,
            "cached": [u.name for u in self.cached],
            "expected_incremental_ms": float(self.expected_incremental_ms),
            "uncached_ms": float(edit_cost(self.units, 0, self.model)),
            "model": self.model,
        }


def normalize_weights(units: Sequence[BuildUnit]) -> tuple[BuildUnit, ...]:
    """Fill in and normalise edit weights so they sum to 1.

    Missing weights default to line counts when every unit has one, and
    to a uniform distribution otherwise.
    """
    if not units:
        raise ValueError("plan needs at least one unit")
    if all(u.edit_weight is not None for u in units):
        raw = [u.edit_weight for u in units]
    elif all(u.lines is not None for u in units) and sum(u.lines for u in units) > 0:
        raw = [Fraction(u.lines) for u in units]
    else:
        raw = [Fraction(1)] * len(units)
    total = sum(raw)
    if total == 0:
        raw, total = [Fraction(1)] * len(units), Fraction(len(units))
    return tuple(replace(u, edit_weight=w / total) for u, w in zip(units, raw))


def edit_cost(units: Sequence[BuildUnit], cut: int, model: str = "session") -> Fraction:
    """Expected rebuild time for a given cut under the chosen model."""
    if model not in MODELS:
        raise ValueError(f"unknown cost model {model!r}")
    if not 0 <= cut <= len(units):
        raise ValueError(f"cut_index {cut} outside 0..{len(units)}")
    units = normalize_weights(units)
    b = [u.build_ms for u in units]
    suffix = [0] * (len(b) + 1)
    for i in range(len(b) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + b[i]
    prefix = suffix[0] - suffix[cut]
    total = Fraction(0)
    for i, u in enumerate(units):
        if i >= cut:
            cost = suffix[cut] if model == "session" else suffix[i]
        elif model == "session":
            cost = suffix[0]
        else:
            cost = suffix[i] + prefix
        total += u.edit_weight * cost
    return total


def plan_split(units: Sequence[BuildUnit], model: str = "session") -> SplitPlan:
    """Cut minimising expected incremental time; ties go to the larger cut."""
    units = normalize_weights(units)
    best_cut, best = 0, None
    for cut in range(len(units) + 1):
        c = edit_cost(units, cut, model)
        if best is None or c <= best:
            best_cut, best = cut, c
    return SplitPlan(units, best_cut, best, model)


def evaluate_plan(plan: SplitPlan) -> Fraction:
    if not 0 <= plan.cut_index <= len(plan.units):
        raise ValueError(f"cut_index {plan.cut_index} outside 0..{len(plan.units)}")
    return edit_cost(plan.units, plan.cut_index, plan.model)


def parse_units(lines: Iterable[str]) -> list[BuildUnit]:
    """Read ``name build_ms [edit_weight]`` lines (``#`` starts a comment)."""
    out = []
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ValueError(f"line {n}: expected 'name build_ms [edit_weight]'")
        try:
            ms = int(parts[1])
            w = Fraction(parts[2]) if len(parts) == 3 else None
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"line {n}: bad number") from None
        out.append(BuildUnit(parts[0], ms, w))
    if not out:
        raise ValueError("no build units given")
    return out


def format_plan(plan: SplitPlan) -> str:
    lines = []
    for i, u in enumerate(plan.units):
        tag = "cached" if i < plan.cut_index else "rebuilt"
        lines.append(f"{u.name:<16} {u.build_ms:>9} ms  weight {float(u.edit_weight):.3f}  {tag}")
    uncached = edit_cost(plan.units, 0, plan.model)
    lines.append(
        f"cut after {plan.cut_index} unit(s): expected {float(plan.expected_incremental_ms):.0f} ms"
        f" per edit (uncached {float(uncached):.0f} ms)"
    )
    return "\n".join(lines)


__all__ = [
    "BuildUnit",
    "MODELS",
    "SplitPlan",
    "edit_cost",
    "evaluate_plan",
    "format_plan",
    "normalize_weights",
    "parse_units",
    "plan_split",
]
