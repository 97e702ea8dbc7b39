"""Validation of five-section reasoning traces."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

SECTIONS = ("Plan", "Reasoning", "Reflection", "Backtracking", "Answer")
ALIASES = {
    "Plan": ("Plan", "计划", "规划"),
    "Reasoning": ("Reasoning", "推理"),
    "Reflection": ("Reflection", "反思"),
    "Backtracking": ("Backtracking", "回溯"),
    "Answer": ("Answer", "答案"),
}


def _marker(names):
    alt = "|".join(re.escape(n) for n in names)
    # "## Plan:", "**Plan**:", "Plan：" at the start of a line
    return re.compile(rf"(?mi)^[ \t]*(?:#+[ \t]*)?(?:\*\*)?(?:{alt})(?:\*\*)?[ \t]*(?:[:：]|$)")


MARKERS = {name: _marker(aliases) for name, aliases in ALIASES.items()}


@dataclass
class CotCheck:
    accepted: bool
    reason: str = ""
    spans: dict = field(default_factory=dict)


def validate_structured_cot(cot: str) -> CotCheck:
    starts = {}
    for name in SECTIONS:
        hits = [m.start() for m in MARKERS[name].finditer(cot or "")]
        if not hits:
            return CotCheck(False, f"missing section: {name}")
        if len(hits) > 1:
            return CotCheck(False, f"repeated section: {name}")
        starts[name] = hits[0]
    order = [starts[name] for name in SECTIONS]
    if order != sorted(order):
        return CotCheck(False, "order violation")
    ends = order[1:] + [len(cot)]
    return CotCheck(True, "", {name: (s, e) for name, s, e in zip(SECTIONS, order, ends)})
