"""Balanced batching over a per-question accuracy ledger."""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import RolloutGroup

HARD, EASY, MID, UNSEEN = "hard", "easy", "mid", "unseen"
CATEGORIES = (HARD, EASY, MID, UNSEEN)


class PoolExhausted(RuntimeError):
    def __init__(self, message, counts):
        super().__init__(f"{message}; available by category: {counts}")
        self.counts = counts


class MaxRoundsExceeded(RuntimeError):
    def __init__(self, report):
        super().__init__(f"no informative batch after {report.rounds} rounds "
                         f"({report.discarded}/{report.generated} groups discarded)")
        self.report = report


@dataclass(frozen=True)
class LedgerEntry:
    attempts: int = 0
    correct: int = 0

    @property
    def accuracy(self):
        return self.correct / self.attempts if self.attempts else None


class AccuracyLedger:
    """Lifetime attempt/correct counts per question.

    Readers take a snapshot; writers are serialized with a lock.
    """

    def __init__(self, entries=None):
        self._entries = dict(entries or {})
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._entries)

    def __contains__(self, qid):
        return qid in self._entries

    def __eq__(self, other):
        return isinstance(other, AccuracyLedger) and self._entries == other._entries

    def get(self, qid) -> LedgerEntry:
        return self._entries.get(qid, LedgerEntry())

    def items(self):
        return sorted(self._entries.items())

    def record(self, qid, attempts, correct):
        if not (0 <= correct <= attempts):
            raise ValueError(f"{qid}: need 0 <= correct <= attempts")
        with self._lock:
            prev = self._entries.get(qid, LedgerEntry())
            self._entries[qid] = LedgerEntry(prev.attempts + attempts, prev.correct + correct)

    def total_attempts(self) -> int:
        return sum(e.attempts for e in self._entries.values())

    def to_records(self):
        return [{"question_id": q, "attempts": e.attempts, "correct": e.correct} for q, e in self.items()]

    def dump(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.to_records():
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

    @classmethod
    def from_records(cls, records: Iterable[dict]):
        ledger = cls()
        for rec in records:
            ledger.record(str(rec["question_id"]), int(rec["attempts"]), int(rec["correct"]))
        return ledger

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_records(json.loads(line) for line in fh if line.strip())


def classify(entry: LedgerEntry, m_hard: float, m_easy: float) -> str:
    if entry.attempts == 0:
        return UNSEEN
    acc = entry.accuracy
    if acc <= m_hard:
        return HARD
    if acc >= m_easy:
        return EASY
    return MID


def category_counts(ledger: AccuracyLedger, pool: Iterable[str], m_hard: float, m_easy: float) -> dict:
    counts = dict.fromkeys(CATEGORIES, 0)
    for qid in pool:
        counts[classify(ledger.get(qid), m_hard, m_easy)] += 1
    return counts


@dataclass(frozen=True)
class BatchPlan:
    question_ids: tuple
    n_hard: int
    n_easy: int
    n_mid: int
    n_unseen: int

    @property
    def size(self):
        return len(self.question_ids)


def category_caps(size: int, l_hard_frac: float, l_easy_frac: float) -> tuple:
    # epsilon guards products like 0.3 * 10 landing a hair under an integer
    return math.floor(l_hard_frac * size + 1e-9), math.floor(l_easy_frac * size + 1e-9)


def build_rollout_batch(ledger: AccuracyLedger, pool: Sequence[str], size: int, config,
                        rng: np.random.Generator, exclude=frozenset(), mode=None) -> BatchPlan:
    """Uniform draw from ``pool`` subject to the hard/easy caps.

    ``mode``: "caps" (default) caps hard/easy; "band" admits only mid and
    unseen questions; "uniform" applies no prefilter at all.
    """
    mode = mode or getattr(config, "batching_mode", "caps")
    candidates = [q for q in pool if q not in exclude]
    cats = [classify(ledger.get(q), config.m_hard, config.m_easy) for q in candidates]
    if mode == "caps":
        caps = dict(zip((HARD, EASY), category_caps(size, config.l_hard_frac, config.l_easy_frac)))
    elif mode == "band":
        caps = {HARD: 0, EASY: 0}
    elif mode == "uniform":
        caps = {}
    else:
        raise ValueError(f"unknown batching mode {mode!r}")
    taken = dict.fromkeys(CATEGORIES, 0)
    chosen = []
    for i in rng.permutation(len(candidates)):
        cat = cats[i]
        if cat in caps and taken[cat] >= caps[cat]:
            continue
        chosen.append(candidates[i])
        taken[cat] += 1
        if len(chosen) == size:
            break
    if len(chosen) < size:
        counts = dict.fromkeys(CATEGORIES, 0)
        for c in cats:
            counts[c] += 1
        raise PoolExhausted(f"needed {size} questions, only {len(chosen)} admissible", counts)
    return BatchPlan(tuple(chosen), taken[HARD], taken[EASY], taken[MID], taken[UNSEEN])


def is_informative(group: RolloutGroup) -> bool:
    return 0 < group.n_correct < group.n


def filter_informative(groups: Sequence[RolloutGroup]) -> list:
    return [g for g in groups if is_informative(g)]


def update_ledger(ledger: AccuracyLedger, groups: Iterable[RolloutGroup]) -> AccuracyLedger:
    for g in groups:
        ledger.record(g.question_id, g.n, g.n_correct)
    return ledger


@dataclass
class WasteReport:
    rounds: int = 0
    generated: int = 0
    discarded: int = 0
    plans: list = field(default_factory=list)

    @property
    def waste_fraction(self) -> float:
        return self.discarded / self.generated if self.generated else 0.0

    def as_dict(self):
        return {"rounds": self.rounds, "generated": self.generated, "discarded": self.discarded,
                "waste_fraction": self.waste_fraction}


@dataclass
class Accumulation:
    groups: list
    discarded: list
    report: WasteReport

    @property
    def all_groups(self):
        return self.groups + self.discarded


def accumulate_update_batch(ledger: AccuracyLedger, pool: Sequence[str], config,
                            rollout_fn: Callable[[BatchPlan], Sequence[RolloutGroup]],
                            rng: np.random.Generator) -> Accumulation:
    """Roll out balanced batches until ``config.mini_batch`` informative groups exist.

    Questions already rolled out in this accumulation are not drawn again.
    The ledger is read, not written; callers update it with ``all_groups``.
    """
    report = WasteReport()
    kept, dropped, used = [], [], set()
    while len(kept) < config.mini_batch:
        if report.rounds >= config.max_rounds:
            raise MaxRoundsExceeded(report)
        plan = build_rollout_batch(ledger, pool, config.prompts_per_batch, config, rng, exclude=used)
        used.update(plan.question_ids)
        groups = list(rollout_fn(plan))
        report.rounds += 1
        report.plans.append(plan)
        report.generated += len(groups)
        if getattr(config, "filter_informative", True):
            good = filter_informative(groups)
            bad = [g for g in groups if not is_informative(g)]
        else:
            good, bad = groups, []
        report.discarded += len(bad)
        kept.extend(good)
        dropped.extend(bad)
    return Accumulation(kept, dropped, report)

