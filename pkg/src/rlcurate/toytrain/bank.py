"""Synthetic arithmetic question bank with difficulty tiers."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..core import Question, make_rng

TIERS = ("easy", "mid", "hard")
# inclusive range of operation counts per tier
OPS_PER_TIER = {0: (1, 1), 1: (2, 3), 2: (4, 5)}
OPERATORS = ("+", "-", "×")


@dataclass(frozen=True)
class ToyQuestion:
    question: Question
    tier: int
    operands: tuple
    operators: tuple

    @property
    def id(self):
        return self.question.id

    @property
    def n_ops(self) -> int:
        return len(self.operators)

    @property
    def expression(self) -> str:
        # parenthesised so that ordinary precedence gives left-to-right evaluation
        expr = f"{self.operands[0]} {self.operators[0]} {self.operands[1]}"
        for op, x in zip(self.operators[1:], self.operands[2:]):
            expr = f"({expr}) {op} {x}"
        return expr

    @property
    def partials(self) -> tuple:
        """Running value after 0, 1, ..., n_ops operations."""
        return running_values(self.operands, self.operators)


def apply_op(a: int, op: str, b: int) -> int:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    return a * b


def running_values(operands, operators) -> tuple:
    out = [operands[0]]
    for op, x in zip(operators, operands[1:]):
        out.append(apply_op(out[-1], op, x))
    return tuple(out)


@dataclass(frozen=True)
class ToyQuestionBank:
    questions: tuple
    seed: int = 0

    def __len__(self):
        return len(self.questions)

    def __iter__(self):
        return iter(self.questions)

    @property
    def ids(self) -> list:
        return [q.id for q in self.questions]

    def lookup(self) -> dict:
        return {q.id: q for q in self.questions}

    def tier_counts(self) -> tuple:
        counts = [0, 0, 0]
        for q in self.questions:
            counts[q.tier] += 1
        return tuple(counts)

    def dump(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for q in self.questions:
                fh.write(json.dumps({
                    "id": q.id, "prompt": q.question.prompt,
                    "reference_answer": q.question.reference_answer,
                    "answer_kind": q.question.answer_kind, "source_tag": q.question.source_tag,
                    "tier": TIERS[q.tier], "operands": list(q.operands), "operators": list(q.operators),
                }, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path):
        qs = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                rec = json.loads(line)
                try:
                    operands = tuple(int(x) for x in rec["operands"])
                    operators = tuple(rec["operators"])
                    tier = TIERS.index(rec["tier"])
                    q = Question(rec["id"], rec["prompt"], rec["reference_answer"],
                                 rec.get("answer_kind", "numeric"), rec.get("source_tag", "toy"))
                except (KeyError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad bank record ({exc})") from None
                if str(running_values(operands, operators)[-1]) != q.reference_answer:
                    raise ValueError(f"{path}:{lineno}: reference answer disagrees with expression")
                qs.append(ToyQuestion(q, tier, operands, operators))
        return cls(tuple(qs))


def _tier_counts(size: int, mix) -> list:
    raw = [size * f for f in mix]
    counts = [int(np.floor(x + 1e-9)) for x in raw]
    # largest remainder, ties to the lower tier
    order = sorted(range(3), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: size - sum(counts)]:
        counts[i] += 1
    return counts


def _make_expression(rng, n_ops):
    while True:
        operands = [int(rng.integers(2, 21))]
        operators = []
        for _ in range(n_ops):
            op = OPERATORS[int(rng.integers(0, 3))]
            operators.append(op)
            operands.append(int(rng.integers(2, 10)) if op == "×" else int(rng.integers(2, 21)))
        vals = running_values(operands, operators)
        # an early stop must never land on the final answer by accident
        if all(v != vals[-1] for v in vals[:-1]):
            return tuple(operands), tuple(operators)


def generate_bank(size: int, tier_mix=(0.3, 0.4, 0.3), seed: int = 0) -> ToyQuestionBank:
    if size <= 0:
        raise ValueError("size must be positive")
    mix = tuple(float(x) for x in tier_mix)
    if len(mix) != 3 or any(x < 0 for x in mix) or abs(sum(mix) - 1.0) > 1e-9:
        raise ValueError(f"tier_mix must be three non-negative fractions summing to 1, got {tier_mix}")
    rng = make_rng(seed, 101)
    tiers = np.repeat(np.arange(3), _tier_counts(size, mix))
    tiers = tiers[rng.permutation(size)]
    width = len(str(size - 1))
    questions = []
    for i, tier in enumerate(tiers):
        lo, hi = OPS_PER_TIER[int(tier)]
        operands, operators = _make_expression(rng, int(rng.integers(lo, hi + 1)))
        tq = ToyQuestion(Question("tmp", "tmp", "0"), int(tier), operands, operators)
        answer = tq.partials[-1]
        q = Question(f"q{i:0{width}d}", f"Compute {tq.expression}.", str(answer), "numeric", "toy")
        questions.append(ToyQuestion(q, int(tier), operands, operators))
    return ToyQuestionBank(tuple(questions), seed)
