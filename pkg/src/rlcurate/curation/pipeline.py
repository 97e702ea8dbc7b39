"""Ordered composition of curation stages."""

from __future__ import annotations

import copy
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

from . import stages as st
from .convert import convert_choice_to_open
from .cot import validate_structured_cot
from .minhash import BANDS, NGRAM, PERMUTATIONS, duplicate_clusters, minhash_signature
from .records import Decision, PipelineRecord


class UnknownStage(ValueError):
    pass


@dataclass
class PipelineOptions:
    min_chars: int = 64
    dedup_threshold: float = 0.8
    ngram: int = NGRAM
    permutations: int = PERMUTATIONS
    bands: int = BANDS
    max_answer_chars: int = 15
    answer_judge: object = None
    record_judge: object = None
    rewriter: object = None
    expand_choices: bool = False
    workers: int = 1
    extra: dict = field(default_factory=dict)


def dedup_text(record: PipelineRecord) -> str:
    return "\n".join(part for part in (record.prompt, record.cot) if part)


def stage_dedup(records, threshold: float = 0.8, seed: int = 0, ngram: int = NGRAM,
                permutations: int = PERMUTATIONS, bands: int = BANDS):
    """Near-duplicate removal. Returns (kept, [(record, reason), ...])."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    records = list(records)
    sigs = [minhash_signature(dedup_text(r), ngram, permutations, seed, bands) for r in records]
    roots = duplicate_clusters(sigs, threshold)
    kept, dropped = [], []
    for i, r in enumerate(records):
        if roots[i] == i:
            kept.append(r)
        else:
            dropped.append((r, f"near-duplicate of {records[roots[i]].id}"))
    return kept, dropped


def _structured_cot(record, opts):
    if record.cot is None:
        return Decision(False, "missing field")
    check = validate_structured_cot(record.cot)
    return Decision(check.accepted, check.reason)


def _hyperlink_strip(record, opts):
    return st.stage_hyperlink_strip(record)


def _choice_to_open(record, opts):
    if not record.choices:
        return [record]
    return convert_choice_to_open(record, opts.rewriter, opts.expand_choices)


# name -> (kind, fn). kind: "filter" returns Decision; "transform" returns a
# record; "expand" returns a list of records; "corpus" sees every record.
STAGES = {
    "answer_match": ("filter", lambda r, o: st.stage_answer_reference_match(r, o.answer_judge)),
    "reasoning_selection": ("filter", lambda r, o: st.stage_judge(r, o.record_judge)),
    "correctness_check": ("filter", lambda r, o: st.stage_judge(r, o.record_judge)),
    "dedup": ("corpus", None),
    "media": ("filter", lambda r, o: st.stage_media_filter(r)),
    "hyperlink": ("filter", lambda r, o: st.stage_hyperlink_filter(r)),
    "hyperlink_strip": ("transform", _hyperlink_strip),
    "subquestion": ("filter", lambda r, o: st.stage_subquestion_filter(r)),
    "short_entry": ("filter", lambda r, o: st.stage_short_entry(r, o.min_chars)),
    "structured_cot": ("filter", _structured_cot),
    "choice_to_open": ("expand", _choice_to_open),
    "rl_quality": ("filter", lambda r, o: st.stage_rl_quality_gate(r, o.max_answer_chars, o.record_judge)),
}


def check_stages(names) -> list:
    names = list(names)
    for name in names:
        if name not in STAGES:
            raise UnknownStage(f"unknown stage {name!r}; known: {', '.join(STAGES)}")
    return names


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def run_pipeline(records, stages, seed: int = 0, options: Optional[PipelineOptions] = None):
    """Apply ``stages`` in order.

    Returns (accepted records, reject report rows {id, stage, reason}). Input
    records are not modified; output order follows input order.
    """
    names = check_stages(stages)
    opts = options or PipelineOptions()
    live = [copy.deepcopy(r) for r in records]
    report = []

    def reject(rec, name, reason):
        if not (rec.audit and rec.audit[-1][:2] == [name, "reject"]):
            rec.log(name, False, reason)
        report.append({"id": rec.id, "stage": name, "reason": reason})

    for name in names:
        kind, fn = STAGES[name]
        if kind == "corpus":
            kept, dropped = stage_dedup(live, opts.dedup_threshold, seed, opts.ngram, opts.permutations, opts.bands)
            dropped_ids = {id(r) for r, _ in dropped}
            for r, reason in dropped:
                reject(r, name, reason)
            for r in kept:
                r.log(name, True)
            live = [r for r in live if id(r) not in dropped_ids]
            continue
        results = _map(lambda r: fn(r, opts), live, opts.workers)
        nxt = []
        for rec, res in zip(live, results):
            if kind == "filter":
                if res.accepted:
                    rec.log(name, True, res.reason)
                    nxt.append(rec)
                else:
                    reject(rec, name, res.reason)
            elif kind == "transform":
                if res is not rec:
                    res = replace(res, audit=list(rec.audit))
                    res.log(name, True, "modified")
                nxt.append(res)
            else:
                if len(res) == 1 and res[0] is rec:
                    nxt.append(rec)
                elif not res:
                    reason = rec.audit[-1][2] if rec.audit and rec.audit[-1][0] == name else "no output"
                    reject(rec, name, reason)
                else:
                    for child in res:
                        child.audit = list(rec.audit) + [[name, "accept", f"derived from {rec.id}"]]
                        nxt.append(child)
        live = nxt
    return live, report
