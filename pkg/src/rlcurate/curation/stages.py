"""Per-record curation stages.

Filters return a ``Decision``; ``stage_hyperlink_strip`` returns a new record.
The pattern tables below are the documented sets each filter matches.
"""

from __future__ import annotations

import re
from dataclasses import replace

from .. import reward
from ..core import NeedsJudge
from ..judge import AcceptAllJudge, ExactMatchJudge
from .records import Decision, PipelineRecord

URL_RE = re.compile(r"(?:https?|ftp)://[^\s<>\"'）)\]]+|www\.[^\s<>\"'）)\]]+", re.IGNORECASE)

IMAGE_PATTERNS = (
    re.compile(r"!\[[^\]]*\]\([^)]*\)"),              # markdown image
    re.compile(r"<img\b", re.IGNORECASE),
    re.compile(r"\\includegraphics"),
    re.compile(r"[如见下上左右附]图"),
    re.compile(r"图\s*[0-9一二三四五六七八九十]"),
    re.compile(r"\b(?:figure|fig\.)\s*\d", re.IGNORECASE),
    re.compile(r"\b(?:image|picture|diagram|figure)\s+(?:below|above)\b", re.IGNORECASE),
    re.compile(r"\[(?:图片|image)\]", re.IGNORECASE),
)

TABLE_PATTERNS = (
    re.compile(r"(?m)(?:^[ \t]*\|.*\|[ \t]*$\n?){2,}"),   # two or more pipe rows
    re.compile(r"(?m)^[ \t]*\+[-=+]{3,}\+[ \t]*$"),       # grid border
    re.compile(r"<table\b", re.IGNORECASE),
    re.compile(r"\\begin\{tabular\}"),
    re.compile(r"[如见下上附]表"),
    re.compile(r"表\s*[0-9一二三四五六七八九十]"),
    re.compile(r"\btable\s*\d", re.IGNORECASE),
)

ENUMERATOR_PATTERNS = (
    ("paren", re.compile(r"[（(]\s*(\d{1,2})\s*[)）]")),
    ("circled", re.compile(r"([\u2460-\u2473])")),
    ("line", re.compile(r"(?m)^[ \t]*(\d{1,2})[.、．](?!\d)")),
)
QUESTION_END_RE = re.compile(r"[?？]+")

DANGLING_PHRASES = ("如图", "如下图", "见图", "上图", "下图", "如表", "上表", "下表", "见表",
                    "the table above", "the table below", "the figure above", "the figure below",
                    "as shown", "shown below", "shown above", "the following figure",
                    "the following table")

WS_RE = re.compile(r"\s+")


def collapse_ws(s: str) -> str:
    return WS_RE.sub(" ", s).strip()


def _first_match(patterns, text):
    for pat in patterns:
        m = pat.search(text)
        if m:
            return m.group(0).strip()
    return None


def infer_kind(record: PipelineRecord) -> str:
    kind = record.meta.get("answer_kind")
    if kind:
        return kind
    ref = record.reference_answer.strip()
    if reward.parse_number(ref) is not None:
        return "numeric"
    return "long_text" if len(ref) > reward.LONG_ANSWER_CHARS else "short_text"


def stage_answer_reference_match(record: PipelineRecord, judge=None) -> Decision:
    gen = record.generated_answer
    if gen is None or not str(gen).strip():
        return Decision(False, "missing field")
    parsed = reward.parse_response(gen)
    candidate = parsed.boxed_answer if parsed.boxed_answer is not None else gen
    try:
        ok = reward.answers_equivalent(candidate, record.reference_answer, infer_kind(record),
                                       judge=judge or ExactMatchJudge(), question_id=record.id)
    except NeedsJudge:
        return Decision(False, "needs judge")
    return Decision(ok, "" if ok else "answer mismatch")


def stage_media_filter(record: PipelineRecord) -> Decision:
    text = record.prompt
    m = URL_RE.search(text)
    if m:
        return Decision(False, f"url: {m.group(0)}")
    span = _first_match(IMAGE_PATTERNS, text)
    if span:
        return Decision(False, f"image: {span}")
    span = _first_match(TABLE_PATTERNS, text)
    if span:
        return Decision(False, f"table: {span.splitlines()[0] if span else span}")
    return Decision(True)


def stage_hyperlink_filter(record: PipelineRecord) -> Decision:
    m = URL_RE.search(record.prompt)
    return Decision(False, m.group(0)) if m else Decision(True)


def strip_urls(text: str) -> str:
    if not URL_RE.search(text):
        return text
    return collapse_ws(URL_RE.sub(" ", text))


def stage_hyperlink_strip(record: PipelineRecord) -> PipelineRecord:
    stripped = strip_urls(record.prompt)
    if stripped == record.prompt:
        return record
    return replace(record, prompt=stripped)


def enumerator_tokens(text: str) -> list:
    found = set()
    for name, pat in ENUMERATOR_PATTERNS:
        for m in pat.finditer(text):
            found.add((name, m.group(1)))
    return sorted(found)


def question_count(text: str) -> int:
    """Number of sentences ending in a question mark."""
    return len(QUESTION_END_RE.findall(text))


def stage_subquestion_filter(record: PipelineRecord) -> Decision:
    enums = enumerator_tokens(record.prompt)
    if len(enums) >= 2:
        return Decision(False, f"{len(enums)} enumerators")
    q = question_count(record.prompt)
    if q >= 2:
        return Decision(False, f"{q} questions")
    return Decision(True)


def stage_short_entry(record: PipelineRecord, min_chars: int = 64) -> Decision:
    if min_chars <= 0:
        raise ValueError("min_chars must be positive")
    n = len(collapse_ws(record.prompt))
    return Decision(True) if n >= min_chars else Decision(False, f"{n} < {min_chars} chars")


def stage_judge(record: PipelineRecord, judge=None) -> Decision:
    """Pluggable record-level judge; the offline default accepts everything."""
    judge = judge or AcceptAllJudge()
    ok = bool(judge(record))
    return Decision(ok, "" if ok else "judge rejected")


def stage_rl_quality_gate(record: PipelineRecord, max_answer_chars: int = 15, judge=None) -> Decision:
    ref = record.reference_answer.strip()
    if not ref or (len(ref) >= max_answer_chars and reward.parse_number(ref) is None):
        return Decision(False, "verifiability")
    if not stage_subquestion_filter(record).accepted:
        return Decision(False, "clarity")
    low = record.prompt.lower()
    if any(p in low for p in DANGLING_PHRASES):
        return Decision(False, "completeness")
    if not stage_judge(record, judge).accepted:
        return Decision(False, "solvability")
    return Decision(True)
