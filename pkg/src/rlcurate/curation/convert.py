"""Multiple-choice to open-ended question conversion."""

from __future__ import annotations

import re

from .records import PipelineRecord

NEGATION_MARKERS = ("不正确", "错误", "不属于", "不是", "不包括", "不符合", "NOT", "EXCEPT", "incorrect")
BLANK_RE = re.compile(r"[（(]\s*[)）]|_{2,}")
LETTER_RE = re.compile(r"^\s*[（(]?[A-Za-z][)）.、]?\s*$")
CJK_RE = re.compile(r"[一-鿿]")


def has_negation(stem: str) -> bool:
    return any(m in stem for m in NEGATION_MARKERS)


def is_option_letter(text: str) -> bool:
    return bool(LETTER_RE.match(text or ""))


def _choices(record):
    out = []
    for i, c in enumerate(record.choices or []):
        if isinstance(c, dict):
            label = str(c.get("label", chr(ord("A") + i)))
            out.append((label, str(c.get("text", "")).strip(), bool(c.get("correct", False))))
        else:
            raise ValueError(f"{record.id}: choice {i} is not an object")
    return out


def open_template(stem: str) -> str:
    """Turn a choice stem into a fill-in prompt."""
    stem = stem.strip()
    prompt = BLANK_RE.sub("____", stem)
    if CJK_RE.search(stem):
        return prompt + "（请直接写出答案）"
    return prompt + " (Give the answer directly.)"


def convert_choice_to_open(record: PipelineRecord, rewriter=None, expand: bool = False) -> list:
    """Open-ended records derived from a choice question.

    Negated stems go to ``rewriter``; without one the record is skipped and
    its audit gets a "negation" rejection.
    """
    stem = record.prompt.strip()
    if not stem:
        raise ValueError(f"{record.id}: empty stem")
    choices = _choices(record)
    correct = [(label, text) for label, text, ok in choices if ok]
    if not correct:
        raise ValueError(f"{record.id}: no correct choice marked")

    base_meta = dict(record.meta, converted_from=record.id)
    if has_negation(stem):
        if rewriter is None:
            record.log("choice_to_open", False, "negation")
            return []
        template = [(open_template(stem), "；".join(t for _, t in correct))]
        items = rewriter(stem, [{"label": l, "text": t, "correct": ok} for l, t, ok in choices], template)
        out = []
        for k, item in enumerate(items):
            prompt, ref = (item["prompt"], item["reference"]) if isinstance(item, dict) else item
            if ref and not is_option_letter(ref):
                out.append(PipelineRecord(f"{record.id}-rw{k}", prompt, ref, meta=dict(base_meta)))
        return out

    out = []
    if len(correct) == 1:
        label, text = correct[0]
        if text and not is_option_letter(text):
            out.append(PipelineRecord(f"{record.id}-open", open_template(stem), text,
                                      meta=dict(base_meta, answer_kind="short_text")))
    else:
        texts = [t for _, t in correct if t and not is_option_letter(t)]
        if len(texts) == len(correct):
            out.append(PipelineRecord(f"{record.id}-open", open_template(stem), "；".join(texts),
                                      meta=dict(base_meta, answer_kind="long_text")))
    if expand:
        # one standalone judgement item per option with factual content
        bare = BLANK_RE.sub("", stem).strip()
        for label, text, ok in choices:
            if not text or is_option_letter(text):
                continue
            if CJK_RE.search(stem + text):
                prompt, ref = f"{bare}\n判断下列说法是否正确：{text}", ("正确" if ok else "错误")
            else:
                prompt, ref = f"{bare}\nIs the following statement true: {text}", ("true" if ok else "false")
            out.append(PipelineRecord(f"{record.id}-open-{label}", prompt, ref, meta=dict(base_meta)))
    if not out:
        record.log("choice_to_open", False, "no convertible option")
    return out
