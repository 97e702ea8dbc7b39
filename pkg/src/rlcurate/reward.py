"""Rule-based rewards: format + accuracy, language consistency.

Reward values::

    format broken                  -2.0   (answer never checked)
    format ok, answer wrong        -1.5
    format ok, answer right         2.0
    mixed language (both < k)      -0.5   (added on top, unconditionally)
"""

from __future__ import annotations

import math
import re
import unicodedata
from dataclasses import dataclass
from typing import Optional

from .core import NeedsJudge
from .judge import ExactMatchJudge

FORMAT_PENALTY = -2.0
WRONG_ANSWER = -1.5
RIGHT_ANSWER = 2.0
LANGUAGE_PENALTY = -0.5
# histogram buckets for reported totals; -1.0 is kept as a bucket although no case sums to it
TOTALS = (-2.5, -2.0, -1.5, -1.0, 1.5, 2.0)

LONG_ANSWER_CHARS = 15
NUMERIC_REL_TOL = 1e-6

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"
BOXED = "\\boxed{"

TRAILING_PUNCT = ".,;:!?。，；：！？、"
# stripped from either end of an answer; longer entries first
UNIT_SYMBOLS = ("人民币", "美元", "dollars", "dollar", "yuan", "rmb", "usd", "cny",
                "元", "$", "¥", "￥", "€", "£")

_DEFAULT_JUDGE = ExactMatchJudge()


@dataclass(frozen=True)
class ParsedResponse:
    think_block: Optional[str]
    boxed_answer: Optional[str]
    raw: str

    @property
    def format_ok(self) -> bool:
        return self.think_block is not None and self.boxed_answer is not None


@dataclass(frozen=True)
class RewardBreakdown:
    format_ok: bool
    answer_ok: bool
    r_format_accuracy: float
    r_language: float
    total: float

    def as_dict(self) -> dict:
        return {"format_ok": self.format_ok, "answer_ok": self.answer_ok,
                "r_format_accuracy": self.r_format_accuracy, "r_language": self.r_language,
                "total": self.total}


def _last_boxed(text: str) -> Optional[str]:
    # one pass brace matching keeps this linear on adversarial input
    match = {}
    stack = []
    for i, ch in enumerate(text):
        if ch == "{":
            stack.append(i)
        elif ch == "}" and stack:
            match[stack.pop()] = i
    found = None
    start = text.find(BOXED)
    while start >= 0:
        brace = start + len(BOXED) - 1
        if brace in match:
            found = text[brace + 1:match[brace]]
        start = text.find(BOXED, start + 1)
    return found


def parse_response(raw: str) -> ParsedResponse:
    open_at = raw.find(THINK_OPEN)
    if open_at < 0:
        return ParsedResponse(None, None, raw)
    close_at = raw.find(THINK_CLOSE, open_at + len(THINK_OPEN))
    if close_at < 0:
        return ParsedResponse(None, None, raw)
    think = raw[open_at + len(THINK_OPEN):close_at]
    boxed = _last_boxed(raw[close_at + len(THINK_CLOSE):])
    return ParsedResponse(think, boxed, raw)


_LATEX_WRAP = re.compile(r"\\(?:text|mathrm|textbf|mathbf)\{([^{}]*)\}")
_WS = re.compile(r"\s+")


def normalize_text(s: str) -> str:
    s = _LATEX_WRAP.sub(r"\1", s)
    s = s.replace("\\%", "%").replace("\\$", "$").replace("\\,", "").replace("\\!", "")
    s = s.replace("−", "-")
    s = _WS.sub(" ", s).strip().casefold()
    if len(s) >= 2 and s[0] == "$" and s[-1] == "$":
        s = s.strip("$").strip()
    changed = True
    while changed and s:
        changed = False
        stripped = s.rstrip(TRAILING_PUNCT).strip()
        if stripped != s:
            s, changed = stripped, True
        for unit in UNIT_SYMBOLS:
            word = unit.isascii() and unit.isalpha()
            if s.endswith(unit) and len(s) > len(unit) and not (word and s[-len(unit) - 1].isalpha()):
                s, changed = s[:-len(unit)].strip(), True
            if s.startswith(unit) and len(s) > len(unit) and not (word and s[len(unit)].isalpha()):
                s, changed = s[len(unit):].strip(), True
    return s


_THOUSANDS = re.compile(r"^[+-]?\d{1,3}(,\d{3})+(\.\d+)?$")
_FRAC_TEX = re.compile(r"^\\d?frac\{([^{}]+)\}\{([^{}]+)\}$")


def _plain_number(s: str) -> Optional[float]:
    s = s.strip()
    if _THOUSANDS.match(s):
        s = s.replace(",", "")
    try:
        x = float(s)
    except ValueError:
        return None
    return x if math.isfinite(x) else None


def parse_number(s: str) -> Optional[float]:
    """Plain number, ``x%`` (-> x/100), ``a/b`` or ``\\frac{a}{b}``; else None."""
    s = normalize_text(s).replace(" ", "")
    if not s:
        return None
    if s.endswith("%"):
        x = _plain_number(s[:-1])
        return None if x is None else x / 100.0
    m = _FRAC_TEX.match(s)
    if m:
        num, den = _plain_number(m.group(1)), _plain_number(m.group(2))
    elif s.count("/") == 1:
        num, den = (_plain_number(p) for p in s.split("/"))
    else:
        return _plain_number(s)
    if num is None or den is None or den == 0:
        return None
    return num / den


def answers_equivalent(candidate: str, reference: str, kind: str = "short_text",
                       judge=_DEFAULT_JUDGE, question_id: str = "") -> bool:
    """Rule-based equivalence; long answers fall back to ``judge``.

    Raises NeedsJudge when a long_text comparison fails the rules and no
    judge is available (``judge=None``) or the judge cannot answer.
    """
    if not candidate.strip() or not reference.strip():
        raise ValueError("answers must be non-empty")
    nc, nr = normalize_text(candidate), normalize_text(reference)
    if nc == nr:
        return True
    if kind == "numeric":
        x, y = parse_number(candidate), parse_number(reference)
        if x is None or y is None:
            return False
        return math.isclose(x, y, rel_tol=NUMERIC_REL_TOL, abs_tol=0.0)
    if kind == "long_text" and len(reference.strip()) > LONG_ANSWER_CHARS:
        if judge is None:
            raise NeedsJudge(f"no judge for long answer {question_id!r}")
        return bool(judge(candidate, reference, question_id))
    return False


def score_format_accuracy(parsed: ParsedResponse, reference: str, kind: str = "short_text",
                          judge=_DEFAULT_JUDGE, question_id: str = "") -> float:
    if not parsed.format_ok:
        return FORMAT_PENALTY
    if not parsed.boxed_answer.strip():
        return WRONG_ANSWER
    ok = answers_equivalent(parsed.boxed_answer, reference, kind, judge=judge, question_id=question_id)
    return RIGHT_ANSWER if ok else WRONG_ANSWER


_MARKUP = re.compile(r"</?think>|\\boxed")


def _is_cjk(cp: int) -> bool:
    return (0x4E00 <= cp <= 0x9FFF or 0x3400 <= cp <= 0x4DBF
            or 0xF900 <= cp <= 0xFAFF or 0x20000 <= cp <= 0x2A6DF)


def language_shares(raw: str) -> tuple:
    """(p_cn, p_en, n_classified) over letter characters, markup removed."""
    n_cn = n_en = 0
    for ch in _MARKUP.sub(" ", raw):
        cp = ord(ch)
        if _is_cjk(cp):
            n_cn += 1
        elif ch.isalpha() and (ch.isascii() or unicodedata.name(ch, "").startswith("LATIN")):
            n_en += 1
    n = n_cn + n_en
    if n == 0:
        return 0.0, 0.0, 0
    return n_cn / n, n_en / n, n


def score_language(raw: str, k: float = 0.8) -> float:
    if not (0 < k <= 1):
        raise ValueError("k must be in (0, 1]")
    p_cn, p_en, n = language_shares(raw)
    if n == 0:
        return 0.0
    return LANGUAGE_PENALTY if (p_cn < k and p_en < k) else 0.0


def score(raw: str, reference: str, kind: str = "short_text", k: float = 0.8,
          judge=_DEFAULT_JUDGE, question_id: str = "") -> RewardBreakdown:
    parsed = parse_response(raw)
    r_fa = score_format_accuracy(parsed, reference, kind, judge=judge, question_id=question_id)
    r_lang = score_language(raw, k)
    return RewardBreakdown(
        format_ok=parsed.format_ok,
        answer_ok=r_fa == RIGHT_ANSWER,
        r_format_accuracy=r_fa,
        r_language=r_lang,
        total=r_fa + r_lang,
    )
