"""Pluggable judges and question rewriters.

Offline defaults are deterministic; HTTP clients are opt-in. Endpoint URLs
can come from ``RLCURATE_JUDGE_URL`` / ``RLCURATE_REWRITER_URL``.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import urllib.error
import urllib.request

from .core import NeedsJudge

log = logging.getLogger(__name__)

JUDGE_URL_ENV = "RLCURATE_JUDGE_URL"
REWRITER_URL_ENV = "RLCURATE_REWRITER_URL"


class ExactMatchJudge:
    """Offline judge: equivalent iff normalized texts are identical."""

    def __call__(self, candidate: str, reference: str, question_id: str = "") -> bool:
        from .reward import normalize_text

        return normalize_text(candidate) == normalize_text(reference)


class AcceptAllJudge:
    """Offline record-level judge used by the model-judged curation stages."""

    def __call__(self, record) -> bool:
        return True


class _HttpClient:
    def __init__(self, url: str, timeout: float = 10.0, retries: int = 2,
                 max_in_flight: int = 4, backoff: float = 0.2):
        self.url = url
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def post(self, payload: dict) -> dict:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        last = None
        for attempt in range(self.retries + 1):
            req = urllib.request.Request(self.url, data=body, headers={"Content-Type": "application/json"})
            with self._slots:
                try:
                    with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                        return json.loads(resp.read().decode("utf-8"))
                except (urllib.error.URLError, OSError, ValueError) as exc:
                    last = exc
            if attempt < self.retries:
                time.sleep(self.backoff * (attempt + 1))
        raise ConnectionError(f"{self.url}: {last}")


class HttpJudge(_HttpClient):
    """POST {candidate, reference, question_id} -> {equivalent: bool}.

    Any transport or protocol failure raises NeedsJudge so callers can tell
    "unsettled" apart from "not equivalent".
    """

    def __call__(self, candidate: str, reference: str, question_id: str = "") -> bool:
        try:
            reply = self.post({"candidate": candidate, "reference": reference, "question_id": question_id})
        except ConnectionError as exc:
            log.warning("judge unavailable: %s", exc)
            raise NeedsJudge(str(exc)) from exc
        eq = reply.get("equivalent") if isinstance(reply, dict) else None
        if not isinstance(eq, bool):
            raise NeedsJudge(f"malformed judge reply: {reply!r}")
        return eq

    @classmethod
    def from_env(cls, **kw):
        url = os.environ.get(JUDGE_URL_ENV)
        return cls(url, **kw) if url else None


class IdentityRewriter:
    """Offline rewriter: returns the template conversion unchanged."""

    def __call__(self, stem: str, choices: list, template: list) -> list:
        return list(template)


class HttpRewriter(_HttpClient):
    """POST {stem, choices} -> {items: [{prompt, reference}, ...]}."""

    def __call__(self, stem: str, choices: list, template: list) -> list:
        reply = self.post({"stem": stem, "choices": choices})
        items = reply.get("items") if isinstance(reply, dict) else None
        if not isinstance(items, list):
            raise ValueError(f"malformed rewriter reply: {reply!r}")
        return [(str(it["prompt"]), str(it["reference"])) for it in items]

    @classmethod
    def from_env(cls, **kw):
        url = os.environ.get(REWRITER_URL_ENV)
        return cls(url, **kw) if url else None
