from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

ACCEPT, REJECT = "accept", "reject"


class Decision(NamedTuple):
    accepted: bool
    reason: str = ""


@dataclass
class PipelineRecord:
    id: str
    prompt: str
    reference_answer: str = ""
    generated_answer: Optional[str] = None
    choices: Optional[list] = None
    cot: Optional[str] = None
    meta: dict = field(default_factory=dict)
    audit: list = field(default_factory=list)

    def log(self, stage: str, accepted: bool, reason: str = ""):
        self.audit.append([stage, ACCEPT if accepted else REJECT, reason])

    @property
    def rejected_by(self) -> Optional[str]:
        for stage, verdict, _ in self.audit:
            if verdict == REJECT:
                return stage
        return None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=False)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineRecord":
        if "id" not in d or "prompt" not in d:
            raise ValueError("record needs 'id' and 'prompt'")
        known = {k: d[k] for k in ("reference_answer", "generated_answer", "choices", "cot") if k in d}
        return cls(id=str(d["id"]), prompt=str(d["prompt"]), meta=dict(d.get("meta") or {}),
                   audit=[list(a) for a in d.get("audit") or []], **known)


def read_jsonl(path) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(PipelineRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write((row.to_json() if isinstance(row, PipelineRecord) else json.dumps(row, ensure_ascii=False)) + "\n")
