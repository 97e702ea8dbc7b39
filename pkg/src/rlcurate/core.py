"""Shared domain types, config loading and seeding."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

ANSWER_KINDS = ("numeric", "short_text", "long_text")
BATCHING_MODES = ("caps", "band", "uniform")


class ConfigError(ValueError):
    """Raised for unreadable or invalid config files."""


class NeedsJudge(Exception):
    """A long-answer comparison could not be settled by rules or a judge."""


@dataclass(frozen=True)
class Question:
    id: str
    prompt: str
    reference_answer: str
    answer_kind: str = "numeric"
    source_tag: str = ""

    def __post_init__(self):
        if not self.prompt or not self.reference_answer:
            raise ValueError(f"question {self.id!r}: prompt and reference_answer must be non-empty")
        if self.answer_kind not in ANSWER_KINDS:
            raise ValueError(f"question {self.id!r}: unknown answer_kind {self.answer_kind!r}")


@dataclass(frozen=True)
class Trajectory:
    """One sampled response.

    ``values`` has one more entry than ``tokens``; the last entry is the
    terminal state and is always zero. ``features``/``action_mask`` are the
    per-token policy inputs the toy policy needs to recompute log-probs.
    """

    question_id: str
    tokens: np.ndarray
    logp_new: np.ndarray
    logp_old: np.ndarray
    values: np.ndarray
    terminal_reward: float
    is_correct: bool
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None
    features: Optional[np.ndarray] = None
    action_mask: Optional[np.ndarray] = None
    value_keys: Optional[np.ndarray] = None
    reward: Any = None
    text: str = ""

    def __post_init__(self):
        n = len(self.tokens)
        if len(self.logp_new) != n or len(self.logp_old) != n:
            raise ValueError(f"trajectory {self.question_id!r}: log-prob lengths differ from token count {n}")
        if len(self.values) != n + 1:
            raise ValueError(f"trajectory {self.question_id!r}: expected {n + 1} values, got {len(self.values)}")
        if self.values[n] != 0:
            raise ValueError(f"trajectory {self.question_id!r}: terminal value must be 0")

    @property
    def length(self) -> int:
        return len(self.tokens)

    def with_(self, **changes) -> "Trajectory":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class RolloutGroup:
    question_id: str
    trajectories: tuple

    def __post_init__(self):
        if len(self.trajectories) < 1:
            raise ValueError(f"group {self.question_id!r} is empty")

    @property
    def n(self) -> int:
        return len(self.trajectories)

    @property
    def n_correct(self) -> int:
        return sum(1 for t in self.trajectories if t.is_correct)

    @property
    def group_accuracy(self) -> float:
        return self.n_correct / self.n


@dataclass(frozen=True)
class TrainConfig:
    # RL recipe
    gamma: float = 1.0
    alpha: float = 0.16
    eps_low: float = 0.2
    eps_high: float = 0.28
    mu: float = 0.1
    k_lang: float = 0.8
    m_hard: float = 0.0
    m_easy: float = 0.95
    l_hard_frac: float = 0.1
    l_easy_frac: float = 0.3
    prompts_per_batch: int = 128
    responses_per_prompt: int = 16
    mini_batch: int = 128
    critic_warmup_steps: int = 20
    seed: int = 0
    # sampling loop
    batching_mode: str = "caps"
    filter_informative: bool = True
    max_rounds: int = 32
    normalize_advantages: bool = False
    # toy harness
    policy_lr: float = 2.0
    value_lr: float = 0.5
    ppo_epochs: int = 4
    temperature: float = 1.0
    tokens_per_op: int = 6
    max_response_tokens: int = 64
    format_dropout: float = 0.05
    value_bucket_width: int = 2
    bank_size: int = 2048
    tier_mix: tuple = (0.3, 0.4, 0.3)
    workers: int = 1

    def __post_init__(self):
        validate_config(self)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


def validate_config(cfg: TrainConfig) -> None:
    def bad(key, msg):
        raise ConfigError(f"{key}: {msg}")

    if not (0 < cfg.gamma <= 1):
        bad("gamma", "must be in (0, 1]")
    if cfg.alpha <= 0:
        bad("alpha", "must be positive")
    if cfg.eps_low <= 0:
        bad("eps_low", "must be positive")
    if cfg.eps_high <= 0:
        bad("eps_high", "must be positive")
    if cfg.mu < 0:
        bad("mu", "must be non-negative")
    if not (0 < cfg.k_lang <= 1):
        bad("k_lang", "must be in (0, 1]")
    if cfg.m_hard >= cfg.m_easy:
        bad("m_hard", "m_hard < m_easy violated")
    if cfg.m_hard < 0 or cfg.m_easy > 1:
        bad("m_easy", "0 <= m_hard and m_easy <= 1 violated")
    if cfg.l_hard_frac < 0 or cfg.l_easy_frac < 0 or cfg.l_hard_frac + cfg.l_easy_frac > 1:
        bad("l_hard_frac", "0 <= l_hard_frac + l_easy_frac <= 1 violated")
    for key in ("prompts_per_batch", "responses_per_prompt", "mini_batch", "max_rounds",
                "ppo_epochs", "tokens_per_op", "max_response_tokens", "value_bucket_width",
                "bank_size", "workers"):
        if getattr(cfg, key) < 1:
            bad(key, "must be >= 1")
    if cfg.critic_warmup_steps < 0:
        bad("critic_warmup_steps", "must be >= 0")
    if cfg.batching_mode not in BATCHING_MODES:
        bad("batching_mode", f"must be one of {', '.join(BATCHING_MODES)}")
    if cfg.temperature <= 0:
        bad("temperature", "must be positive")
    if not (0 <= cfg.format_dropout < 1):
        bad("format_dropout", "must be in [0, 1)")
    if cfg.policy_lr < 0 or cfg.value_lr < 0:
        bad("policy_lr", "step sizes must be non-negative")
    mix = cfg.tier_mix
    if len(mix) != 3 or any(x < 0 for x in mix) or not math.isclose(sum(mix), 1.0, abs_tol=1e-9):
        bad("tier_mix", "three non-negative fractions summing to 1")


_FIELDS = {f.name: f for f in fields(TrainConfig)}


def _parse_value(key: str, raw: str, lineno: int) -> Any:
    default = _FIELDS[key].default
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(float(x) for x in raw.split(","))
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} (line {lineno})") from None


def parse_config(text: str, **overrides) -> TrainConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{key}: unknown key (line {lineno})")
        if key in values:
            raise ConfigError(f"{key}: set twice (line {lineno})")
        values[key] = _parse_value(key, raw, lineno)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**values)


def load_config(path, **overrides) -> TrainConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), **overrides)


def dump_config(cfg: TrainConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            s = "true" if v else "false"
        elif isinstance(v, tuple):
            s = ",".join(repr(float(x)) for x in v)
        elif isinstance(v, float):
            s = repr(v)
        else:
            s = str(v)
        lines.append(f"{f.name} = {s}")
    return "\n".join(lines) + "\n"


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """All randomness derives from the config seed; ``stream`` separates uses."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def token_lengths(trajectories: Sequence[Trajectory]) -> np.ndarray:
    return np.array([t.length for t in trajectories], dtype=np.int64)
