"""Command-line entry point: ``rlcurate {curate,train,reward-check,inspect}``.

Exit codes: 0 success, 1 runtime or data error, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, reward, sampler
from .core import ConfigError, NeedsJudge, TrainConfig, load_config, parse_config
from .judge import ExactMatchJudge, HttpJudge, HttpRewriter

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("rlcurate")


@dataclass
class CommandOutcome:
    exit_code: int
    summary: str
    artifacts: list = field(default_factory=list)


def _config(args, **extra) -> TrainConfig:
    overrides = dict(extra)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.config:
        return load_config(args.config, **overrides)
    return TrainConfig(**overrides)


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


# ---------------------------------------------------------------- curate

def cmd_curate(args) -> CommandOutcome:
    from .curation import PipelineOptions, UnknownStage, read_jsonl, run_pipeline, write_jsonl
    from .curation.pipeline import check_stages

    stages = [s.strip() for s in args.stages.split(",") if s.strip()]
    try:
        check_stages(stages)
    except UnknownStage as exc:
        return CommandOutcome(EXIT_USAGE, str(exc))
    cfg = _config(args)
    try:
        records = read_jsonl(args.inp)
    except FileNotFoundError:
        return CommandOutcome(EXIT_ERROR, f"input not found: {args.inp}")
    except ValueError as exc:
        return CommandOutcome(EXIT_ERROR, str(exc))
    opts = PipelineOptions(min_chars=args.min_chars, dedup_threshold=args.dedup_threshold,
                           max_answer_chars=args.max_answer_chars, expand_choices=args.expand_choices,
                           answer_judge=HttpJudge.from_env(), rewriter=HttpRewriter.from_env(),
                           workers=cfg.workers)
    try:
        accepted, rejects = run_pipeline(records, stages, seed=cfg.seed, options=opts)
        write_jsonl(args.out, accepted)
        write_jsonl(args.rejects, rejects)
    except (OSError, ValueError) as exc:
        return CommandOutcome(EXIT_ERROR, str(exc))
    per_stage = Counter(r["stage"] for r in rejects)
    for name in stages:
        print(f"{name}: rejected {per_stage.get(name, 0)}")
    return CommandOutcome(EXIT_OK, f"accepted {len(accepted)} of {len(records)} records",
                          [args.out, args.rejects])


# ---------------------------------------------------------------- train

def _bank(source, cfg):
    from .toytrain import ToyQuestionBank, generate_bank

    if source == "generate":
        return generate_bank(cfg.bank_size, cfg.tier_mix, cfg.seed)
    return ToyQuestionBank.load(source)


def cmd_train(args) -> CommandOutcome:
    from .toytrain import Trainer, read_checkpoint
    from .toytrain.loop import CheckpointError

    try:
        if args.resume:
            ck = read_checkpoint(args.resume)
            overrides = {k: v for k, v in (("seed", args.seed), ("workers", args.workers)) if v is not None}
            cfg = _config(args) if args.config else parse_config(ck["config"], **overrides)
        else:
            cfg = _config(args)
    except (ConfigError, CheckpointError) as exc:
        return CommandOutcome(EXIT_USAGE, str(exc))
    if args.steps < 0:
        return CommandOutcome(EXIT_USAGE, "--steps must be >= 0")
    try:
        bank = _bank(args.bank, cfg)
        trainer = Trainer.load(args.resume, bank, cfg) if args.resume else Trainer(cfg, bank)
    except (OSError, ValueError) as exc:
        return CommandOutcome(EXIT_ERROR, str(exc))

    metrics_path = Path(args.metrics_out)
    mode = "a" if args.resume else "w"
    try:
        with metrics_path.open(mode, encoding="utf-8") as fh:
            def emit(m):
                fh.write(json.dumps(m) + "\n")
                fh.flush()
            trainer.run(args.steps, emit)
    except (sampler.MaxRoundsExceeded, sampler.PoolExhausted) as exc:
        report = getattr(exc, "report", None)
        if report is not None:
            print(json.dumps(report.as_dict()), file=sys.stderr)
        trainer.save(args.checkpoint)
        return CommandOutcome(EXIT_ERROR, f"training stopped at step {trainer.step_count}: {exc}",
                              [str(metrics_path), args.checkpoint])
    trainer.save(args.checkpoint)
    return CommandOutcome(EXIT_OK, f"trained to step {trainer.step_count}",
                          [str(metrics_path), args.checkpoint])


# ---------------------------------------------------------------- reward-check

def cmd_reward_check(args) -> CommandOutcome:
    cfg = _config(args)
    judge = HttpJudge.from_env() or ExactMatchJudge()
    hist = {t: 0 for t in reward.TOTALS}
    bad = 0
    scored = 0
    try:
        fh = open(args.inp, encoding="utf-8")
    except OSError as exc:
        return CommandOutcome(EXIT_ERROR, str(exc))
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                rb = reward.score(row["response"], row["reference"], row.get("kind", "short_text"),
                                  cfg.k_lang, judge=judge, question_id=str(row.get("question_id", "")))
            except (json.JSONDecodeError, KeyError, TypeError, AttributeError, ValueError, NeedsJudge) as exc:
                bad += 1
                _err(f"line {lineno}: {type(exc).__name__}: {exc}")
                continue
            scored += 1
            hist[rb.total] = hist.get(rb.total, 0) + 1
            print(json.dumps({"line": lineno, **rb.as_dict()}))
    print("histogram: " + " ".join(f"{t:+.1f}={hist[t]}" for t in sorted(hist)))
    code = EXIT_ERROR if bad else EXIT_OK
    return CommandOutcome(code, f"scored {scored} lines, {bad} malformed")


# ---------------------------------------------------------------- inspect

def _sniff(path) -> str:
    with open(path, "rb") as fh:
        head = fh.readline()
    if b'"rlcurate-checkpoint"' in head:
        return "checkpoint"
    try:
        first = json.loads(head)
    except (json.JSONDecodeError, UnicodeDecodeError):
        return "unknown"
    if isinstance(first, dict):
        if {"question_id", "attempts", "correct"} <= first.keys():
            return "ledger"
        if "step" in first and "mean_reward" in first:
            return "metrics"
    return "unknown"


def cmd_inspect(args) -> CommandOutcome:
    from .toytrain import read_checkpoint
    from .toytrain.loop import CheckpointError

    path = args.target
    if not Path(path).is_file():
        return CommandOutcome(EXIT_USAGE, f"no such file: {path}")
    kind = args.kind if args.kind != "auto" else _sniff(path)
    if kind == "checkpoint":
        try:
            ck = read_checkpoint(path)
        except CheckpointError as exc:
            return CommandOutcome(EXIT_USAGE, str(exc))
        rows, cols = len(ck["policy"]), len(ck["policy"][0]) if ck["policy"] else 0
        print(f"step {ck['step']}  warmed_up {ck['warmed_up']}  policy {rows}x{cols}  "
              f"value {len(ck['value'])}x{len(ck['value'][0])}  ledger {len(ck['ledger'])} questions")
        return CommandOutcome(EXIT_OK, "checkpoint ok")
    if kind == "ledger":
        try:
            cfg = _config(args)
            ledger = sampler.AccuracyLedger.load(path)
        except ConfigError as exc:
            return CommandOutcome(EXIT_USAGE, str(exc))
        except (ValueError, KeyError, TypeError) as exc:
            return CommandOutcome(EXIT_USAGE, f"unreadable ledger: {exc}")
        counts = sampler.category_counts(ledger, [q for q, _ in ledger.items()], cfg.m_hard, cfg.m_easy)
        print(" ".join(f"{c}={counts[c]}" for c in sampler.CATEGORIES))
        return CommandOutcome(EXIT_OK, f"{len(ledger)} questions")
    if kind == "metrics":
        with open(path, encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
        for ln in lines[-args.tail:]:
            print(ln)
        return CommandOutcome(EXIT_OK, f"{len(lines)} metric lines")
    return CommandOutcome(EXIT_USAGE, f"unrecognized file: {path}")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--workers", type=int, help="worker pool size (default 1)")

    p = argparse.ArgumentParser(prog="rlcurate", description="RL post-training and data-curation toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("curate", parents=[common], help="run curation stages over a JSONL file")
    c.add_argument("--stages", required=True, help="comma-separated stage names, applied in order")
    c.add_argument("--in", dest="inp", required=True, help="input records (JSONL)")
    c.add_argument("--out", required=True, help="accepted records (JSONL)")
    c.add_argument("--rejects", required=True, help="reject report (JSONL)")
    c.add_argument("--min-chars", type=int, default=64, help="short_entry cutoff (default 64)")
    c.add_argument("--dedup-threshold", type=float, default=0.8, help="MinHash Jaccard threshold (default 0.8)")
    c.add_argument("--max-answer-chars", type=int, default=15, help="rl_quality answer length limit")
    c.add_argument("--expand-choices", action="store_true", help="choice_to_open also emits one item per option")
    c.set_defaults(func=cmd_curate)

    t = sub.add_parser("train", parents=[common], help="train the toy policy")
    t.add_argument("--bank", default="generate", help="question bank JSONL, or 'generate'")
    t.add_argument("--steps", type=int, default=200, help="update steps to run")
    t.add_argument("--metrics-out", default="metrics.jsonl", help="per-step metrics (JSONL)")
    t.add_argument("--checkpoint", default="checkpoint.jsonl", help="checkpoint written at the end")
    t.add_argument("--resume", help="checkpoint to resume from; metrics are appended")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("reward-check", parents=[common], help="score responses")
    r.add_argument("--in", dest="inp", required=True, help="JSONL of {response, reference, kind}")
    r.set_defaults(func=cmd_reward_check)

    i = sub.add_parser("inspect", parents=[common], help="summarize a ledger, metrics or checkpoint file")
    i.add_argument("target", help="file to inspect")
    i.add_argument("--kind", choices=("auto", "ledger", "metrics", "checkpoint"), default="auto")
    i.add_argument("--tail", type=int, default=1, help="metric lines to show")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers is not None and args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        outcome = args.func(args)
    except ConfigError as exc:
        outcome = CommandOutcome(EXIT_USAGE, str(exc))
    stream = sys.stdout if outcome.exit_code == EXIT_OK else sys.stderr
    print(outcome.summary, file=stream)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
