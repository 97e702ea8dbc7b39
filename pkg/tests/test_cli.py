import json
import re
from pathlib import Path

import pytest

from rlcurate import cli
from rlcurate.cli import EXIT_ERROR, EXIT_OK, EXIT_USAGE, build_parser, main

GOLDEN = Path(__file__).parent / "golden" / "cli_flags.txt"
SMALL_CONFIG = """\
prompts_per_batch = 16
responses_per_prompt = 4
mini_batch = 8
critic_warmup_steps = 2
bank_size = 256
"""
FLAG_RE = re.compile(r"(?<![\w-])(--?[a-z][a-z-]*)")


def help_flags(parser):
    return set(FLAG_RE.findall(parser.format_help()))


def subparsers(parser):
    action = next(a for a in parser._actions if a.dest == "command")
    return action.choices


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_CONFIG)
    return path


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")
    return path


def test_help_lists_every_documented_flag():
    golden = {line.split()[0]: set(line.split()[1:]) for line in GOLDEN.read_text().splitlines() if line.strip()}
    parser = build_parser()
    assert help_flags(parser) == golden.pop("rlcurate")
    subs = subparsers(parser)
    assert set(subs) == set(golden)
    for name, flags in golden.items():
        assert help_flags(subs[name]) == flags, name


def test_version_and_missing_command(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0 and "rlcurate" in capsys.readouterr().out
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == EXIT_USAGE


# ---------------------------------------------------------------- curate

def corpus():
    base = "A company records revenue when control transfers to the customer. Which standard governs this? "
    return [
        {"id": "a", "prompt": base + "Give the name.", "reference_answer": "IFRS 15", "cot": ""},
        {"id": "b", "prompt": base + "Give the name.", "reference_answer": "IFRS 15", "cot": ""},
        {"id": "c", "prompt": "See the chart at https://example.com/x.png and report the total growth rate "
                              "for the fiscal year in percent.", "reference_answer": "12", "cot": ""},
        {"id": "d", "prompt": "Compute the present value of 100 received in two years at a 10% annual "
                              "discount rate, rounded to two decimals.", "reference_answer": "82.64", "cot": ""},
    ]


def test_curate_happy_path(tmp_path, capsys):
    src = write_jsonl(tmp_path / "in.jsonl", corpus())
    out, rej = tmp_path / "out.jsonl", tmp_path / "rej.jsonl"
    code = main(["curate", "--stages", "dedup,media", "--in", str(src), "--out", str(out), "--rejects", str(rej)])
    text = capsys.readouterr().out
    assert code == EXIT_OK
    assert "dedup: rejected 1" in text and "media: rejected 1" in text and "accepted 2 of 4" in text
    assert [json.loads(x)["id"] for x in out.read_text().splitlines()] == ["a", "d"]
    rejects = [json.loads(x) for x in rej.read_text().splitlines()]
    assert [(r["id"], r["stage"]) for r in rejects] == [("b", "dedup"), ("c", "media")]
    assert rejects[0]["reason"] == "near-duplicate of a"


def test_curate_unknown_stage(tmp_path, capsys):
    src = write_jsonl(tmp_path / "in.jsonl", corpus())
    code = main(["curate", "--stages", "dedup,foo", "--in", str(src), "--out", str(tmp_path / "o"),
                 "--rejects", str(tmp_path / "r")])
    assert code == EXIT_USAGE and "foo" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_curate_empty_input(tmp_path, capsys):
    src = tmp_path / "in.jsonl"
    src.write_text("")
    out, rej = tmp_path / "o.jsonl", tmp_path / "r.jsonl"
    code = main(["curate", "--stages", "media", "--in", str(src), "--out", str(out), "--rejects", str(rej)])
    assert code == EXIT_OK and "accepted 0 of 0" in capsys.readouterr().out
    assert out.read_text() == "" and rej.read_text() == ""


def test_curate_bad_json_and_missing_file(tmp_path, capsys):
    src = tmp_path / "in.jsonl"
    src.write_text('{"id": "a", "prompt": "x"}\n{oops\n')
    args = ["--out", str(tmp_path / "o"), "--rejects", str(tmp_path / "r")]
    assert main(["curate", "--stages", "media", "--in", str(src)] + args) == EXIT_ERROR
    assert ":2:" in capsys.readouterr().err
    assert main(["curate", "--stages", "media", "--in", str(tmp_path / "nope")] + args) == EXIT_ERROR


def test_curate_seed_gives_identical_files(tmp_path):
    src = write_jsonl(tmp_path / "in.jsonl", corpus())
    outs = []
    for k in range(2):
        out, rej = tmp_path / f"o{k}", tmp_path / f"r{k}"
        main(["curate", "--seed", "3", "--stages", "hyperlink_strip,dedup,short_entry", "--in", str(src),
              "--out", str(out), "--rejects", str(rej)])
        outs.append((out.read_bytes(), rej.read_bytes()))
    assert outs[0] == outs[1]


# ---------------------------------------------------------------- train

def test_train_smoke_and_resume(tmp_path, small_config, capsys):
    m, ck = tmp_path / "m.jsonl", tmp_path / "c.jsonl"
    base = ["train", "--config", str(small_config), "--metrics-out", str(m), "--checkpoint", str(ck)]
    assert main(base + ["--steps", "5"]) == EXIT_OK
    lines = m.read_text().splitlines()
    assert len(lines) == 5 and [json.loads(x)["step"] for x in lines] == [1, 2, 3, 4, 5]
    assert main(["train", "--resume", str(ck), "--metrics-out", str(m), "--checkpoint", str(ck),
                 "--steps", "2"]) == EXIT_OK
    assert [json.loads(x)["step"] for x in m.read_text().splitlines()] == [1, 2, 3, 4, 5, 6, 7]
    assert "trained to step 7" in capsys.readouterr().out


def test_train_resume_matches_uninterrupted(tmp_path, small_config):
    def run(tag, chunks):
        m, ck = tmp_path / f"{tag}.m", tmp_path / f"{tag}.c"
        main(["train", "--config", str(small_config), "--metrics-out", str(m), "--checkpoint", str(ck),
              "--steps", str(chunks[0])])
        for n in chunks[1:]:
            main(["train", "--resume", str(ck), "--metrics-out", str(m), "--checkpoint", str(ck), "--steps", str(n)])
        return m.read_bytes(), ck.read_bytes()

    assert run("a", [4]) == run("b", [2, 2])


def test_train_invalid_config(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("alpha = 0.1\nalpha = 0.2\n")
    assert main(["train", "--config", str(bad), "--steps", "1", "--metrics-out", str(tmp_path / "m")]) == EXIT_USAGE
    assert "alpha" in capsys.readouterr().err
    assert main(["train", "--steps", "-1", "--metrics-out", str(tmp_path / "m")]) == EXIT_USAGE


def test_train_exhausted_sampling_exits_one(tmp_path, capsys):
    cfg = tmp_path / "tight.cfg"
    cfg.write_text(SMALL_CONFIG.replace("mini_batch = 8", "mini_batch = 16") + "max_rounds = 1\n")
    code = main(["train", "--config", str(cfg), "--steps", "1", "--metrics-out", str(tmp_path / "m"),
                 "--checkpoint", str(tmp_path / "c")])
    err = capsys.readouterr().err
    assert code == EXIT_ERROR
    assert json.loads(err.splitlines()[0])["rounds"] == 1


def test_train_seed_gives_identical_metrics(tmp_path, small_config):
    blobs = []
    for k in range(2):
        m = tmp_path / f"m{k}"
        main(["train", "--config", str(small_config), "--seed", "7", "--steps", "3", "--metrics-out", str(m),
              "--checkpoint", str(tmp_path / f"c{k}")])
        blobs.append((m.read_bytes(), (tmp_path / f"c{k}").read_bytes()))
    assert blobs[0] == blobs[1]
    m = tmp_path / "m9"
    main(["train", "--config", str(small_config), "--seed", "8", "--steps", "3", "--metrics-out", str(m),
          "--checkpoint", str(tmp_path / "c9")])
    assert m.read_bytes() != blobs[0][0]


# ---------------------------------------------------------------- reward-check

CANONICAL = [
    {"response": "<think>add them</think> \\boxed{42}", "reference": "42", "kind": "numeric"},
    {"response": "<think>add them</think> \\boxed{41}", "reference": "42", "kind": "numeric"},
    {"response": "the answer is 42", "reference": "42", "kind": "numeric"},
]


def reward_lines(out):
    return [json.loads(x) for x in out.splitlines() if x.startswith("{")]


def test_reward_check_canonical(tmp_path, capsys):
    src = write_jsonl(tmp_path / "r.jsonl", CANONICAL)
    assert main(["reward-check", "--in", str(src)]) == EXIT_OK
    out = capsys.readouterr().out
    assert [r["total"] for r in reward_lines(out)] == [2.0, -1.5, -2.0]
    assert "histogram: -2.5=0 -2.0=1 -1.5=1 -1.0=0 +1.5=0 +2.0=1" in out


def test_reward_check_malformed_line(tmp_path, capsys):
    rows = [json.dumps(CANONICAL[i % 3]) for i in range(10)]
    rows[4] = '{"response": "<think>x</think>'
    (tmp_path / "r.jsonl").write_text("\n".join(rows) + "\n")
    assert main(["reward-check", "--in", str(tmp_path / "r.jsonl")]) == EXIT_ERROR
    captured = capsys.readouterr()
    assert len(reward_lines(captured.out)) == 9
    assert "line 5:" in captured.err and "9 lines, 1 malformed" in captured.err


def test_reward_check_empty_file(tmp_path, capsys):
    (tmp_path / "r.jsonl").write_text("")
    assert main(["reward-check", "--in", str(tmp_path / "r.jsonl")]) == EXIT_OK
    out = capsys.readouterr().out
    assert reward_lines(out) == [] and "histogram: -2.5=0 -2.0=0 -1.5=0 -1.0=0 +1.5=0 +2.0=0" in out


# ---------------------------------------------------------------- inspect

def test_inspect_ledger(tmp_path, capsys):
    led = write_jsonl(tmp_path / "l.jsonl", [{"question_id": "a", "attempts": 4, "correct": 0},
                                            {"question_id": "b", "attempts": 4, "correct": 2},
                                            {"question_id": "c", "attempts": 4, "correct": 4}])
    assert main(["inspect", str(led)]) == EXIT_OK
    assert "hard=1 easy=1 mid=1 unseen=0" in capsys.readouterr().out


def test_inspect_metrics_and_checkpoint(tmp_path, small_config, capsys):
    m, ck = tmp_path / "m.jsonl", tmp_path / "c.jsonl"
    main(["train", "--config", str(small_config), "--steps", "2", "--metrics-out", str(m), "--checkpoint", str(ck)])
    capsys.readouterr()
    assert main(["inspect", str(m)]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[0] == m.read_text().splitlines()[-1]
    assert main(["inspect", str(ck)]) == EXIT_OK
    assert "step 2" in capsys.readouterr().out


def test_inspect_truncated_checkpoint(tmp_path, small_config, capsys):
    m, ck = tmp_path / "m.jsonl", tmp_path / "c.jsonl"
    main(["train", "--config", str(small_config), "--steps", "1", "--metrics-out", str(m), "--checkpoint", str(ck)])
    data = ck.read_bytes()
    ck.write_bytes(data[: len(data) // 2])
    capsys.readouterr()
    assert main(["inspect", str(ck)]) == EXIT_USAGE
    assert re.search(r"offset \d+", capsys.readouterr().err)


def test_inspect_unrecognized(tmp_path, capsys):
    (tmp_path / "x.txt").write_text("hello\n")
    assert main(["inspect", str(tmp_path / "x.txt")]) == EXIT_USAGE
    assert main(["inspect", str(tmp_path / "missing")]) == EXIT_USAGE


def test_outcome_artifacts_exist_on_success(tmp_path, small_config):
    import argparse
    args = argparse.Namespace(config=str(small_config), seed=None, workers=None, bank="generate", steps=1,
                              metrics_out=str(tmp_path / "m"), checkpoint=str(tmp_path / "c"), resume=None)
    outcome = cli.cmd_train(args)
    assert outcome.exit_code == EXIT_OK
    assert all(Path(p).exists() for p in outcome.artifacts)
