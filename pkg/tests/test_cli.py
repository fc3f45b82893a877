"""End-to-end runs of every CLI subcommand against temporary directories."""

import json
import os

import pytest

from sgbench.cli import bench_secrets, cli


def _generate(tmp_path, *extra):
    root = str(tmp_path / "instances")
    argv = ["generate", "--out", root] + list(extra)
    assert cli(argv) == 0
    return root


def test_generate_validate_truth_round_trip(tmp_path, capsys):
    root = _generate(tmp_path, "--family", "III", "--N", "11",
                     "--decoys", "2,3", "--seed", "1")
    out = capsys.readouterr().out
    assert "iii-00000001" in out
    assert os.path.exists(os.path.join(root, "iii-00000001", "instance.json"))

    assert cli(["validate", "--dir", root]) == 0
    assert "OK" in capsys.readouterr().out

    assert cli(["truth", "--dir", root]) == 0
    line = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert line["family"] == "III"
    assert sorted(line["prime_bits"]) == [False, True, True]
    assert os.path.exists(os.path.join(root, "iii-00000001", "truth.json"))


def test_generate_all_catalog_items(tmp_path, capsys):
    root = _generate(tmp_path, "--family", "V")
    out = capsys.readouterr().out
    for cid in ("S2_01", "S2_02", "S2_03", "S2_04", "S2_05"):
        assert cid in out
        assert os.path.exists(os.path.join(root, cid, "instance.json"))


def test_prompt_solve_score_pipeline(tmp_path, capsys):
    root = _generate(tmp_path, "--family", "V")
    capsys.readouterr()

    assert cli(["prompt", "--dir", root]) == 0
    prompts = capsys.readouterr().out
    assert "SL(2, Z)" in prompts and "infinite_or_unknown" in prompts

    answers = str(tmp_path / "answers.json")
    assert cli(["solve", "--dir", root, "--out", answers]) == 0
    solved = capsys.readouterr().out
    assert "S2_02\t12" in solved
    assert os.path.exists(answers)

    figures = str(tmp_path / "report")
    assert cli(["score", "--dir", root, "--answers", answers,
                "--figures", figures]) == 0
    table = capsys.readouterr().out
    assert "overall" in table and "family" in table
    assert os.path.exists(os.path.join(figures, "scores.csv"))
    assert os.path.exists(os.path.join(figures, "scorecard.png"))
    with open(os.path.join(figures, "scores.csv"), encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    assert header == ["instance_id", "family", "cell", "reason"]


def test_score_split_infinite_flag(tmp_path, capsys):
    root = _generate(tmp_path, "--family", "V")
    answers = str(tmp_path / "answers.json")
    assert cli(["solve", "--dir", root, "--out", answers]) == 0
    capsys.readouterr()
    figures = str(tmp_path / "report")
    assert cli(["score", "--dir", root, "--answers", answers,
                "--figures", figures, "--split-infinite"]) == 0
    table = capsys.readouterr().out
    # the solver's bare 'infinite' answers become correct commitments
    assert "commit_correct" in table


def test_validate_fails_on_corrupted_instance(tmp_path, capsys):
    root = _generate(tmp_path, "--family", "III", "--N", "11",
                     "--decoys", "2,3", "--seed", "1")
    path = os.path.join(root, "iii-00000001", "instance.json")
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    entry = int(payload["generators"][0]["rows"][0][0])
    payload["generators"][0]["rows"][0][0] = str(entry + 1)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    assert cli(["validate", "--dir", root]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_validate_fails_on_missing_secret(tmp_path, capsys):
    root = _generate(tmp_path, "--family", "V")
    os.remove(os.path.join(root, "S2_01", "secret.json"))
    assert cli(["validate", "--dir", root]) == 1
    assert "missing secret sidecar" in capsys.readouterr().out


def test_validate_empty_dir_fails(tmp_path, capsys):
    assert cli(["validate", "--dir", str(tmp_path / "nothing")]) == 1


def test_bench_exits_clean_and_writes_artifacts(tmp_path, capsys):
    figures = str(tmp_path / "report")
    assert cli(["bench", "--iterations", "50", "--instances", "10",
                "--figures", figures]) == 0
    out = capsys.readouterr().out
    assert "ground_truth" in out
    assert os.path.exists(os.path.join(figures, "bench.csv"))
    assert os.path.exists(os.path.join(figures, "bench.png"))


def test_bench_secrets_mix():
    secrets = bench_secrets(12)
    assert len(secrets) == 12
    families = {s.family for s in secrets}
    assert families == {"V", "III", "IV_v2"}


def test_generate_rejects_unknown_family(tmp_path):
    with pytest.raises(SystemExit):
        cli(["generate", "--family", "XI", "--out", str(tmp_path)])


def test_cli_reports_builder_errors(tmp_path, capsys):
    # family III at a composite level is a ValueError, not a traceback
    assert cli(["generate", "--family", "III", "--N", "10",
                "--out", str(tmp_path / "x")]) == 1
    assert "error:" in capsys.readouterr().err
