import json
import subprocess
import sys

import numpy as np

from ctxtree import CStree, StateSpace, random_cstree, sample, write_csv
from ctxtree.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_enumerate_count_only(capsys):
    code, out, _ = run(capsys, "enumerate", "--cards", "2,2", "--beta", "2", "--count-only")
    assert code == 0
    assert out.strip() == "8"


def test_enumerate_listing(capsys):
    code, out, _ = run(capsys, "enumerate", "--cards", "2,2", "--beta", "2")
    assert code == 0
    lines = out.strip().split("\n")
    assert len(lines) == 8
    parsed = [json.loads(line) for line in lines]
    assert parsed[0] == [{}]
    assert all(isinstance(entry, list) for entry in parsed)
    assert len({line for line in lines}) == 8


def test_enumerate_usable_restriction(capsys):
    code, out, _ = run(
        capsys, "enumerate", "--cards", "2,2,2", "--usable", "0", "--count-only"
    )
    assert code == 0
    assert out.strip() == "2"


def test_enumerate_beta3_rejected(capsys):
    code, _, err = run(capsys, "enumerate", "--cards", "2,2", "--beta", "3", "--count-only")
    assert code == 2
    assert "beta" in err


def test_usage_error_exit_1(capsys):
    code, _, err = run(capsys, "enumerate", "--no-such-flag")
    assert code == 1
    code, _, _ = run(capsys, "bogus-command")
    assert code == 1


def test_missing_file_exit_2(capsys):
    code, _, err = run(capsys, "kl", "--p", "/nonexistent.json", "--q", "/nonexistent.json")
    assert code == 2


def test_generate_sample_learn_kl_pipeline(tmp_path, capsys):
    truth = tmp_path / "truth.json"
    data = tmp_path / "data.csv"
    model = tmp_path / "model.json"
    trace = tmp_path / "trace.tsv"

    code, _, _ = run(
        capsys, "generate", "--cards", "2,2,2,2,2", "--beta", "2", "--seed", "11",
        "--out", str(truth),
    )
    assert code == 0
    code, _, _ = run(
        capsys, "sample", "--model", str(truth), "-n", "4000", "--seed", "12",
        "--out", str(data),
    )
    assert code == 0
    code, _, _ = run(
        capsys, "learn", "--data", str(data), "--beta", "2", "--ess", "1.0",
        "--iterations", "1500", "--burn-in", "300", "--seed", "13",
        "--out", str(model), "--trace", str(trace),
    )
    assert code == 0
    code, out, _ = run(capsys, "kl", "--p", str(truth), "--q", str(model))
    assert code == 0
    kl = float(out.strip())
    assert 0.0 <= kl < 0.5
    assert len(trace.read_text().strip().split("\n")) == 1200

    code, out, _ = run(capsys, "kl", "--p", str(truth), "--q", str(model), "--both-directions")
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0].startswith("pq\t") and lines[1].startswith("qp\t")


def test_kl_self_is_zero(tmp_path, capsys):
    model = tmp_path / "m.json"
    run(capsys, "generate", "--cards", "2,2,2", "--seed", "3", "--out", str(model))
    code, out, _ = run(capsys, "kl", "--p", str(model), "--q", str(model))
    assert code == 0
    assert abs(float(out.strip())) <= 1e-12


def test_model_roundtrip_byte_identical(tmp_path, capsys):
    model = tmp_path / "m.json"
    run(capsys, "generate", "--cards", "2,3,2", "--seed", "5", "--out", str(model))
    text = model.read_text()
    again = CStree.from_json(model)
    assert again.to_json() + "\n" == text


def test_sample_deterministic(tmp_path, capsys):
    model = tmp_path / "m.json"
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "generate", "--cards", "2,2", "--seed", "1", "--out", str(model))
    run(capsys, "sample", "--model", str(model), "-n", "50", "--seed", "9", "--out", str(a))
    run(capsys, "sample", "--model", str(model), "-n", "50", "--seed", "9", "--out", str(b))
    assert a.read_text() == b.read_text()


def test_seed_echoed_when_absent(tmp_path, capsys):
    model = tmp_path / "m.json"
    code, _, err = run(capsys, "generate", "--cards", "2,2", "--out", str(model))
    assert code == 0
    assert "seed:" in err


def test_ldag_outputs(tmp_path, capsys, four_var_tree_a):
    model = tmp_path / "m.json"
    dot = tmp_path / "g.dot"
    js = tmp_path / "g.json"
    four_var_tree_a.to_json(model)
    code, out, _ = run(capsys, "ldag", "--model", str(model))
    assert code == 0
    assert "digraph" in out
    code, _, _ = run(capsys, "ldag", "--model", str(model), "--dot", str(dot), "--json", str(js))
    assert code == 0
    assert '0 -> 3 [label="(0,1),(*,0)"]' in dot.read_text()
    doc = json.loads(js.read_text())
    assert doc["p"] == 4


def test_score_subcommand(tmp_path, capsys):
    rng = np.random.default_rng(0)
    truth = random_cstree(StateSpace([2, 2, 2]), 2, rng)
    data = sample(truth, 300, rng)
    csv_path = tmp_path / "d.csv"
    write_csv(data, csv_path)
    model = tmp_path / "m.json"
    truth.to_json(model)
    dump = tmp_path / "z.tsv"

    code, out, _ = run(
        capsys, "score", "--data", str(csv_path), "--order", "0,1,2",
        "--dump-scores", str(dump),
    )
    assert code == 0
    assert out.startswith("log_order_score\t")
    float(out.strip().split("\t")[1])
    assert len(dump.read_text().strip().split("\n")) == 27  # 9 contexts x 3 vars

    code, out, _ = run(capsys, "score", "--data", str(csv_path), "--model", str(model))
    assert code == 0
    lines = dict(line.split("\t") for line in out.strip().split("\n"))
    assert set(lines) == {"log_marginal_likelihood", "log_order_score"}

    code, _, _ = run(capsys, "score", "--data", str(csv_path))
    assert code == 2


def test_resource_cap_exit_3(tmp_path, capsys):
    rng = np.random.default_rng(1)
    rows = rng.integers(0, 2, size=(5, 18))
    from ctxtree import Dataset

    csv_path = tmp_path / "wide.csv"
    write_csv(Dataset(rows, StateSpace([2] * 18)), csv_path)
    code, _, err = run(
        capsys, "learn", "--data", str(csv_path), "--iterations", "10",
        "--burn-in", "1", "--seed", "0", "--out", str(tmp_path / "m.json"),
    )
    assert code == 3
    assert "resource" in err


def test_console_script_version():
    proc = subprocess.run(
        [sys.executable, "-m", "ctxtree.cli", "--version"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "ctxtree" in proc.stdout
