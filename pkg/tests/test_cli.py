import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from dpmcmc.cli import EXIT_INPUT, EXIT_OK, EXIT_RESOURCE, EXIT_USAGE, read_matrix, run


def data_files(root: Path) -> dict[str, bytes]:
    """Every output except wall-clock files, keyed by relative path."""
    out = {}
    for p in sorted(root.rglob("*")):
        rel = p.relative_to(root)
        if p.is_file() and rel.parts[0] != "timing":
            out[str(rel)] = p.read_bytes()
    return out


@pytest.fixture(scope="module")
def gen5(tmp_path_factory):
    root = tmp_path_factory.mktemp("gen")
    assert run(["gen", "--d", "5", "--n", "300", "--seed", "3", "--out", str(root / "g")]) == EXIT_OK
    return root / "g"


def test_gen_outputs(gen5):
    assert (gen5 / "data.csv").exists() and (gen5 / "network.json").exists()
    man = json.loads((gen5 / "manifest.json").read_text())
    assert man["command"] == "gen" and man["seed"] == 3 and man["config"]["d"] == 5


def test_brute_force_and_dp_agree(gen5, tmp_path):
    data = str(gen5 / "data.csv")
    assert run(["exact", "--data", data, "--dp", "--out", str(tmp_path / "dp")]) == EXIT_OK
    assert run(["exact", "--data", data, "--brute-force", "--out", str(tmp_path / "bf")]) == EXIT_OK
    a = read_matrix(tmp_path / "dp" / "edge_marginals.csv")
    b = read_matrix(tmp_path / "bf" / "edge_marginals.csv")
    assert np.abs(a - b).max() <= 1e-9
    s1 = json.loads((tmp_path / "dp" / "summary.json").read_text())
    s2 = json.loads((tmp_path / "bf" / "summary.json").read_text())
    assert s1["log_evidence"] == pytest.approx(s2["log_evidence"], abs=1e-9)
    assert s1["map"] == s2["map"]


def test_json_matrix_format(gen5, tmp_path):
    assert run(["exact", "--data", str(gen5 / "data.csv"), "--format", "json", "--out", str(tmp_path / "j")]) == 0
    m = json.loads((tmp_path / "j" / "edge_marginals.json").read_text())
    assert len(m) == 5 and len(m[0]) == 5


def test_score_then_exact_from_table(gen5, tmp_path):
    assert run(["score", "--data", str(gen5 / "data.csv"), "--out", str(tmp_path / "s")]) == 0
    assert run(["exact", "--scores", str(tmp_path / "s" / "scores.json"), "--out", str(tmp_path / "e")]) == 0
    assert "chow_liu" not in json.loads((tmp_path / "e" / "summary.json").read_text())


def test_sample_labels(gen5, tmp_path):
    data = str(gen5 / "data.csv")
    assert run(["sample", "--data", data, "--beta", "1.0", "--steps", "200", "--out", str(tmp_path / "a")]) == 0
    assert run(["sample", "--data", data, "--beta", "0.0", "--steps", "200", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "local_chain0.samples").exists()
    assert (tmp_path / "b" / "global_chain0.samples").exists()
    assert json.loads((tmp_path / "b" / "diagnostics.json").read_text())["label"] == "global"


@pytest.mark.parametrize("argv", [
    ["sample", "--kernel", "hybrid", "--steps", "300", "--chains", "2", "--random-init"],
    ["exact"],
    ["convergence", "--steps", "300", "--points", "5"],
    ["predict", "--steps", "200", "--folds", "2", "--methods", "bma", "map", "factored"],
])
def test_rerun_is_byte_identical(gen5, tmp_path, argv):
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert run(argv + ["--data", str(gen5 / "data.csv"), "--seed", "5", "--out", str(out)]) == EXIT_OK
        outs.append(data_files(out))
    assert outs[0] == outs[1]
    assert "manifest.json" in outs[0]


def test_chains_use_distinct_streams(gen5, tmp_path):
    run(["sample", "--data", str(gen5 / "data.csv"), "--steps", "300", "--chains", "2", "--out", str(tmp_path / "c")])
    a = (tmp_path / "c" / "hybrid_chain0.samples").read_text()
    b = (tmp_path / "c" / "hybrid_chain1.samples").read_text()
    assert a != b


def test_features_and_structure_eval(gen5, tmp_path):
    data = str(gen5 / "data.csv")
    run(["sample", "--data", data, "--steps", "2000", "--out", str(tmp_path / "s")])
    samples = str(tmp_path / "s" / "hybrid_chain0.samples")
    assert run(["features", "--samples", samples, "--kind", "undirected-edge", "--out", str(tmp_path / "f")]) == 0
    m = read_matrix(tmp_path / "f" / "features.csv")
    assert np.allclose(m, m.T)
    assert run(["structure-eval", "--data", data, "--truth", str(gen5 / "network.json"), "--dp",
                "--samples", samples, "--out", str(tmp_path / "e")]) == 0
    res = json.loads((tmp_path / "e" / "auc.json").read_text())
    assert 0 <= res["dp"]["undirected-edge"] <= 1
    assert set(res["samples"]) == {"undirected-edge", "directed-edge", "directed-path"}


def test_priors_report(tmp_path):
    assert run(["priors", "--d", "3", "--out", str(tmp_path / "p")]) == 0
    kl = json.loads((tmp_path / "p" / "kl_to_uniform.json").read_text())
    assert kl["flat_ellis"] == pytest.approx(0.0, abs=1e-12)
    lines = (tmp_path / "p" / "prior_masses.csv").read_text().splitlines()
    assert len(lines) == 26


def test_exit_codes_and_no_partial_output(gen5, tmp_path, capsys):
    out = tmp_path / "never"
    assert run(["exact", "--data", str(tmp_path / "missing.csv"), "--out", str(out)]) == EXIT_INPUT
    assert run(["exact", "--data", str(gen5 / "data.csv"), "--bogus", "--out", str(out)]) == EXIT_USAGE
    assert run(["nope"]) == EXIT_USAGE
    assert run(["sample", "--data", str(gen5 / "data.csv"), "--beta", "2", "--out", str(out)]) == EXIT_INPUT
    err = capsys.readouterr().err.strip().splitlines()
    assert all(line.startswith("error: ") for line in err)
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n0,1\n0,z\n")
    assert run(["score", "--data", str(bad), "--out", str(out)]) == EXIT_INPUT
    assert not out.exists()
    assert not any(p.name.startswith(".dpmcmc-") for p in tmp_path.iterdir())


def test_brute_force_cap_is_usage_error(tmp_path):
    run(["gen", "--d", "6", "--n", "50", "--out", str(tmp_path / "g")])
    code = run(["exact", "--data", str(tmp_path / "g" / "data.csv"), "--brute-force", "--out", str(tmp_path / "x")])
    assert code == EXIT_USAGE
    assert not (tmp_path / "x").exists()


def test_resource_cap_exit_code(tmp_path):
    run(["gen", "--d", "23", "--n", "20", "--max-indegree", "1", "--out", str(tmp_path / "g")])
    code = run(["exact", "--data", str(tmp_path / "g" / "data.csv"), "--max-indegree", "1", "--out",
                str(tmp_path / "x")])
    assert code == EXIT_RESOURCE


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "dpmcmc.cli", "priors", "--d", "2", "--out", str(tmp_path / "p")],
                       capture_output=True, text=True, env={**os.environ})
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, "-m", "dpmcmc.cli", "exact"], capture_output=True, text=True)
    assert r.returncode == EXIT_USAGE and r.stderr.count("\n") == 1
