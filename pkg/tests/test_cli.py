from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from ssggm.cli import main


def run(*argv) -> int:
    return main([str(a) for a in argv])


def read_rows(path):
    with open(path) as fh:
        return [r for r in csv.reader(line for line in fh if not line.startswith("#"))]


@pytest.fixture
def gen_dir(tmp_path):
    d = tmp_path / "gen"
    assert run("generate", "--scenario", "tridiagonal", "--p", 6, "--n", 400, "--seed", 3, "--out-dir", d) == 0
    return d


def test_generate_outputs(tmp_path):
    d = tmp_path / "g"
    assert run("generate", "--scenario", "tridiagonal", "--p", 10, "--n", 50, "--seed", 1, "--out-dir", d) == 0
    assert {f.name for f in d.iterdir()} == {"Y.csv", "omega0.csv", "z0.csv", "truth.json"}
    edges = np.loadtxt(d / "z0.csv", delimiter=",", comments="#", dtype=int)
    assert edges.shape == (9, 2) and np.all(edges[:, 1] == edges[:, 0] + 1)
    assert np.loadtxt(d / "Y.csv", delimiter=",", comments="#").shape == (50, 10)
    meta = json.loads((d / "truth.json").read_text())
    assert meta["manifest"]["id"] == (d / "Y.csv").read_text().splitlines()[0].split("=")[1]


def test_generate_is_byte_reproducible(tmp_path):
    for name in ("a", "b"):
        assert run("generate", "--p", 8, "--n", 30, "--seed", 5, "--out-dir", tmp_path / name) == 0
    for f in ("Y.csv", "omega0.csv", "z0.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_generate_block_mismatch_fails(tmp_path, capsys):
    assert run("generate", "--scenario", "block", "--p", 10, "--block", 4, "--n", 5, "--out-dir", tmp_path) == 1
    assert "block" in capsys.readouterr().err


def test_usage_error_exits_two(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("generate", "--p", 5, "--n", 5, "--bogus", 1)
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        run("fit", "--data", tmp_path / "Y.csv", "--algorithm", "nope")
    assert exc.value.code == 2


def test_fit_bad_move_probabilities(gen_dir, tmp_path):
    code = run("fit", "--data", gen_dir / "Y.csv", "--algorithm", "bdmh", "--iters", 20, "--warmup", 5,
               "--p-birth", 0.7, "--p-death", 0.5, "--out-dir", tmp_path / "f")
    assert code == 1


def test_fit_defaults_and_auto_m(gen_dir, tmp_path):
    d = tmp_path / "f"
    assert run("fit", "--data", gen_dir / "Y.csv", "--algorithm", "gimh", "--iters", 60, "--warmup", 20,
               "--table-T", 200, "--table-warmup", 50, "--out-dir", d) == 0
    info = json.loads((d / "summary.json").read_text())
    assert info["manifest"]["hyper"]["M"] == math.ceil(math.sqrt(6))
    from ssggm.cli import build_parser

    args = build_parser().parse_args(["fit", "--data", "x.csv"])
    assert (args.iters, args.warmup) == (15000, 5000)


def test_fit_summarize_round_trip(gen_dir, tmp_path):
    f1, f2 = tmp_path / "f1", tmp_path / "f2"
    for d, seed in ((f1, 1), (f2, 2)):
        assert run("fit", "--data", gen_dir / "Y.csv", "--iters", 1500, "--warmup", 500, "--seed", seed,
                   "--theta", 0.2, "--g1", 3.0, "--lam", 0.02, "--out-dir", d) == 0
    for name in ("incl_prob.csv", "mean_omega.csv", "ci_lower.csv", "ci_upper.csv", "samples.csv"):
        assert (f1 / name).exists()
    s = tmp_path / "s"
    assert run("summarize", f1, f1, "--truth", gen_dir, "--alpha", 0.05, "--out-dir", s) == 0
    rep = json.loads((s / "report.json").read_text())
    assert rep["chain_diff"] == {"mean_omega": 0.0, "incl_prob": 0.0}
    assert rep["alpha"] == 0.05 and rep["manifest"]["config"]["alpha"] == 0.05
    assert rep["eval"]["fdr"] == 0.0 and rep["eval"]["power"] > 0
    assert read_rows(s / "selection.csv")[0] == ["i", "j", "incl_prob"]
    assert run("summarize", f1, f2, "--ci-level", 0.8, "--out-dir", s) == 0
    rep = json.loads((s / "report.json").read_text())
    assert 0 < rep["chain_diff"]["mean_omega"] < 0.1


def test_summarize_perfect_truth(tmp_path, gen_dir):
    from ssggm.synth import GroundTruth

    truth = GroundTruth.load(gen_dir)
    f = tmp_path / "perfect"
    f.mkdir()
    np.savetxt(f / "incl_prob.csv", truth.Z0 + np.eye(truth.p), delimiter=",")
    np.savetxt(f / "mean_omega.csv", truth.Omega0, delimiter=",")
    (f / "summary.json").write_text(json.dumps({"n_retained": 10}))
    s = tmp_path / "s"
    assert run("summarize", f, "--truth", gen_dir, "--out-dir", s) == 0
    e = json.loads((s / "report.json").read_text())["eval"]
    assert (e["fdr"], e["power"], e["mae_omega"], e["auc"]) == (0.0, 1.0, 0.0, 1.0)


def test_oracle_symmetric_and_normalized(tmp_path):
    Y = np.random.default_rng(0).normal(size=(40, 3))
    np.savetxt(tmp_path / "Y.csv", Y, delimiter=",")
    # identical columns 1 and 2 make the two single-edge models for column 0 exchangeable
    Y[:, 2] = Y[:, 1]
    Y[:, 2] += 1e-300
    d = tmp_path / "o"
    assert run("oracle", "--data", tmp_path / "Y.csv", "--j", 0, "--theta", 0.3, "--g1", 2, "--lam", 0.1,
               "--out-dir", d) == 0
    res = json.loads((d / "oracle.json").read_text())
    assert abs(res["sum"] - 1) <= 1e-12 and res["n_models"] == 4
    Ys = np.column_stack([Y[:, 0], Y[:, 1], Y[:, 1]])
    np.savetxt(tmp_path / "Ys.csv", Ys, delimiter=",")
    assert run("oracle", "--data", tmp_path / "Ys.csv", "--j", 0, "--theta", 0.3, "--g1", 2, "--lam", 0.1,
               "--out-dir", d) == 0
    probs = {r[1]: float(r[2]) for r in read_rows(d / "oracle.csv")[1:]}
    assert probs["10"] == pytest.approx(probs["01"], rel=1e-12)


def test_oracle_kernel_tv(gen_dir, tmp_path):
    d = tmp_path / "o"
    assert run("oracle", "--data", gen_dir / "Y.csv", "--j", 2, "--kernel", "gibbs", "--updates", 100000,
               "--theta", 0.25, "--g1", 2.5, "--lam", 0.05, "--out-dir", d) == 0
    assert json.loads((d / "oracle.json").read_text())["tv"] < 0.02


def test_oracle_rejects_large_p(tmp_path):
    np.savetxt(tmp_path / "Y.csv", np.random.default_rng(0).normal(size=(20, 13)), delimiter=",")
    assert run("oracle", "--data", tmp_path / "Y.csv", "--j", 0, "--out-dir", tmp_path) == 1


def test_bench_rows_and_determinism(tmp_path):
    common = ["bench", "--p", "8", "--iters", 300, "--warmup", 100, "--grid-points", 4, "--theta", 0.2,
              "--g1", 3, "--lam", 0.02]
    assert run(*common, "--out-dir", tmp_path / "a") == 0
    assert run(*common, "--out-dir", tmp_path / "b") == 0
    rows_a = read_rows(tmp_path / "a" / "bench.csv")
    rows_b = read_rows(tmp_path / "b" / "bench.csv")
    head = rows_a[0]
    assert len(rows_a) == 1 + 4
    ia, io = head.index("diff_incl"), head.index("diff_omega")
    assert [(r[ia], r[io]) for r in rows_a[1:]] == [(r[ia], r[io]) for r in rows_b[1:]]
    assert [int(r[head.index("iteration")]) for r in rows_a[1:]] == [150, 200, 250, 300]


def test_backend_bench_monotone_in_p(tmp_path):
    assert run("backend-bench", "--p", "20,60", "--algorithms", "gibbs", "--sweeps", 5,
               "--out-dir", tmp_path) == 0
    rows = read_rows(tmp_path / "backend_bench.csv")
    head = rows[0]
    k, b = head.index("sec_per_sweep"), head.index("backend")
    for backend in {r[b] for r in rows[1:]}:
        t = [float(r[k]) for r in rows[1:] if r[b] == backend]
        assert t[0] < t[1]


def test_config_round_trip(gen_dir, tmp_path):
    flags = {"data": str(gen_dir / "Y.csv"), "iters": 300, "warmup": 100, "seed": 9, "theta": 0.2, "g1": 3.0,
             "lam": 0.02, "algorithm": "lit"}
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(flags))
    assert run("fit", "--config", cfg, "--out-dir", tmp_path / "c") == 0
    argv = ["fit", "--out-dir", tmp_path / "d"]
    for k, v in flags.items():
        argv += [f"--{k}", v]
    assert run(*argv) == 0
    for name in ("incl_prob.csv", "mean_omega.csv"):
        assert (tmp_path / "c" / name).read_bytes() == (tmp_path / "d" / name).read_bytes()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    with pytest.raises(SystemExit) as exc:
        run("fit", "--config", bad, "--data", "x")
    assert exc.value.code == 2
