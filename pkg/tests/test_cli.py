import json
from pathlib import Path

import numpy as np
import pytest

from binarch import cli, data, model, strategies


# --- auc --------------------------------------------------------------------


def test_auc_hand_examples():
    assert cli.auc([2.0, 3.0], [0.0, 1.0]) == 1.0
    assert cli.auc([0.0, 1.0], [2.0, 3.0]) == 0.0
    assert cli.auc([1.0], [1.0]) == 0.5  # tie counts one half
    # 3 pos vs 2 neg with one inversion: pairs won = 5 of 6
    assert cli.auc([3.0, 4.0, 1.5], [1.0, 2.0]) == pytest.approx(5 / 6)
    with pytest.raises(ValueError):
        cli.auc([], [1.0])


def test_auc_matches_pair_counting_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        pos = rng.normal(0.3, 1.0, 13)
        neg = rng.normal(0.0, 1.0, 9)
        wins = sum(
            1.0 if p > n else (0.5 if p == n else 0.0) for p in pos for n in neg
        )
        assert cli.auc(pos, neg) == pytest.approx(wins / (13 * 9), abs=1e-12)


def test_auc_null_distribution_centers_at_half():
    rng = np.random.default_rng(1)
    vals = [
        cli.auc(rng.normal(size=50), rng.normal(size=50)) for _ in range(200)
    ]
    assert abs(np.mean(vals) - 0.5) < 0.02


# --- config -----------------------------------------------------------------


def test_load_config_defaults_and_overrides(tmp_path):
    cfg = cli.load_config()
    assert cfg["m_hard"] == "50"
    p = tmp_path / "run.cfg"
    p.write_text("epochs = 3   # short run\n\nm_soft=2\n")
    cfg = cli.load_config(p, overrides=["m_hard=25"])
    assert cfg["epochs"] == "3"
    assert cfg["m_soft"] == "2"
    assert cfg["m_hard"] == "25"


def test_load_config_rejects_bad_input(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("epochs\n")
    with pytest.raises(ValueError, match="line 1"):
        cli.load_config(p)
    with pytest.raises(ValueError, match="unknown config keys"):
        cli.load_config(overrides=["learning_rate=0.1"])
    with pytest.raises(ValueError, match="key=value"):
        cli.load_config(overrides=["epochs"])


def test_config_hash_sensitivity():
    a = cli.load_config()
    b = cli.load_config(overrides=["epochs=7"])
    assert cli.config_hash(a) == cli.config_hash(dict(a))
    assert cli.config_hash(a) != cli.config_hash(b)


def test_parse_helpers():
    assert cli._parse_labels("1, 2,3") == (1, 2, 3)
    assert cli._parse_labels("Agents, ML") == ("Agents", "ML")
    assert cli._parse_ints("50,100") == [50, 100]


def test_train_config_caps_batch_size():
    cfg = cli.load_config(overrides=["batch_size=100"])
    tc = cli._train_config(cfg, seed=1, n_train=30)
    assert tc.batch_size == 30
    assert tc.seed == 1
    assert tc.lr.kind == "constant" and tc.lr.value == 0.4


# --- experiment sweep -------------------------------------------------------


SMALL = [
    "train_sizes=10",
    "n_test_per_class=5",
    "n_runs=2",
    "epochs=2",
    "batch_size=5",
    "strategies=real,real->bin,bin,random",
    "lottery_rounds=2",
    "agnostic_architectures=4",
    "agnostic_shared_samples=2",
]


def test_run_experiment_outputs(processed_rows, tmp_path):
    cfg = cli.load_config(overrides=SMALL)
    out = tmp_path / "out"
    records, failures = cli.run_experiment(cfg, processed_rows, out)
    assert failures == []
    assert len(records) == 4 * 2  # strategies x runs x 1 train size
    lines = (out / "results.csv").read_text().splitlines()
    assert lines[0] == "strategy,seed,train_size,auc,mask_density,train_loss"
    assert len(lines) == 9
    # artifacts round-trip and reproduce the reported train loss
    task0 = data.build_task(processed_rows, (1,), (2,), 10, 5, seed=0)
    art = out / "artifacts" / "bin_size10_seed0.json"
    res = strategies.StrategyResult.from_json(art.read_text())
    assert res.train_loss == pytest.approx(
        model.batch_loss(res.mask, task0.train_x, task0.train_y), abs=1e-12
    )
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_hash"] == cli.config_hash(cfg)
    assert manifest["failures"] == []
    # timings live in their own files, never in results.csv
    assert (out / "runtime.csv").exists()
    assert (out / "aggregate_runtime.csv").exists()


def test_run_experiment_reruns_byte_identical(processed_rows, tmp_path):
    cfg = cli.load_config(overrides=SMALL)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cli.run_experiment(cfg, processed_rows, out1)
    cli.run_experiment(cfg, processed_rows, out2)
    for name in ("results.csv", "aggregate.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_run_experiment_records_failures(processed_rows, tmp_path):
    cfg = cli.load_config(overrides=SMALL + ["train_sizes=999999"])
    records, failures = cli.run_experiment(cfg, processed_rows, tmp_path / "o")
    assert records == []
    assert len(failures) == 2
    assert failures[0]["train_size"] == 999999
    assert "need" in failures[0]["error"]


# --- subcommands ------------------------------------------------------------


def test_cmd_ingest_mnist(mnist_csv, tmp_path, capsys):
    out = tmp_path / "proc.csv"
    rc = cli.main(["ingest", "--dataset", "mnist", "--input", str(mnist_csv),
                   "--output", str(out)])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "sha256" in printed
    rows = data.read_processed(out)
    assert all(x.size == 64 for _, x in rows)


def test_cmd_ingest_citeseer(tmp_path, capsys):
    rng = np.random.default_rng(2)
    lines = []
    for i in range(90):
        feats = rng.integers(0, 3, 70)
        lines.append(f"d{i} " + " ".join(map(str, feats)) + f" c{i % 3}")
    src = tmp_path / "corpus.content"
    src.write_text("\n".join(lines) + "\n")
    out = tmp_path / "proc.csv"
    rc = cli.main(["ingest", "--dataset", "citeseer", "--input", str(src),
                   "--output", str(out), "--any-classes"])
    assert rc == 0
    rows = data.read_processed(out)
    assert rows and rows[0][0] == "c0"


def test_cmd_train_and_spectra(processed_csv, tmp_path, capsys):
    out = tmp_path / "run"
    overrides = [f"data={processed_csv}", f"out_dir={out}"] + SMALL
    sets = [x for pair in (("--set", o) for o in overrides) for x in pair]
    rc = cli.main(["train", "--strategy", "bin"] + sets)
    assert rc == 0
    arts = list(Path(out).glob("*.json"))
    assert len(arts) == 1

    # spectra needs >= 3 artifacts; add two more strategies
    for s in ("real", "random"):
        assert cli.main(["train", "--strategy", s] + sets) == 0
    rc = cli.main(["spectra", "--artifacts", str(out), "--out", str(out)])
    assert rc == 0
    spec_lines = (out / "spectra.csv").read_text().splitlines()
    assert len(spec_lines) == 4  # header + 3 networks
    assert spec_lines[0].startswith("network_id,ev0,")
    pca_lines = (out / "pca.csv").read_text().splitlines()
    assert pca_lines[0] == "network_id,pc1,pc2"
    assert len(pca_lines) == 4


def test_cmd_evaluate_exit_codes(processed_csv, tmp_path):
    out = tmp_path / "run"
    overrides = [f"data={processed_csv}", f"out_dir={out}"] + SMALL
    sets = [x for pair in (("--set", o) for o in overrides) for x in pair]
    assert cli.main(["evaluate"] + sets) == 0
    bad = sets + ["--set", "train_sizes=999999"]
    assert cli.main(["evaluate"] + bad) == 1


def test_cmd_diagnose_small(processed_csv, tmp_path, capsys):
    out = tmp_path / "diag"
    overrides = [f"data={processed_csv}", f"out_dir={out}", "train_sizes=5",
                 "n_test_per_class=2", "n_runs=2", "epochs=1", "lr_value=1.0"]
    sets = [x for pair in (("--set", o) for o in overrides) for x in pair]
    rc = cli.main(["diagnose", "--g-samples", "200", "--surrogate-steps", "100"]
                  + sets)
    assert rc == 0
    assert (out / "residuals.csv").exists()
    assert (out / "rate.csv").exists()
    printed = capsys.readouterr().out
    assert "0 above the bound" in printed


def test_cmd_reproduce_figure2(processed_csv, tmp_path):
    out = tmp_path / "fig2"
    overrides = [f"data={processed_csv}", f"out_dir={out}", "train_sizes=8",
                 "n_test_per_class=2", "n_runs=2", "epochs=2", "batch_size=4"]
    sets = [x for pair in (("--set", o) for o in overrides) for x in pair]
    assert cli.main(["reproduce-figure", "2"] + sets) == 0
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == "m_hard,m_soft,epoch,median,q25,q75"
    assert len(lines) == 1 + 4 * 2  # four grid cells x two epochs


def test_main_rejects_unknown_command():
    with pytest.raises(SystemExit):
        cli.main(["frobnicate"])


def test_missing_data_key_is_an_error(tmp_path):
    with pytest.raises(ValueError, match="'data'"):
        cli.main(["evaluate", "--set", "epochs=1"])
