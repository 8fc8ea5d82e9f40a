"""Config-driven experiment runner.

Subcommands map one-to-one onto the study's artifacts:

    ingest             raw dataset -> canonical processed CSV (+ content hash)
    train              run a single strategy pair, persist artifacts
    evaluate           full strategy x seed x train-size sweep -> CSV reports
    spectra            Laplacian signatures + 2-d PCA of stored results
    diagnose           residual-bound check and rate-curve table
    reproduce-figure   2 (convergence grid), 3 (evaluate), 4 (train + spectra)
    bench              time the compiled kernels against the pure fallback

Configuration is a flat key=value text file; any key can be overridden on
the command line with --set key=value. results.csv and aggregate.csv
contain only deterministic fields (timings go to runtime.csv) so repeated
runs with the same config and seeds are byte-identical.
"""

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from binarch import data, diagnostics, kernels, model, optim, spectral, strategies

CONFIG_DEFAULTS = {
    "dataset": "mnist",
    "data": "",
    "group_a": "1",
    "group_b": "2",
    "train_sizes": "50,100,150",
    "n_test_per_class": "50",
    "n_runs": "10",
    "strategies": ",".join(strategies.ALL_STRATEGIES),
    "m_hard": "50",
    "m_soft": "5",
    "epochs": "100",
    "batch_size": "25",
    "lr_kind": "constant",
    "lr_value": "0.4",
    "init_scale": "0.05",
    "init_loc": "-0.1",
    "base_seed": "0",
    "out_dir": "results",
    "lottery_rounds": "10",
    "lottery_retrain": "0",
    "agnostic_architectures": "64",
    "agnostic_shared_samples": "16",
    "pooling": "avg",
}


@dataclass
class EvalRecord:
    strategy: str
    seed: int
    train_size: int
    auc: float
    wall_clock_seconds: float
    mask_density: float | None
    train_loss: float


def auc(scores_pos, scores_neg):
    """Mann-Whitney rank statistic; ties count one half."""
    pos = np.asarray(scores_pos, dtype=np.float64)
    neg = np.asarray(scores_neg, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both score lists must be nonempty")
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[: pos.size].sum() - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


# --- configuration ----------------------------------------------------------


def load_config(path=None, overrides=()):
    cfg = dict(CONFIG_DEFAULTS)
    if path:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}: line {lineno}: expected key=value")
                key, value = line.split("=", 1)
                cfg[key.strip()] = value.strip()
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        cfg[key] = value
    unknown = set(cfg) - set(CONFIG_DEFAULTS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _parse_labels(text):
    out = []
    for tok in str(text).split(","):
        tok = tok.strip()
        if tok:
            out.append(int(tok) if tok.lstrip("-").isdigit() else tok)
    return tuple(out)


def _parse_ints(text):
    return [int(t) for t in str(text).split(",") if t.strip()]


def config_hash(cfg):
    canon = json.dumps(cfg, sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def _train_config(cfg, seed, n_train):
    lr = (
        optim.constant(float(cfg["lr_value"]))
        if cfg["lr_kind"] == "constant"
        else optim.inverse(float(cfg["lr_value"]))
    )
    return optim.TrainConfig(
        m_hard=float(cfg["m_hard"]),
        m_soft=float(cfg["m_soft"]),
        epochs=int(cfg["epochs"]),
        batch_size=min(int(cfg["batch_size"]), n_train),
        lr=lr,
        seed=seed,
        init_scale=float(cfg["init_scale"]),
        init_loc=float(cfg["init_loc"]),
    )


# --- experiment sweep -------------------------------------------------------


def _artifact_name(strategy, train_size, seed):
    return f"{strategy.replace('->', '_to_')}_size{train_size}_seed{seed}.json"


def run_experiment(cfg, rows, out_dir):
    """Full sweep; persists per-result JSON, CSV reports and a manifest.

    Returns (records, failures). Every number in the aggregate report can be
    recomputed from the persisted StrategyResult artifacts.
    """
    out_dir = Path(out_dir)
    art_dir = out_dir / "artifacts"
    art_dir.mkdir(parents=True, exist_ok=True)
    group_a = _parse_labels(cfg["group_a"])
    group_b = _parse_labels(cfg["group_b"])
    names = [s.strip() for s in cfg["strategies"].split(",") if s.strip()]
    n_test = int(cfg["n_test_per_class"])
    records, failures = [], []

    for train_size in _parse_ints(cfg["train_sizes"]):
        for run in range(int(cfg["n_runs"])):
            seed = int(cfg["base_seed"]) + run
            try:
                task = data.build_task(rows, group_a, group_b, train_size, n_test, seed)
                tc = _train_config(cfg, seed, task.train_x.shape[0])
                results = strategies.run_strategies(
                    task,
                    tc,
                    names,
                    lottery_rounds=int(cfg["lottery_rounds"]),
                    retrain_each_round=bool(int(cfg["lottery_retrain"])),
                    n_architectures=int(cfg["agnostic_architectures"]),
                    n_shared_samples=int(cfg["agnostic_shared_samples"]),
                )
            except Exception as exc:  # persist partial results with a manifest
                failures.append(
                    {"train_size": train_size, "seed": seed, "error": repr(exc)}
                )
                continue
            for name in names:
                res = results[name]
                scores = model.forward_batch(res.weights, task.test_x)
                records.append(
                    EvalRecord(
                        strategy=name,
                        seed=seed,
                        train_size=train_size,
                        auc=auc(scores[task.test_y == 1], scores[task.test_y == 0]),
                        wall_clock_seconds=res.wall_clock_seconds,
                        mask_density=res.mask_density,
                        train_loss=res.train_loss,
                    )
                )
                (art_dir / _artifact_name(name, train_size, seed)).write_text(
                    res.to_json()
                )

    _write_reports(records, out_dir)
    manifest = {
        "config": cfg,
        "config_hash": config_hash(cfg),
        "kernel_backend": kernels.BACKEND,
        "versions": {"numpy": np.__version__, "python": sys.version.split()[0]},
        "failures": failures,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return records, failures


def _sort_key(rec):
    return (rec.train_size, strategies.ALL_STRATEGIES.index(rec.strategy), rec.seed)


def _write_reports(records, out_dir):
    records = sorted(records, key=_sort_key)
    with open(out_dir / "results.csv", "w", newline="\n") as fh:
        fh.write("strategy,seed,train_size,auc,mask_density,train_loss\n")
        for r in records:
            dens = "" if r.mask_density is None else repr(r.mask_density)
            fh.write(
                f"{r.strategy},{r.seed},{r.train_size},{r.auc!r},{dens},{r.train_loss!r}\n"
            )
    with open(out_dir / "runtime.csv", "w", newline="\n") as fh:
        fh.write("strategy,seed,train_size,wall_clock_seconds\n")
        for r in records:
            fh.write(f"{r.strategy},{r.seed},{r.train_size},{r.wall_clock_seconds!r}\n")

    cells = {}
    for r in records:
        cells.setdefault((r.train_size, r.strategy), []).append(r)
    with open(out_dir / "aggregate.csv", "w", newline="\n") as fh:
        fh.write("train_size,strategy,auc_median,auc_q25,auc_q75\n")
        for (size, name), rs in sorted(
            cells.items(), key=lambda kv: (kv[0][0], strategies.ALL_STRATEGIES.index(kv[0][1]))
        ):
            a = np.asarray([r.auc for r in rs])
            fh.write(
                f"{size},{name},{float(np.median(a))!r},"
                f"{float(np.percentile(a, 25))!r},{float(np.percentile(a, 75))!r}\n"
            )
    with open(out_dir / "aggregate_runtime.csv", "w", newline="\n") as fh:
        fh.write("train_size,strategy,runtime_median,runtime_q25,runtime_q75\n")
        for (size, name), rs in sorted(
            cells.items(), key=lambda kv: (kv[0][0], strategies.ALL_STRATEGIES.index(kv[0][1]))
        ):
            t = np.asarray([r.wall_clock_seconds for r in rs])
            fh.write(
                f"{size},{name},{float(np.median(t))!r},"
                f"{float(np.percentile(t, 25))!r},{float(np.percentile(t, 75))!r}\n"
            )


# --- spectra ----------------------------------------------------------------


def run_spectra_report(results, out_dir):
    """Signature CSV + 2-d PCA coordinates for stored strategy results.

    `results` maps network-id -> StrategyResult. Real-weight networks with a
    negative shared scalar (agnostic->real) use absolute values, which
    preserves connection strengths.
    """
    if len(results) < 3:
        raise ValueError("need at least 3 stored results")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sigs = []
    for net_id, res in sorted(results.items()):
        w = res.weights
        if np.any(w < 0):
            w = np.abs(w)
        sigs.append(spectral.signature_of_network(w, net_id))
    with open(out_dir / "spectra.csv", "w", newline="\n") as fh:
        n_ev = sigs[0].eigenvalues.size
        fh.write("network_id," + ",".join(f"ev{i}" for i in range(n_ev)) + "\n")
        for s in sigs:
            fh.write(
                s.network_id + "," + ",".join(repr(float(v)) for v in s.eigenvalues) + "\n"
            )
    coords = spectral.spectra_pca(sigs)
    with open(out_dir / "pca.csv", "w", newline="\n") as fh:
        fh.write("network_id,pc1,pc2\n")
        for s, (c1, c2) in zip(sigs, coords):
            fh.write(f"{s.network_id},{float(c1)!r},{float(c2)!r}\n")
    return sigs, coords


# --- subcommands ------------------------------------------------------------


def _load_rows(cfg):
    if not cfg["data"]:
        raise ValueError("config key 'data' (processed dataset path) is required")
    return data.read_processed(cfg["data"])


def cmd_ingest(args):
    if args.dataset == "mnist":
        raw = data.load_mnist_csv(args.input)
        rows, dropped = data.preprocess_mnist(raw, pooling=args.pooling)
    else:
        raw = data.load_citeseer(
            args.input, expected_n_classes=None if args.any_classes else data.CITESEER_CLASSES
        )
        rows, dropped = data.preprocess_citeseer(raw)
    digest = data.write_processed(rows, args.output)
    print(f"wrote {len(rows)} rows to {args.output} (dropped {len(dropped)} zero rows)")
    print(f"sha256 {digest}")
    return 0


def cmd_train(args):
    cfg = load_config(args.config, args.set or ())
    rows = _load_rows(cfg)
    train_size = _parse_ints(cfg["train_sizes"])[0]
    task = data.build_task(
        rows,
        _parse_labels(cfg["group_a"]),
        _parse_labels(cfg["group_b"]),
        train_size,
        int(cfg["n_test_per_class"]),
        int(cfg["base_seed"]),
    )
    tc = _train_config(cfg, int(cfg["base_seed"]), task.train_x.shape[0])
    results = strategies.run_strategies(
        task,
        tc,
        [args.strategy],
        lottery_rounds=int(cfg["lottery_rounds"]),
        retrain_each_round=bool(int(cfg["lottery_retrain"])),
        n_architectures=int(cfg["agnostic_architectures"]),
        n_shared_samples=int(cfg["agnostic_shared_samples"]),
    )
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    res = results[args.strategy]
    path = out_dir / _artifact_name(args.strategy, train_size, res.seed)
    path.write_text(res.to_json())
    print(f"{args.strategy}: train loss {res.train_loss:.6f}, "
          f"{res.wall_clock_seconds:.2f}s -> {path}")
    return 0


def cmd_evaluate(args):
    cfg = load_config(args.config, args.set or ())
    rows = _load_rows(cfg)
    _, failures = run_experiment(cfg, rows, cfg["out_dir"])
    for f in failures:
        print(f"FAILED size={f['train_size']} seed={f['seed']}: {f['error']}",
              file=sys.stderr)
    print(f"reports written to {cfg['out_dir']}")
    return 1 if failures else 0


def cmd_spectra(args):
    results = {}
    for path in sorted(Path(args.artifacts).glob("*.json")):
        results[path.stem] = strategies.StrategyResult.from_json(path.read_text())
    run_spectra_report(results, args.out)
    print(f"spectra.csv and pca.csv written to {args.out}")
    return 0


def cmd_diagnose(args):
    cfg = load_config(args.config, args.set or ())
    rows = _load_rows(cfg)
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    train_size = _parse_ints(cfg["train_sizes"])[0]
    task = data.build_task(
        rows,
        _parse_labels(cfg["group_a"]),
        _parse_labels(cfg["group_b"]),
        train_size,
        int(cfg["n_test_per_class"]),
        int(cfg["base_seed"]),
    )
    X, y = task.train_x, task.train_y
    m_hard, m_soft = float(cfg["m_hard"]), float(cfg["m_soft"])

    # residual extraction requires single-example minibatches
    tc = _train_config(cfg, int(cfg["base_seed"]), X.shape[0])
    tc_one = optim.TrainConfig(
        m_hard=m_hard, m_soft=m_soft, epochs=tc.epochs, batch_size=1,
        lr=tc.lr, seed=tc.seed, init_scale=tc.init_scale, init_loc=tc.init_loc,
    )
    _, _, trace = optim.train_binary(X, y, tc_one, record_steps=True)
    g_hat, n_samp = diagnostics.estimate_G(X, y, args.g_samples, seed=tc.seed)
    C = diagnostics.lemma2_constant(m_hard, m_soft)
    recs, r_mean = diagnostics.extract_residuals(
        trace.step_records, X, y, m_hard, 2.0 * g_hat, C
    )
    diagnostics.residuals_to_csv(recs, out_dir / "residuals.csv")
    violations = sum(r.residual_norm_sq > r.bound for r in recs)
    print(f"G_hat = {g_hat:.4f} ({n_samp} samples, applied with 2x safety factor)")
    print(f"C = {C}")
    print(f"{len(recs)} residuals, {violations} above the bound")
    print(f"mean residual norm (E[r]=0 check, descriptive): "
          f"{float(np.linalg.norm(r_mean)):.3e}")

    # rate table on the convex surrogate, where the theorem's assumptions hold
    c = float(cfg["lr_value"])
    log_at = [t for t in (10, 30, 100, 300, 1000, 3000) if t <= args.surrogate_steps]
    gaps = []
    F_star = diagnostics.surrogate_F_star(X, y)
    for s in range(int(cfg["n_runs"])):
        pts = diagnostics.run_convex_surrogate(
            X, y, c, args.surrogate_steps, m_hard, m_soft, seed=tc.seed + s,
            log_at=log_at,
        )
        gaps.append([f for _, f in pts])
    med = np.median(np.asarray(gaps), axis=0)
    rows_ = diagnostics.rate_curve(list(zip(log_at, med)), c, 1.0, C, F_star)
    diagnostics.rate_to_csv(rows_, out_dir / "rate.csv")
    print(f"rate.csv written; violations: {sum(r.violated for r in rows_)}")
    return 1 if violations else 0


def cmd_reproduce(args):
    cfg = load_config(args.config, args.set or ())
    rows = _load_rows(cfg)
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.figure == "2":
        train_size = _parse_ints(cfg["train_sizes"])[0]
        task = data.build_task(
            rows,
            _parse_labels(cfg["group_a"]),
            _parse_labels(cfg["group_b"]),
            train_size,
            int(cfg["n_test_per_class"]),
            int(cfg["base_seed"]),
        )
        tc = _train_config(cfg, int(cfg["base_seed"]), task.train_x.shape[0])
        grid = [(50.0, 5.0), (50.0, 50.0), (5.0, 0.5), (5.0, 5.0)]
        cells = diagnostics.convergence_study(
            task.train_x, task.train_y, grid, tc, n_seeds=int(cfg["n_runs"])
        )
        diagnostics.convergence_to_csv(cells, out_dir / "convergence.csv")
        print(f"convergence.csv written to {out_dir}")
        return 0
    if args.figure == "3":
        _, failures = run_experiment(cfg, rows, cfg["out_dir"])
        print(f"reports written to {cfg['out_dir']}")
        return 1 if failures else 0
    # figure 4: train all strategies once per seed, then spectra
    _, failures = run_experiment(cfg, rows, cfg["out_dir"])
    results = {}
    for path in sorted((out_dir / "artifacts").glob("*.json")):
        results[path.stem] = strategies.StrategyResult.from_json(path.read_text())
    run_spectra_report(results, out_dir)
    print(f"spectra.csv and pca.csv written to {out_dir}")
    return 1 if failures else 0


def cmd_bench(args):
    from binarch.bench import run_benchmark

    run_benchmark(batch_sizes=(1, 64), matrix_size=args.matrix_size,
                  repeats=args.repeats)
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="binarch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="raw dataset -> processed CSV")
    p.add_argument("--dataset", choices=["mnist", "citeseer"], required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--pooling", choices=["avg", "max"], default="avg")
    p.add_argument("--any-classes", action="store_true",
                   help="skip the 6-class check for citeseer")
    p.set_defaults(func=cmd_ingest)

    for name, fn in [("train", cmd_train), ("evaluate", cmd_evaluate),
                     ("diagnose", cmd_diagnose)]:
        p = sub.add_parser(name)
        p.add_argument("--config")
        p.add_argument("--set", action="append", metavar="KEY=VALUE")
        if name == "train":
            p.add_argument("--strategy", choices=strategies.ALL_STRATEGIES,
                           required=True)
        if name == "diagnose":
            p.add_argument("--g-samples", type=int, default=10000)
            p.add_argument("--surrogate-steps", type=int, default=1000)
        p.set_defaults(func=fn)

    p = sub.add_parser("spectra")
    p.add_argument("--artifacts", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectra)

    p = sub.add_parser("reproduce-figure")
    p.add_argument("figure", choices=["2", "3", "4"])
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("bench")
    p.add_argument("--matrix-size", type=int, default=192)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_bench)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
