import math

import numpy as np
import pytest

from binarch import data, model, optim, strategies
from binarch.binarize import hard_binarize
from conftest import make_toy_task


@pytest.fixture()
def toy_task():
    X, y = make_toy_task(seed=7, n=40)
    return data.Task(train_x=X, train_y=y, test_x=X[:10], test_y=y[:10],
                     group_a=(0,), group_b=(1,), n_train_per_class=20,
                     n_test_per_class=5)


def toy_config(**kw):
    base = dict(epochs=5, batch_size=10, lr=optim.constant(0.2), seed=0)
    base.update(kw)
    return optim.TrainConfig(**base)


# --- percentile threshold search --------------------------------------------


def test_nearest_rank_against_enumeration():
    # independent oracle: the p-th nearest-rank percentile of d sorted values
    # is the ceil(p*d/100)-th smallest
    rng = np.random.default_rng(0)
    for d in (1, 2, 7, 10, 100, 128):
        vals = np.sort(rng.uniform(0, 1, d))
        for p in strategies.PERCENTILES:
            rank = math.ceil(p * d / 100.0)
            assert strategies.nearest_rank_percentile(vals, p) == vals[rank - 1]


def test_percentile_search_calls_evaluate_exactly_ten_times(toy_task):
    rng = np.random.default_rng(1)
    w = rng.uniform(0, 1, 8)
    calls = []

    def spy(mask):
        calls.append(mask.copy())
        return model.batch_loss(mask, toy_task.train_x, toy_task.train_y)

    mask, p = strategies.percentile_threshold_search(
        w, toy_task.train_x, toy_task.train_y, evaluate=spy
    )
    assert len(calls) == len(strategies.PERCENTILES)
    # and the returned mask is the argmin over the evaluated candidates
    losses = [model.batch_loss(m, toy_task.train_x, toy_task.train_y) for m in calls]
    assert model.batch_loss(mask, toy_task.train_x, toy_task.train_y) == min(losses)


def test_percentile_search_masks_match_enumeration(toy_task):
    rng = np.random.default_rng(2)
    w = rng.uniform(0, 1, 8)
    # oracle: build each candidate directly from the definition
    sorted_w = np.sort(w)
    best = None
    for p in strategies.PERCENTILES:
        rank = math.ceil(p * w.size / 100.0)
        xi = sorted_w[rank - 1]
        cand = (w - xi >= 0).astype(float)
        loss = model.batch_loss(cand, toy_task.train_x, toy_task.train_y)
        if best is None or loss <= best[0]:
            best = (loss, p, cand)
    mask, p = strategies.percentile_threshold_search(
        w, toy_task.train_x, toy_task.train_y
    )
    assert p == best[1]
    assert np.array_equal(mask, best[2])


def test_percentile_search_tie_prefers_sparser():
    # constant evaluate -> every candidate ties; the 100th percentile
    # (threshold = max weight, only the max survives) must win
    X = np.array([[1.0, 0.0]])
    y = np.array([0.0])
    w = np.arange(1.0, 9.0)
    mask, p = strategies.percentile_threshold_search(X=X, y=y, w=w,
                                                     evaluate=lambda m: 0.0)
    assert p == 100
    assert mask.sum() == 1.0
    assert mask[-1] == 1.0


def test_percentile_search_rejects_bad_input():
    X = np.array([[1.0, 0.0]])
    y = np.array([0.0])
    with pytest.raises(ValueError):
        strategies.percentile_threshold_search(np.array([1.0, -1.0] * 4), X, y)
    with pytest.raises(ValueError):
        strategies.percentile_threshold_search(np.ones(8), X[:0], y[:0])


# --- strategy runners -------------------------------------------------------


def test_result_requires_payload():
    with pytest.raises(ValueError):
        strategies.StrategyResult("real", 0, 0.0, 0.0)


def test_result_json_roundtrip():
    mask = np.array([1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0])
    res = strategies.StrategyResult("bin", 3, -0.25, 1.5, mask=mask)
    back = strategies.StrategyResult.from_json(res.to_json())
    assert back.name == "bin" and back.seed == 3
    assert back.train_loss == -0.25
    assert np.array_equal(back.mask, mask)
    assert back.mask_density == pytest.approx(0.5)

    w = np.linspace(-1, 1, 8)
    res = strategies.StrategyResult("agnostic->real", 1, 0.1, 0.2, real_weights=w)
    back = strategies.StrategyResult.from_json(res.to_json())
    assert np.array_equal(back.real_weights, w)  # bit-exact
    assert back.mask_density is None


def test_run_real_pair(toy_task):
    cfg = toy_config()
    real, real_bin = strategies.run_real(toy_task, cfg)
    assert real.name == "real" and real_bin.name == "real->bin"
    assert np.all(real.real_weights >= 0)
    assert set(np.unique(real_bin.mask)) <= {0.0, 1.0}
    # reported losses are reproducible from the stored networks
    X, y = toy_task.train_x, toy_task.train_y
    assert real.train_loss == pytest.approx(model.batch_loss(real.weights, X, y), abs=1e-12)
    assert real_bin.train_loss == pytest.approx(
        model.batch_loss(real_bin.mask, X, y), abs=1e-12
    )


def test_run_bin_pair(toy_task):
    cfg = toy_config()
    bin_res, bin_real = strategies.run_bin(toy_task, cfg)
    assert set(np.unique(bin_res.mask)) <= {0.0, 1.0}
    # fine-tuning happens on the searched support only
    assert np.all(bin_real.real_weights[bin_res.mask == 0] == 0)


def test_run_lottery_single_round_equals_real(toy_task):
    cfg = toy_config()
    real, _ = strategies.run_real(toy_task, cfg)
    lottery, _ = strategies.run_lottery(toy_task, cfg, rounds=1)
    assert np.array_equal(lottery.real_weights, real.real_weights)
    with pytest.raises(ValueError):
        strategies.run_lottery(toy_task, cfg, rounds=0)


def test_run_lottery_supports_nest(toy_task):
    cfg = toy_config()
    X, y = toy_task.train_x, toy_task.train_y
    w0, _ = optim.train_real_nonneg(X, y, cfg)
    sequence = [w0]
    for _ in range(4):
        mask, _ = strategies.percentile_threshold_search(sequence[-1], X, y)
        sequence.append(sequence[-1] * mask)
    supports = [set(np.flatnonzero(w > 0)) for w in sequence]
    for a, b in zip(supports, supports[1:]):
        assert b <= a  # masking never re-adds a connection
    lottery, _ = strategies.run_lottery(toy_task, cfg, rounds=5)
    losses = [model.batch_loss(w, X, y) for w in sequence]
    assert lottery.train_loss == pytest.approx(min(losses), abs=1e-12)


def test_run_lottery_retrain_respects_support(toy_task):
    cfg = toy_config()
    lottery, _ = strategies.run_lottery(toy_task, cfg, rounds=3,
                                        retrain_each_round=True)
    assert np.all(lottery.real_weights >= 0)


def test_run_random_is_untrained(toy_task):
    cfg = toy_config()
    random_res, random_bin = strategies.run_random(toy_task, cfg)
    rng = np.random.default_rng(cfg.seed)
    u = rng.standard_normal(8)
    assert np.array_equal(random_res.real_weights, u * u)
    assert set(np.unique(random_bin.mask)) <= {0.0, 1.0}


def test_run_agnostic_replay(toy_task):
    # replay the generator stream and confirm the winner is the true argmin
    cfg = toy_config(seed=9)
    X, y = toy_task.train_x, toy_task.train_y
    agnostic, agnostic_real = strategies.run_agnostic(
        toy_task, cfg, n_architectures=8, n_shared_samples=4
    )
    rng = np.random.default_rng(9)
    best = None
    for _ in range(8):
        u = rng.standard_normal(8)
        w = u * u
        p = strategies.PERCENTILES[rng.integers(len(strategies.PERCENTILES))]
        xi = strategies.nearest_rank_percentile(np.sort(w), p)
        mask = hard_binarize(w - xi)
        for _ in range(4):
            u0 = float(rng.standard_normal())
            loss = model.batch_loss(u0 * mask, X, y)
            if best is None or loss < best[0]:
                best = (loss, mask, u0)
    assert agnostic.train_loss == best[0]
    assert np.array_equal(agnostic.mask, best[1])
    assert np.array_equal(agnostic_real.real_weights, best[2] * best[1])
    with pytest.raises(ValueError):
        strategies.run_agnostic(toy_task, cfg, n_architectures=0)


def test_run_strategies_dispatch(toy_task, monkeypatch):
    cfg = toy_config()
    counts = {"real": 0, "bin": 0}
    orig_real, orig_bin = strategies.run_real, strategies.run_bin

    def count_real(task, config, **kw):
        counts["real"] += 1
        return orig_real(task, config, **kw)

    def count_bin(task, config, **kw):
        counts["bin"] += 1
        return orig_bin(task, config, **kw)

    monkeypatch.setitem(strategies._RUNNERS, "real", (count_real, 0))
    monkeypatch.setitem(strategies._RUNNERS, "real->bin", (count_real, 1))
    monkeypatch.setitem(strategies._RUNNERS, "bin", (count_bin, 0))
    monkeypatch.setitem(strategies._RUNNERS, "bin->real", (count_bin, 1))

    out = strategies.run_strategies(toy_task, cfg, ["real", "real->bin", "bin"])
    assert set(out) == {"real", "real->bin", "bin"}
    # each pair-producing runner executes once even when both halves are asked
    assert counts == {"real": 1, "bin": 1}


def test_run_strategies_rejects_unknown(toy_task):
    with pytest.raises(ValueError, match="unknown"):
        strategies.run_strategies(toy_task, toy_config(), ["bin", "sparsest"])


def test_run_strategies_deterministic(toy_task):
    cfg = toy_config(seed=4)
    a = strategies.run_strategies(toy_task, cfg, list(strategies.ALL_STRATEGIES))
    b = strategies.run_strategies(toy_task, cfg, list(strategies.ALL_STRATEGIES))
    for name in strategies.ALL_STRATEGIES:
        assert np.array_equal(a[name].weights, b[name].weights)
        assert a[name].train_loss == b[name].train_loss
