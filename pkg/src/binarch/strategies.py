"""The ten training-strategy variants and the shared percentile threshold search.

Each run_* function produces a pair of results: a real-weighted network and
a binary architecture (or the other way round), timed around the training
or search work only.
"""

import json
import time
from dataclasses import dataclass

import numpy as np

from binarch import model, optim
from binarch.binarize import hard_binarize

PERCENTILES = tuple(range(10, 101, 10))

ALL_STRATEGIES = (
    "real",
    "real->bin",
    "lottery",
    "lottery->bin",
    "bin",
    "bin->real",
    "random",
    "random->bin",
    "agnostic",
    "agnostic->real",
)


@dataclass
class StrategyResult:
    name: str
    seed: int
    train_loss: float
    wall_clock_seconds: float
    mask: np.ndarray | None = None
    real_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.mask is None and self.real_weights is None:
            raise ValueError("result must carry a mask or real weights")

    @property
    def weights(self):
        """The network this result denotes (mask for binary, weights for real)."""
        return self.mask if self.mask is not None else self.real_weights

    @property
    def mask_density(self):
        if self.mask is None:
            return None
        return float(np.mean(self.mask))

    def to_json(self):
        return json.dumps(
            {
                "name": self.name,
                "seed": self.seed,
                "train_loss": self.train_loss,
                "wall_clock_seconds": self.wall_clock_seconds,
                "mask": None
                if self.mask is None
                else "".join(str(int(b)) for b in self.mask),
                "real_weights": None
                if self.real_weights is None
                else self.real_weights.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text):
        rec = json.loads(text)
        mask = rec["mask"]
        if mask is not None:
            mask = np.asarray([float(c) for c in mask])
        rw = rec["real_weights"]
        if rw is not None:
            rw = np.asarray(rw, dtype=np.float64)
        return cls(
            name=rec["name"],
            seed=rec["seed"],
            train_loss=rec["train_loss"],
            wall_clock_seconds=rec["wall_clock_seconds"],
            mask=mask,
            real_weights=rw,
        )


def nearest_rank_percentile(sorted_w, p):
    """Nearest-rank percentile over pre-sorted entries."""
    d = sorted_w.size
    idx = max(int(np.ceil(p / 100.0 * d)) - 1, 0)
    return sorted_w[idx]


def percentile_threshold_search(w, X, y, evaluate=None):
    """Best mask among the ten percentile-thresholded candidates of w.

    Candidate for percentile p keeps entries with w - xi_p >= 0 (ties at the
    threshold are kept). Returns (mask, percentile); ties in the loss are
    broken toward the larger percentile, i.e. the sparser mask. `evaluate`
    defaults to batch_loss on (X, y) and is called exactly once per candidate.
    """
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("percentile search expects nonnegative weights")
    if X.shape[0] == 0:
        raise ValueError("empty evaluation set")
    if evaluate is None:
        evaluate = lambda mask: model.batch_loss(mask, X, y)
    sorted_w = np.sort(w)
    best = None
    for p in PERCENTILES:
        xi = nearest_rank_percentile(sorted_w, p)
        mask = hard_binarize(w - xi)
        loss = evaluate(mask)
        if best is None or loss <= best[0]:
            best = (loss, p, mask)
    _, p, mask = best
    return mask, p


def run_real(task, config):
    """'real' (dense nonnegative training) and 'real->bin' (thresholded)."""
    X, y = task.train_x, task.train_y
    t0 = time.perf_counter()
    w, _ = optim.train_real_nonneg(X, y, config)
    t_real = time.perf_counter() - t0
    real = StrategyResult(
        "real", config.seed, model.batch_loss(w, X, y), t_real, real_weights=w
    )
    t0 = time.perf_counter()
    mask, _ = percentile_threshold_search(w, X, y)
    t_bin = time.perf_counter() - t0
    real_bin = StrategyResult(
        "real->bin", config.seed, model.batch_loss(mask, X, y), t_real + t_bin, mask=mask
    )
    return real, real_bin


def run_lottery(task, config, rounds=10, retrain_each_round=False):
    """Iterative multiplicative masking of one trained dense model.

    The sequence starts from the trained dense model and masks the previous
    element with its own percentile-search mask each round (no retraining by
    default; `retrain_each_round` retrains on the current support instead).
    The real result is the sequence element of minimum training loss; the
    binary result thresholds that element once more.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    X, y = task.train_x, task.train_y
    t0 = time.perf_counter()
    w, _ = optim.train_real_nonneg(X, y, config)
    sequence = [w]
    for _ in range(rounds - 1):
        mask, _ = percentile_threshold_search(sequence[-1], X, y)
        if retrain_each_round:
            support = (sequence[-1] * mask > 0).astype(np.float64)
            nxt, _ = optim.train_real_nonneg(X, y, config, mask=support)
        else:
            nxt = sequence[-1] * mask
        sequence.append(nxt)
    losses = [model.batch_loss(wt, X, y) for wt in sequence]
    best = sequence[int(np.argmin(losses))]
    t_real = time.perf_counter() - t0
    lottery = StrategyResult(
        "lottery", config.seed, float(np.min(losses)), t_real, real_weights=best
    )
    t0 = time.perf_counter()
    mask, _ = percentile_threshold_search(best, X, y)
    t_bin = time.perf_counter() - t0
    lottery_bin = StrategyResult(
        "lottery->bin",
        config.seed,
        model.batch_loss(mask, X, y),
        t_real + t_bin,
        mask=mask,
    )
    return lottery, lottery_bin


def run_bin(task, config):
    """'bin' (direct binary search) and 'bin->real' (fine-tuned on the mask)."""
    X, y = task.train_x, task.train_y
    t0 = time.perf_counter()
    _, mask, _ = optim.train_binary(X, y, config)
    t_bin = time.perf_counter() - t0
    bin_res = StrategyResult(
        "bin", config.seed, model.batch_loss(mask, X, y), t_bin, mask=mask
    )
    t0 = time.perf_counter()
    w, _ = optim.train_real_nonneg(X, y, config, mask=mask)
    t_real = time.perf_counter() - t0
    bin_real = StrategyResult(
        "bin->real", config.seed, model.batch_loss(w, X, y), t_bin + t_real, real_weights=w
    )
    return bin_res, bin_real


def run_random(task, config):
    """'random' (untrained squared-Gaussian weights) and 'random->bin'."""
    X, y = task.train_x, task.train_y
    rng = np.random.default_rng(config.seed)
    d = 2 * X.shape[1] ** 2
    t0 = time.perf_counter()
    u = rng.standard_normal(d)
    w = u * u
    t_rand = time.perf_counter() - t0
    random_res = StrategyResult(
        "random", config.seed, model.batch_loss(w, X, y), t_rand, real_weights=w
    )
    t0 = time.perf_counter()
    mask, _ = percentile_threshold_search(w, X, y)
    t_bin = time.perf_counter() - t0
    random_bin = StrategyResult(
        "random->bin",
        config.seed,
        model.batch_loss(mask, X, y),
        t_rand + t_bin,
        mask=mask,
    )
    return random_res, random_bin


def run_agnostic(task, config, n_architectures=64, n_shared_samples=16):
    """Weight-agnostic search over random masks with one shared scalar weight.

    Each architecture is a percentile-thresholded squared Gaussian; each is
    scored by the best of n_shared_samples shared scalars u0 ~ N(0,1). The
    binary result is the winning mask; the real result is u0 * mask with the
    optimized u0 (note: may carry a negative shared weight).
    """
    if n_architectures < 1 or n_shared_samples < 1:
        raise ValueError("sample counts must be >= 1")
    X, y = task.train_x, task.train_y
    rng = np.random.default_rng(config.seed)
    d = 2 * X.shape[1] ** 2
    t0 = time.perf_counter()
    best = None  # (loss, arch index, mask, u0)
    for a in range(n_architectures):
        u = rng.standard_normal(d)
        w = u * u
        p = PERCENTILES[rng.integers(len(PERCENTILES))]
        xi = nearest_rank_percentile(np.sort(w), p)
        mask = hard_binarize(w - xi)
        for _ in range(n_shared_samples):
            u0 = float(rng.standard_normal())
            loss = model.batch_loss(u0 * mask, X, y)
            if best is None or loss < best[0]:
                best = (loss, a, mask, u0)
    elapsed = time.perf_counter() - t0
    loss, _, mask, u0 = best
    agnostic = StrategyResult("agnostic", config.seed, loss, elapsed, mask=mask)
    agnostic_real = StrategyResult(
        "agnostic->real", config.seed, loss, elapsed, real_weights=u0 * mask
    )
    return agnostic, agnostic_real


_RUNNERS = {
    "real": (run_real, 0),
    "real->bin": (run_real, 1),
    "lottery": (run_lottery, 0),
    "lottery->bin": (run_lottery, 1),
    "bin": (run_bin, 0),
    "bin->real": (run_bin, 1),
    "random": (run_random, 0),
    "random->bin": (run_random, 1),
    "agnostic": (run_agnostic, 0),
    "agnostic->real": (run_agnostic, 1),
}


def run_strategies(task, config, names, lottery_rounds=10, retrain_each_round=False,
                   n_architectures=64, n_shared_samples=16):
    """Run the pair-producing functions covering `names`; returns {name: result}."""
    unknown = set(names) - set(ALL_STRATEGIES)
    if unknown:
        raise ValueError(f"unknown strategies: {sorted(unknown)}")
    extra = {
        run_lottery: {"rounds": lottery_rounds, "retrain_each_round": retrain_each_round},
        run_agnostic: {
            "n_architectures": n_architectures,
            "n_shared_samples": n_shared_samples,
        },
    }
    out = {}
    for runner in dict.fromkeys(_RUNNERS[n][0] for n in names):
        pair = runner(task, config, **extra.get(runner, {}))
        for n in names:
            fn, idx = _RUNNERS[n]
            if fn is runner:
                out[n] = pair[idx]
    return out
