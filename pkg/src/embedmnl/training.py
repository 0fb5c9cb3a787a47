"""Mini-batch maximum likelihood with Adam, embedding dropout and B' >= 0."""
from __future__ import annotations

import csv
import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import ChoiceDataset
from .models import BLOCKS, ModelParams, ModelSpec, log_likelihood, loss_and_grad
from .numkernel import ADAM_EPSILON, AdamState, adam_step, bernoulli

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, block: str, message: str = ""):
        self.step, self.block = step, block
        super().__init__(message or f"non-finite values at step {step} in block {block!r}")


@dataclass
class FitConfig:
    epochs: int = 500
    steps_per_epoch: int = 50
    batch_size: int | None = None
    learning_rate: float = 0.001
    epsilon: float = ADAM_EPSILON
    clipnorm: float | None = 50.0
    dropout: float = 0.2
    runs: int = 30
    base_seed: int = 0
    vary_seed: bool = True
    freeze_embeddings: bool = False
    log_every: int = 50
    threads: int = 1

    def __post_init__(self):
        if self.epochs < 1 or self.steps_per_epoch < 1:
            raise ValueError("epochs and steps_per_epoch must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def seed_for(self, run: int) -> int:
        return self.base_seed + run if self.vary_seed else self.base_seed

    def resolve_batch_size(self, n: int) -> int:
        return self.batch_size or max(1, math.ceil(n / self.steps_per_epoch))


@dataclass
class RunResult:
    params: ModelParams
    ll_train: float
    ll_test: float | None
    n_params: int
    aic: float
    wall_time: float
    seed: int
    history: list = field(default_factory=list)


def aic(n_params: int, ll: float) -> float:
    return 2.0 * n_params - 2.0 * ll


def trainable_blocks(spec: ModelSpec, freeze_embeddings: bool = False) -> tuple[str, ...]:
    shapes = spec.block_shapes()
    blocks = [k for k in BLOCKS if np.prod(shapes[k]) > 0]
    if freeze_embeddings and "W" in blocks:
        blocks.remove("W")
    return tuple(blocks)


def make_dropout_mask(rng: np.random.Generator, shape, rate: float) -> np.ndarray | None:
    """Inverted-dropout mask: kept entries scaled by 1/(1-rate)."""
    if rate <= 0.0:
        return None
    return bernoulli(rng, 1.0 - rate, shape) / (1.0 - rate)


def train_step(spec, params, batch, state, blocks, dropout_mask=None):
    """Gradient, clipped Adam update of ``blocks`` and projection of B'.

    Returns ``(loss, new_params)``.
    """
    loss, grad = loss_and_grad(spec, params, batch, dropout_mask)
    flat = adam_step(params.flatten(blocks), grad.flatten(blocks), state)
    new = params.unflatten(flat, blocks)
    if new.Bp.size:
        new.Bp = np.maximum(new.Bp, 0.0)
    return loss, new


def _check_finite(params: ModelParams, loss: float, step: int):
    if not np.isfinite(loss):
        raise TrainingDiverged(step, "loss", f"non-finite loss at step {step}")
    for k in BLOCKS:
        if not np.all(np.isfinite(getattr(params, k))):
            raise TrainingDiverged(step, k)


def fit(
    spec: ModelSpec,
    train: ChoiceDataset,
    config: FitConfig,
    *,
    seed: int | None = None,
    init: ModelParams | None = None,
    test: ChoiceDataset | None = None,
) -> RunResult:
    """Estimate one model run.

    ``init`` overrides the random initialisation (e.g. pretrained embeddings
    with ``config.freeze_embeddings``).  Initialisation, batch order and
    dropout draw from independent streams spawned from ``seed``.
    """
    if len(train) == 0:
        raise ValueError("training set is empty")
    seed = config.base_seed if seed is None else seed
    init_rng, batch_rng, drop_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
    params = ModelParams.init(spec, init_rng) if init is None else init.copy()
    params.check(spec)

    blocks = trainable_blocks(spec, config.freeze_embeddings)
    state = AdamState(
        size=len(params.flatten(blocks)),
        lr=config.learning_rate,
        epsilon=config.epsilon,
        clipnorm=config.clipnorm,
    )
    n = len(train)
    bs = config.resolve_batch_size(n)
    use_dropout = spec.uses_embeddings and config.dropout > 0
    history = []
    t0 = time.perf_counter()
    step = 0
    for epoch in range(config.epochs):
        perm = batch_rng.permutation(n)
        for s in range(config.steps_per_epoch):
            idx = perm[np.arange(s * bs, (s + 1) * bs) % n]
            batch = train.batch(idx)
            mask = None
            if use_dropout:
                mask = make_dropout_mask(drop_rng, (len(idx), spec.n_categorical, spec.stored_dims), config.dropout)
            loss, params = train_step(spec, params, batch, state, blocks, mask)
            step += 1
            _check_finite(params, loss, step)
        if config.log_every and ((epoch + 1) % config.log_every == 0 or epoch + 1 == config.epochs):
            ll = log_likelihood(spec, params, train)
            history.append((epoch + 1, ll))
            log.info("seed %d epoch %d LL_train %.4f", seed, epoch + 1, ll)

    ll_train = log_likelihood(spec, params, train)
    ll_test = log_likelihood(spec, params, test) if test is not None and len(test) else None
    k = spec.n_params
    return RunResult(
        params=params,
        ll_train=ll_train,
        ll_test=ll_test,
        n_params=k,
        aic=aic(k, ll_train),
        wall_time=time.perf_counter() - t0,
        seed=seed,
        history=history,
    )


@dataclass
class MultiRunReport:
    spec: ModelSpec
    results: list
    failures: list
    best: RunResult | None

    def _values(self, attr):
        return np.array([getattr(r, attr) for r in self.results if getattr(r, attr) is not None], dtype=float)

    def mean_std(self, attr: str) -> tuple[float, float]:
        vals = self._values(attr)
        if len(vals) == 0:
            return float("nan"), float("nan")
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else float("nan")
        return float(np.mean(vals)), std

    @property
    def n_runs(self) -> int:
        return len(self.results)


def fit_multi(
    spec: ModelSpec,
    train: ChoiceDataset,
    test: ChoiceDataset | None,
    config: FitConfig,
    *,
    init: ModelParams | None = None,
    run_log: Path | None = None,
) -> MultiRunReport:
    """``config.runs`` independent fits with seeds ``base_seed + r``.

    Failed runs are recorded and excluded.  The best run is the one with the
    highest LL_test (LL_train when there is no test set).
    """

    def one(r):
        seed = config.seed_for(r)
        try:
            return r, fit(spec, train, config, seed=seed, init=init, test=test), None
        except TrainingDiverged as exc:
            log.warning("run %d (seed %d) aborted: %s", r, seed, exc)
            return r, None, (r, seed, str(exc))

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            outcomes = list(pool.map(one, range(config.runs)))
    else:
        outcomes = [one(r) for r in range(config.runs)]

    results = [res for _, res, _ in outcomes if res is not None]
    failures = [f for _, _, f in outcomes if f is not None]
    best = None
    if results:
        key = (lambda r: r.ll_test) if test is not None and len(test) else (lambda r: r.ll_train)
        best = max(results, key=key)
    if run_log is not None:
        write_run_log(run_log, outcomes)
    return MultiRunReport(spec=spec, results=results, failures=failures, best=best)


def write_run_log(path, outcomes, header: str | None = None) -> None:
    path = Path(path)
    new = not path.exists()
    with path.open("a", newline="") as fh:
        if new and header:
            fh.write(header)
        w = csv.writer(fh)
        if new:
            w.writerow(["run", "seed", "status", "ll_train", "ll_test", "n_params", "aic", "wall_time"])
        for r, res, fail in outcomes:
            if res is None:
                w.writerow([r, fail[1], "failed", "", "", "", "", ""])
            else:
                w.writerow(
                    [r, res.seed, "ok", repr(res.ll_train), "" if res.ll_test is None else repr(res.ll_test),
                     res.n_params, repr(res.aic), f"{res.wall_time:.3f}"]
                )


def unidentified_features(data: ChoiceDataset) -> list[str]:
    """Features with no variation across the alternatives of any observation."""
    X = data.X
    avail = data.avail[..., None]
    n_av = np.maximum(data.avail.sum(axis=1), 1)[:, None]
    centred = np.where(avail, X - (np.where(avail, X, 0).sum(axis=1) / n_av)[:, None, :], 0.0)
    flat = np.abs(centred).max(axis=(0, 1))
    return [name for name, v in zip(data.feature_names, flat) if v == 0.0]


def fit_dummy_baseline(
    train: ChoiceDataset, config: FitConfig, *, test: ChoiceDataset | None = None, seed: int | None = None
) -> RunResult:
    """Plain MNL on a :func:`~embedmnl.data.dummy_expand`-ed dataset."""
    if train.vocabulary.n_variables:
        raise ValueError("apply dummy_expand before fitting the dummy baseline")
    flat = unidentified_features(train)
    if flat:
        warnings.warn(f"design is singular: no identifying variation in {', '.join(flat)}")
    spec = ModelSpec.for_dataset("mnl", train)
    return fit(spec, train, config, seed=seed, test=test)
