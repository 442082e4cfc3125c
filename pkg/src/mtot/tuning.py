"""Rank selection: halving-ladder candidate grids and k-fold cross-validation."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .solver import Dataset, FitConfig, _als, _init_output_bases, predict
from .tensor import leading_left_vectors, unfold

__all__ = ["RankGrid", "CvReport", "numerical_rank", "build_grid", "make_rank_grid",
           "fold_indices", "cross_validate"]


def numerical_rank(m) -> int:
    """Count of singular values above sigma_max * max(rows, cols) * machine epsilon."""
    m = np.asarray(m, dtype=np.float64)
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    cutoff = s[0] * max(m.shape) * np.finfo(np.float64).eps
    return int((s > cutoff).sum())


def build_grid(r: int) -> tuple[int, ...]:
    """Halving ladder {ceil(r / 2^t)} down from r, with 1 always included.

    A nonpositive source rank (zero matrix) falls back to {1}.
    """
    if r < 1:
        return (1,)
    ladder = {1}
    step = 0
    while True:
        value = math.ceil(r / 2**step)
        ladder.add(value)
        if value == 1:
            break
        step += 1
    return tuple(sorted(ladder))


@dataclass
class RankGrid:
    """Candidate rank sets for each input and for the output, with their source ranks."""

    input_candidates: list[tuple[int, ...]]
    output_candidates: tuple[int, ...]
    input_source_ranks: list[int]
    output_source_rank: int

    def tuples(self):
        return itertools.product(*self.input_candidates, self.output_candidates)


def make_rank_grid(dataset: Dataset) -> RankGrid:
    """Grids from the numerical ranks of every sample-mode unfolding."""
    in_ranks = [numerical_rank(unfold(x, 0)) for x in dataset.xs]
    out_rank = numerical_rank(unfold(dataset.y, 0))
    return RankGrid(
        input_candidates=[build_grid(r) for r in in_ranks],
        output_candidates=build_grid(out_rank),
        input_source_ranks=in_ranks,
        output_source_rank=out_rank,
    )


@dataclass
class CvReport:
    """Cross-validation outcome over a rank grid."""

    mean_rss: dict[tuple[int, ...], float]
    folds_used: dict[tuple[int, ...], int]
    skipped: list[tuple[int, ...]]
    chosen: tuple[int, ...]
    k: int
    seed: int

    def to_csv(self, path):
        num_inputs = len(self.chosen) - 1
        header = [f"rank_in_{j}" for j in range(num_inputs)] + ["rank_out", "mean_rss", "folds_used"]
        with Path(path).open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for combo in sorted(self.mean_rss):
                writer.writerow(list(combo) + [f"{self.mean_rss[combo]:.17g}", self.folds_used[combo]])


def fold_indices(m: int, k: int, seed: int) -> list[np.ndarray]:
    """Seeded partition of `m` samples into `k` folds differing in size by at most one."""
    if k < 2:
        raise ConfigError("need at least 2 folds")
    if m < k:
        raise ConfigError(f"cannot make {k} folds from {m} samples")
    perm = np.random.default_rng(seed).permutation(m)
    return [np.sort(perm[i::k]) for i in range(k)]


def _parameter_count(combo: tuple[int, ...], dataset: Dataset) -> int:
    *in_ranks, out_rank = combo
    d = dataset.y.ndim - 1
    total = 0
    for r, shape in zip(in_ranks, dataset.input_shapes):
        total += r ** len(shape) * out_rank**d  # core entries
        total += sum(n * r for n in shape)  # factor entries
    total += sum(n * out_rank for n in dataset.output_shape)
    return total


class _FoldBank:
    """Per-fold factor and init-basis banks computed once at the largest
    feasible candidate ranks; individual tuples reuse leading columns.

    Valid because the leading r columns of a truncated SVD basis equal the
    rank-r computation.
    """

    def __init__(self, train: Dataset, max_in, max_out):
        self.train = train
        self.factor_bank = [
            [leading_left_vectors(unfold(x, mode + 1), r) for mode, r in enumerate(ranks)]
            for x, ranks in zip(train.xs, max_in)
        ]
        cfg = FitConfig(input_ranks=[1] * train.num_inputs, output_rank=1)
        self.init_bank = _init_output_bases(train.y, max_out, cfg)

    def run(self, in_ranks, out_rank, tol, max_iter):
        factors = [
            [bank[:, :in_ranks[j]] for bank in per_input]
            for j, per_input in enumerate(self.factor_bank)
        ]
        bases = [bank[:, :out_rank] for bank in self.init_bank]
        resolved_in = [(r,) * len(shape) for r, shape in zip(in_ranks, self.train.input_shapes)]
        resolved_out = (out_rank,) * len(self.train.output_shape)
        return _als(self.train, resolved_in, resolved_out, factors, bases, tol, max_iter)


def cross_validate(dataset: Dataset, grid: RankGrid | None = None, k: int = 5,
                   seed: int = 0, tol: float = 1e-6, max_iter: int = 100) -> CvReport:
    """Grid search over rank tuples by k-fold CV on held-out squared error.

    RSS is normalized by the held-out entry count and averaged over folds.
    Ties break toward the smallest parameter count, then the lexicographically
    smallest tuple. Infeasible tuples (a candidate rank exceeding a mode
    extent) are skipped and recorded.
    """
    if grid is None:
        grid = make_rank_grid(dataset)
    folds = fold_indices(dataset.num_samples, k, seed)
    all_idx = np.arange(dataset.num_samples)

    in_extents = [min(shape) for shape in dataset.input_shapes]
    out_extent = min(dataset.output_shape)
    max_in = [
        [min(max(cands), extent)] * len(shape)
        for cands, extent, shape in zip(grid.input_candidates, in_extents, dataset.input_shapes)
    ]
    max_out = [min(max(grid.output_candidates), out_extent)] * len(dataset.output_shape)
    banks = [
        _FoldBank(dataset.subset(np.setdiff1d(all_idx, held)), max_in, max_out)
        for held in folds
    ]

    mean_rss: dict[tuple[int, ...], float] = {}
    folds_used: dict[tuple[int, ...], int] = {}
    skipped: list[tuple[int, ...]] = []
    for combo in grid.tuples():
        *in_ranks, out_rank = combo
        if out_rank > out_extent or any(r > e for r, e in zip(in_ranks, in_extents)):
            skipped.append(combo)
            continue
        per_fold = []
        for held, bank in zip(folds, banks):
            model = bank.run(in_ranks, out_rank, tol, max_iter)
            pred = predict(model, [x[held] for x in dataset.xs])
            resid = dataset.y[held] - pred
            per_fold.append(float(np.vdot(resid, resid)) / resid.size)
        mean_rss[combo] = float(np.mean(per_fold))
        folds_used[combo] = len(per_fold)

    if not mean_rss:
        raise ConfigError("no feasible rank tuple in the grid")
    chosen = min(
        mean_rss,
        key=lambda combo: (mean_rss[combo], _parameter_count(combo, dataset), combo),
    )
    return CvReport(mean_rss=mean_rss, folds_used=folds_used, skipped=skipped,
                    chosen=chosen, k=k, seed=seed)
