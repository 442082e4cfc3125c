"""Multiple tensor-on-tensor regression.

Fits a linear map from several tensor inputs to one tensor response by
alternating exact block updates: input bases are fixed up front (HOSVD of
each input or truncated identities), core coefficient tensors are refreshed
by closed-form least squares, and output bases by an orthogonal Procrustes
step, until the squared training residual stops moving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, NumericalError
from .tensor import (
    _fix_signs,
    fold_general,
    leading_left_vectors,
    mode_product,
    multi_mode_product,
    unfold,
    unfold_general,
)

__all__ = [
    "Dataset",
    "FitConfig",
    "MtotModel",
    "input_projection",
    "update_core",
    "update_basis",
    "assemble_coefficients",
    "loss",
    "fit",
    "predict",
]


@dataclass
class Dataset:
    """One response tensor and p input tensors, sample mode first everywhere."""

    y: np.ndarray
    xs: list[np.ndarray]

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        self.xs = [np.asarray(x, dtype=np.float64) for x in self.xs]
        if self.y.ndim < 2:
            raise ConfigError("response must have at least one non-sample mode")
        if not self.xs:
            raise ConfigError("at least one input tensor is required")
        m = self.y.shape[0]
        if m < 1:
            raise ConfigError("empty sample mode")
        for j, x in enumerate(self.xs):
            if x.ndim < 2:
                raise ConfigError(f"input {j} must be at least 2-way; store scalars as Mx1")
            if x.shape[0] != m:
                raise ConfigError(f"input {j} has {x.shape[0]} samples, response has {m}")

    @property
    def num_samples(self) -> int:
        return self.y.shape[0]

    @property
    def num_inputs(self) -> int:
        return len(self.xs)

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self.y.shape[1:]

    @property
    def input_shapes(self) -> list[tuple[int, ...]]:
        return [x.shape[1:] for x in self.xs]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.y[idx], [x[idx] for x in self.xs])


@dataclass
class FitConfig:
    """Solver settings.

    `input_ranks` has one entry per input: an int applies uniformly across
    that input's non-sample modes, a tuple gives per-mode ranks.
    `output_rank` works the same way for the response modes. `seed` only
    matters with ``init="random"``; the default HOSVD initialization is
    deterministic.
    """

    input_ranks: Sequence
    output_rank: int | Sequence[int]
    tol: float = 1e-6
    max_iter: int = 100
    seed: int = 0
    input_basis: str = "tucker"  # or "identity"
    init: str = "hosvd"  # or "random"

    def __post_init__(self):
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if self.input_basis not in ("tucker", "identity"):
            raise ConfigError(f"unknown input_basis {self.input_basis!r}")
        if self.init not in ("hosvd", "random"):
            raise ConfigError(f"unknown init {self.init!r}")


@dataclass
class MtotModel:
    """Fitted model: per-input factor sets, shared output bases, core tensors.

    ``cores[j]`` stores the input-side modes of the j-th coefficient block
    flattened into its leading mode, followed by one mode per response mode.
    """

    input_factors: list[list[np.ndarray]]
    output_bases: list[np.ndarray]
    cores: list[np.ndarray]
    input_shapes: list[tuple[int, ...]]
    output_shape: tuple[int, ...]
    input_ranks: list[tuple[int, ...]]
    output_ranks: tuple[int, ...]
    loss_trace: list[float] = field(default_factory=list)
    stagnated: bool = False

    @property
    def num_inputs(self) -> int:
        return len(self.cores)

    @property
    def iterations(self) -> int:
        return max(len(self.loss_trace) - 1, 0)


def _resolve_rank(spec, extents: tuple[int, ...], what: str) -> tuple[int, ...]:
    if np.isscalar(spec):
        ranks = (int(spec),) * len(extents)
    else:
        ranks = tuple(int(r) for r in spec)
        if len(ranks) != len(extents):
            raise ConfigError(f"{what}: {len(ranks)} ranks given for {len(extents)} modes")
    for r, n in zip(ranks, extents):
        if not 1 <= r <= n:
            raise ConfigError(f"{what}: rank {r} outside [1, {n}]")
    return ranks


def input_projection(x, factors: Sequence[np.ndarray]) -> np.ndarray:
    """Sample-by-feature score matrix of one input under its mode bases.

    Computed by chained transposed mode products over the non-sample modes,
    then unfolding along the sample mode; equals the sample unfolding times
    the Kronecker product of the factors (highest mode leftmost) without
    ever forming it.
    """
    x = np.asarray(x, dtype=np.float64)
    if len(factors) != x.ndim - 1:
        raise ValueError(f"{len(factors)} factors for an input with {x.ndim - 1} non-sample modes")
    t = multi_mode_product(x, factors, modes=range(1, x.ndim), transpose=True)
    return unfold(t, 0)


def _score_solver(scores: np.ndarray) -> np.ndarray:
    """Least-squares map from responses to score coefficients.

    SVD pseudoinverse with cutoff sigma_max * max(dims) * eps, so
    rank-deficient score matrices yield the minimum-norm solution instead of
    failing.
    """
    scores = np.asarray(scores, dtype=np.float64)
    rcond = max(scores.shape) * np.finfo(np.float64).eps
    try:
        return np.linalg.pinv(scores, rcond=rcond)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError("SVD failed while inverting a score matrix") from exc


def update_core(residual, scores, output_bases: Sequence[np.ndarray]) -> np.ndarray:
    """Exact least-squares core update for one input, all else held fixed.

    `residual` is the response minus every other input's contribution.
    Solves the stacked regression in closed form: pseudoinverse of the score
    matrix along the sample mode, transposed output bases along the rest
    (valid because the output bases are orthonormal).
    """
    return _update_core_solved(np.asarray(residual, dtype=np.float64),
                               _score_solver(scores), output_bases)


def _update_core_solved(residual, solver, output_bases) -> np.ndarray:
    core = mode_product(residual, solver, 0)
    for i, v in enumerate(output_bases):
        core = mode_product(core, v.T, i + 1)
    return core


def update_basis(y, cores: Sequence[np.ndarray], scores: Sequence[np.ndarray],
                 output_bases: Sequence[np.ndarray], mode: int) -> tuple[np.ndarray, bool]:
    """Procrustes-optimal basis for one response mode, all else held fixed.

    `mode` indexes the response modes (0-based; axis ``mode + 1`` of the
    stacked response). Builds the summed design matrix through mode products,
    takes the SVD of (response unfolding) @ design.T and returns the
    orthonormal polar factor truncated to the current basis width. A zero
    design signals stagnation: the previous basis is returned unchanged with
    the flag set.
    """
    y = np.asarray(y, dtype=np.float64)
    d = y.ndim - 1
    if not 0 <= mode < d:
        raise ValueError(f"response mode {mode} out of range for {d} modes")
    return _update_basis_unfolded(unfold(y, mode + 1), d, cores, scores, output_bases, mode)


def _update_basis_unfolded(y_unfolded, d: int, cores, scores, output_bases,
                           mode: int) -> tuple[np.ndarray, bool]:
    axis = mode + 1
    design = None
    for core, z in zip(cores, scores):
        t = mode_product(core, z, 0)
        for k in range(1, d + 1):
            if k != axis:
                t = mode_product(t, output_bases[k - 1], k)
        s = unfold(t, axis)
        design = s if design is None else design + s
    g = y_unfolded @ design.T
    if not np.any(g):
        return np.asarray(output_bases[mode], dtype=np.float64), True
    try:
        r, _, wt = np.linalg.svd(g, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError("SVD failed in output-basis update") from exc
    return r @ wt, False


def assemble_coefficients(model: MtotModel, j: int) -> np.ndarray:
    """Full coefficient tensor for input `j`: input modes first, then response modes.

    Unflattens the stored core's leading mode back into the per-mode input
    ranks, then expands along every mode with the input factors and output
    bases.
    """
    in_ranks = model.input_ranks[j]
    out_ranks = model.output_ranks
    l, d = len(in_ranks), len(out_ranks)
    core = model.cores[j]
    flat = unfold_general(core, (0,), tuple(range(1, core.ndim)))
    cube = fold_general(flat, tuple(range(l)), tuple(range(l, l + d)), in_ranks + out_ranks)
    return multi_mode_product(cube, list(model.input_factors[j]) + list(model.output_bases))


def loss(dataset: Dataset, coefficients: Sequence[np.ndarray]) -> float:
    """Squared Frobenius residual of the stacked regression under given coefficients."""
    resid = dataset.y - _predict_from_coefficients(dataset.xs, coefficients)
    return float(np.vdot(resid, resid))


def _predict_from_coefficients(xs, coefficients) -> np.ndarray:
    out = None
    for x, b in zip(xs, coefficients):
        l = x.ndim - 1
        part = np.tensordot(x, b, axes=(tuple(range(1, x.ndim)), tuple(range(l))))
        out = part if out is None else out + part
    return out


def _check_finite(dataset: Dataset):
    if not np.isfinite(dataset.y).all():
        raise NumericalError("non-finite values in the response")
    for j, x in enumerate(dataset.xs):
        if not np.isfinite(x).all():
            raise NumericalError(f"non-finite values in input {j}")


def _input_bases(dataset: Dataset, ranks, kind: str) -> list[list[np.ndarray]]:
    factors = []
    for x, rr in zip(dataset.xs, ranks):
        per_mode = []
        for mode, r in enumerate(rr, start=1):
            if kind == "identity":
                per_mode.append(np.eye(x.shape[mode])[:, :r])
            else:
                per_mode.append(leading_left_vectors(unfold(x, mode), r))
        factors.append(per_mode)
    return factors


def _gram_left_vectors(m: np.ndarray, count: int) -> np.ndarray:
    """Leading left singular vectors through the row Gram matrix.

    Much faster than a direct SVD for very wide matrices; precision in the
    trailing directions is lower, which is fine for initialization (the
    sweep updates re-estimate every basis).
    """
    w, v = np.linalg.eigh(m @ m.T)
    return _fix_signs(v[:, ::-1][:, :count])


def _init_output_bases(y: np.ndarray, ranks, cfg: FitConfig) -> list[np.ndarray]:
    if cfg.init == "random":
        rng = np.random.default_rng(cfg.seed)
        bases = []
        for i, r in enumerate(ranks):
            q, _ = np.linalg.qr(rng.standard_normal((y.shape[i + 1], r)))
            bases.append(q)
        return bases
    bases = []
    for i, r in enumerate(ranks):
        flat = unfold(y, i + 1)
        if flat.shape[1] > 4 * flat.shape[0]:
            bases.append(_gram_left_vectors(flat, r))
        else:
            bases.append(leading_left_vectors(flat, r))
    return bases


def fit(dataset: Dataset, config: FitConfig) -> MtotModel:
    """Alternating estimation: all cores, then all output bases, per sweep.

    Input bases come from the HOSVD of each input over its non-sample modes
    (or truncated identities); output bases start from the response HOSVD
    (or a seeded random orthonormal draw); cores start at zero. The loss is
    recorded after every sweep and iteration stops once its change falls
    below ``tol * max(initial loss, 1)`` or `max_iter` sweeps.
    """
    _check_finite(dataset)
    if len(config.input_ranks) != dataset.num_inputs:
        raise ConfigError(f"{len(config.input_ranks)} rank entries for {dataset.num_inputs} inputs")
    in_ranks = [
        _resolve_rank(spec, shape, f"input {j}")
        for j, (spec, shape) in enumerate(zip(config.input_ranks, dataset.input_shapes))
    ]
    out_ranks = _resolve_rank(config.output_rank, dataset.output_shape, "output")
    factors = _input_bases(dataset, in_ranks, config.input_basis)
    bases = _init_output_bases(dataset.y, out_ranks, config)
    return _als(dataset, in_ranks, out_ranks, factors, bases, config.tol, config.max_iter)


def _als(dataset: Dataset, in_ranks, out_ranks, factors, bases,
         tol: float, max_iter: int) -> MtotModel:
    """Sweep loop shared by :func:`fit` and the cross-validation fast path.

    The response enters every update only through its contractions with the
    fixed score matrices, so after projecting it once all sweeps and the
    loss run on rank-sized arrays instead of the full M x Q response.
    """
    y = dataset.y
    d = len(out_ranks)
    p = dataset.num_inputs
    scores = [input_projection(x, f) for x, f in zip(dataset.xs, factors)]
    solvers = [_score_solver(z) for z in scores]

    y_by_scores = [mode_product(y, z.T, 0) for z in scores]
    y_by_solvers = [mode_product(y, s, 0) for s in solvers]
    score_gram = [[scores[j].T @ scores[k] for k in range(p)] for j in range(p)]
    solver_cross = [[solvers[j] @ scores[k] for k in range(p)] for j in range(p)]
    y_norm2 = float(np.vdot(y, y))

    cores = [np.zeros((math.prod(rr),) + out_ranks) for rr in in_ranks]

    def project_outputs(t, skip: int = -1):
        for i, v in enumerate(bases):
            if i != skip:
                t = mode_product(t, v.T, i + 1)
        return t

    def current_loss() -> float:
        total = y_norm2
        for j in range(p):
            total -= 2.0 * float(np.vdot(project_outputs(y_by_scores[j]), cores[j]))
            for k in range(p):
                total += float(np.vdot(cores[j], mode_product(cores[k], score_gram[j][k], 0)))
        return max(total, 0.0)

    w0 = y_norm2
    trace = [w0]
    stagnated = False
    threshold = tol * max(w0, 1.0)

    for _ in range(max_iter):
        for j in range(p):
            core = project_outputs(y_by_solvers[j])
            for k in range(p):
                if k != j:
                    core = core - mode_product(cores[k], solver_cross[j][k], 0)
            cores[j] = core
        for i in range(d):
            design_gram = None
            for j in range(p):
                partial = unfold(project_outputs(y_by_scores[j], skip=i), i + 1)
                g = partial @ unfold(cores[j], i + 1).T
                design_gram = g if design_gram is None else design_gram + g
            if not np.any(design_gram):
                stagnated = True
                continue
            try:
                r, _, wt = np.linalg.svd(design_gram, full_matrices=False)
            except np.linalg.LinAlgError as exc:  # pragma: no cover
                raise NumericalError("SVD failed in output-basis update") from exc
            bases[i] = r @ wt
        trace.append(current_loss())
        if abs(trace[-2] - trace[-1]) <= threshold:
            break

    return MtotModel(
        input_factors=factors,
        output_bases=bases,
        cores=cores,
        input_shapes=dataset.input_shapes,
        output_shape=dataset.output_shape,
        input_ranks=in_ranks,
        output_ranks=out_ranks,
        loss_trace=trace,
        stagnated=stagnated,
    )


def predict(model: MtotModel, xs_new: Sequence[np.ndarray]) -> np.ndarray:
    """Response prediction: each input contracted with its coefficient tensor, summed.

    Evaluated in factored form (scores, core, output bases) for memory's
    sake; identical to contracting against :func:`assemble_coefficients`
    output up to floating-point association.
    """
    xs_new = [np.asarray(x, dtype=np.float64) for x in xs_new]
    if len(xs_new) != model.num_inputs:
        raise ValueError(f"{len(xs_new)} inputs given, model has {model.num_inputs}")
    m = xs_new[0].shape[0]
    out = None
    for j, x in enumerate(xs_new):
        if x.shape[0] != m:
            raise ValueError("inputs disagree on sample count")
        if x.shape[1:] != tuple(model.input_shapes[j]):
            raise ValueError(
                f"input {j} has shape {x.shape[1:]}, model expects {tuple(model.input_shapes[j])}"
            )
        part = mode_product(model.cores[j], input_projection(x, model.input_factors[j]), 0)
        for i, v in enumerate(model.output_bases):
            part = mode_product(part, v, i + 1)
        out = part if out is None else out + part
    return out
