"""Dense tensor primitives: matricization, mode products, Kronecker, contraction, HOSVD.

Tensors are plain ``numpy.ndarray`` values in C layout (last mode varies
fastest in the buffer). Matricizations use the convention where, among the
modes mapped to one side of the matrix, the lowest-numbered mode varies
fastest; this is the ordering under which a chain of mode products with
factor matrices ``A_0 .. A_k`` matricizes to the Kronecker product
``A_k (x) ... (x) A_0``. Modes are 0-based.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import NumericalError

__all__ = [
    "unfold",
    "fold",
    "unfold_general",
    "fold_general",
    "mode_product",
    "multi_mode_product",
    "kronecker",
    "contract",
    "frobenius_norm",
    "tucker",
    "leading_left_vectors",
]


def _astensor(t) -> np.ndarray:
    a = np.asarray(t, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1)
    return a


def unfold(t, mode: int) -> np.ndarray:
    """Mode-`mode` matricization whose columns are the mode fibers.

    Column ordering runs over the remaining modes in ascending order with
    the lowest-numbered one varying fastest.
    """
    t = _astensor(t)
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for an order-{t.ndim} tensor")
    return np.reshape(np.moveaxis(t, mode, 0), (t.shape[mode], -1), order="F")


def fold(m, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`: rebuild the tensor of `shape` from its mode unfolding."""
    m = np.asarray(m, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    if not 0 <= mode < len(shape):
        raise ValueError(f"mode {mode} out of range for shape {shape}")
    rest = tuple(s for k, s in enumerate(shape) if k != mode)
    if m.ndim != 2 or m.shape != (shape[mode], math.prod(rest)):
        raise ValueError(f"matrix shape {m.shape} does not match unfolding of {shape} at mode {mode}")
    return np.moveaxis(np.reshape(m, (shape[mode],) + rest, order="F"), 0, mode)


def _check_split(ndim: int, row_modes, col_modes) -> tuple[tuple[int, ...], tuple[int, ...]]:
    rows = tuple(int(k) for k in row_modes)
    cols = tuple(int(k) for k in col_modes)
    if not rows or not cols:
        raise ValueError("both sides of a mode split must be nonempty")
    if sorted(rows + cols) != list(range(ndim)):
        raise ValueError(f"split {rows}|{cols} is not a partition of the {ndim} modes")
    return rows, cols


def unfold_general(t, row_modes: Sequence[int], col_modes: Sequence[int]) -> np.ndarray:
    """General matricization mapping `row_modes` to rows and `col_modes` to columns.

    Within each group, earlier-listed modes vary fastest.
    """
    t = _astensor(t)
    rows, cols = _check_split(t.ndim, row_modes, col_modes)
    p = math.prod(t.shape[k] for k in rows)
    q = math.prod(t.shape[k] for k in cols)
    return np.transpose(t, rows + cols).reshape((p, q), order="F")


def fold_general(m, row_modes: Sequence[int], col_modes: Sequence[int], shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold_general` for a tensor of `shape`."""
    m = np.asarray(m, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    rows, cols = _check_split(len(shape), row_modes, col_modes)
    p = math.prod(shape[k] for k in rows)
    q = math.prod(shape[k] for k in cols)
    if m.shape != (p, q):
        raise ValueError(f"matrix shape {m.shape} does not match split {rows}|{cols} of {shape}")
    perm = rows + cols
    t = np.reshape(m, tuple(shape[k] for k in perm), order="F")
    return np.transpose(t, np.argsort(perm))


def mode_product(t, a, mode: int) -> np.ndarray:
    """Mode-`mode` product of a tensor with a matrix, replacing that extent by `a.shape[0]`."""
    t = _astensor(t)
    a = np.asarray(a, dtype=np.float64)
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for an order-{t.ndim} tensor")
    if a.ndim != 2 or a.shape[1] != t.shape[mode]:
        raise ValueError(f"matrix of shape {a.shape} cannot act on mode {mode} of shape {t.shape}")
    return np.moveaxis(np.tensordot(a, t, axes=(1, mode)), 0, mode)


def multi_mode_product(t, factors: Sequence[np.ndarray], modes: Sequence[int] | None = None,
                       transpose: bool = False) -> np.ndarray:
    """Sequential mode products of `t` with `factors` along distinct `modes`.

    With ``transpose=True`` each factor acts as its transpose, which projects
    onto the factor's column space coordinates (the HOSVD core map).
    """
    t = _astensor(t)
    if modes is None:
        modes = range(len(factors))
    modes = [int(m) for m in modes]
    if len(modes) != len(factors):
        raise ValueError("factors and modes differ in length")
    if len(set(modes)) != len(modes):
        raise ValueError(f"duplicate modes in {modes}")
    out = t
    for a, m in zip(factors, modes):
        a = np.asarray(a, dtype=np.float64)
        out = mode_product(out, a.T if transpose else a, m)
    return out


def kronecker(a, b) -> np.ndarray:
    """Kronecker product: block matrix of `a`'s entries each scaling all of `b`."""
    return np.kron(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))


def contract(x, b, num_modes: int) -> np.ndarray:
    """Contraction of `x` against the leading `num_modes` modes of `b`.

    `x` must have exactly `num_modes` modes matching `b`'s leading extents;
    the result carries `b`'s trailing modes.
    """
    x = _astensor(x)
    b = _astensor(b)
    if num_modes != x.ndim:
        raise ValueError(f"contraction count {num_modes} does not match order-{x.ndim} tensor")
    if b.ndim <= num_modes:
        raise ValueError("second operand must have trailing modes beyond the contracted ones")
    if b.shape[:num_modes] != x.shape:
        raise ValueError(f"leading extents {b.shape[:num_modes]} do not match {x.shape}")
    return np.tensordot(x, b, axes=(tuple(range(num_modes)), tuple(range(num_modes))))


def frobenius_norm(t) -> float:
    """Square root of the sum of squared entries."""
    return float(np.linalg.norm(_astensor(t).ravel()))


def _fix_signs(u: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry is positive."""
    u = u.copy()
    for k in range(u.shape[1]):
        i = int(np.argmax(np.abs(u[:, k])))
        if u[i, k] < 0:
            u[:, k] = -u[:, k]
    return u


def _complete_basis(u: np.ndarray, count: int) -> np.ndarray:
    """Extend orthonormal columns of `u` to `count` columns with an orthonormal complement."""
    n, k = u.shape
    if count > n:
        raise ValueError(f"cannot extract {count} orthonormal columns in dimension {n}")
    q, _ = np.linalg.qr(np.concatenate([u, np.eye(n)], axis=1))
    out = q[:, :count]
    out[:, :k] = u
    return out


def leading_left_vectors(m, count: int) -> np.ndarray:
    """Leading `count` left singular vectors of `m`, sign-fixed for reproducibility.

    When `m` has fewer columns than `count` the basis is completed with a
    deterministic orthonormal complement.
    """
    m = np.asarray(m, dtype=np.float64)
    try:
        u, _, _ = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"SVD failed on a {m.shape} matrix") from exc
    if u.shape[1] < count:
        u = _complete_basis(u, count)
    return _fix_signs(u[:, :count])


def tucker(t, ranks: Sequence[int]) -> tuple[np.ndarray, list[np.ndarray]]:
    """Truncated higher-order SVD.

    Returns ``(core, factors)`` where each factor holds the leading left
    singular vectors of the matching mode unfolding and
    ``core = t x_0 factors[0].T x_1 ...``. No iterative refinement is done:
    the factors are the per-mode singular bases and the core is the
    projection of `t` onto them.
    """
    t = _astensor(t)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != t.ndim:
        raise ValueError(f"{len(ranks)} ranks given for an order-{t.ndim} tensor")
    for k, r in enumerate(ranks):
        if not 1 <= r <= t.shape[k]:
            raise ValueError(f"rank {r} out of range [1, {t.shape[k]}] at mode {k}")
    factors = [leading_left_vectors(unfold(t, k), r) for k, r in enumerate(ranks)]
    core = multi_mode_product(t, factors, transpose=True)
    return core, factors
