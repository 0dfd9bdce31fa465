"""Dense numeric kernels: SVD, shrinkage, masks, Haar wavelets and blur.

Vectors and matrices are plain ``float64`` numpy arrays.  Every function here
is pure and returns a fresh array.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "IndexMask",
    "NumericFailure",
    "SvdFactors",
    "as_matrix",
    "as_vector",
    "haar_2d",
    "matrix_shrink",
    "nuclear_norm",
    "operator_norm_estimate",
    "project_mask",
    "svd",
    "uniform_blur_apply",
    "vector_shrink",
]


class NumericFailure(RuntimeError):
    """Raised when a dense factorization does not converge."""


def as_vector(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def as_matrix(a, name: str = "A") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``A = u @ diag(s) @ v.T`` with ``s`` non-increasing."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T


def svd(a) -> SvdFactors:
    """Thin SVD with a deterministic sign convention.

    Each left singular vector is flipped (together with its right partner) so
    that its first entry of non-negligible magnitude is positive.
    """
    a = as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"SVD did not converge: {exc}") from exc
    v = vt.T.copy()
    for j in range(u.shape[1]):
        col = u[:, j]
        scale = np.max(np.abs(col))
        if scale == 0.0:
            continue
        first = np.flatnonzero(np.abs(col) > 1e-12 * scale)[0]
        if col[first] < 0:
            u[:, j] = -col
            v[:, j] = -v[:, j]
    return SvdFactors(u=u, s=s, v=v)


def nuclear_norm(a) -> float:
    return float(np.sum(np.linalg.svd(as_matrix(a), compute_uv=False)))


def vector_shrink(z, tau: float) -> np.ndarray:
    """Soft thresholding ``sign(z) * max(|z| - tau, 0)``, the prox of ``tau*||.||_1``.

    Works entry-wise on arrays of any shape.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)


def matrix_shrink(z, tau: float) -> np.ndarray:
    """Singular value thresholding, the prox of ``tau*||.||_*``."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    f = svd(z)
    return (f.u * np.maximum(f.s - tau, 0.0)) @ f.v.T


class IndexMask:
    """Set of observed ``(row, col)`` positions inside a fixed shape.

    Entries are stored sorted in row-major order, without duplicates.
    """

    def __init__(self, entries: Iterable[tuple[int, int]], shape: tuple[int, int]):
        m, n = (int(shape[0]), int(shape[1]))
        if m <= 0 or n <= 0:
            raise ValueError(f"invalid mask shape {shape}")
        pairs = np.asarray(list(entries), dtype=np.int64).reshape(-1, 2)
        if pairs.size and (
            pairs.min() < 0 or pairs[:, 0].max() >= m or pairs[:, 1].max() >= n
        ):
            raise ValueError(f"mask entries out of range for shape {(m, n)}")
        flat = pairs[:, 0] * n + pairs[:, 1]
        if np.unique(flat).size != flat.size:
            raise ValueError("mask entries contain duplicates")
        order = np.argsort(flat, kind="stable")
        self._rows = pairs[order, 0].copy()
        self._cols = pairs[order, 1].copy()
        self.shape = (m, n)
        bool_mask = np.zeros((m, n), dtype=bool)
        bool_mask[self._rows, self._cols] = True
        bool_mask.setflags(write=False)
        self._bool = bool_mask

    @classmethod
    def from_bool(cls, mask) -> "IndexMask":
        mask = np.asarray(mask, dtype=bool)
        rows, cols = np.nonzero(mask)
        return cls(zip(rows.tolist(), cols.tolist()), mask.shape)

    @classmethod
    def full(cls, shape: tuple[int, int]) -> "IndexMask":
        return cls.from_bool(np.ones(shape, dtype=bool))

    @property
    def bool(self) -> np.ndarray:
        return self._bool

    @property
    def entries(self) -> list[tuple[int, int]]:
        return list(zip(self._rows.tolist(), self._cols.tolist()))

    def __len__(self) -> int:
        return int(self._rows.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, IndexMask)
            and self.shape == other.shape
            and np.array_equal(self._bool, other._bool)
        )

    def __repr__(self) -> str:
        return f"IndexMask(shape={self.shape}, size={len(self)})"


def project_mask(x, mask: IndexMask) -> np.ndarray:
    """Keep the entries of ``x`` listed in ``mask`` and zero the rest."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != mask.shape:
        raise ValueError(f"shape mismatch: matrix {x.shape} vs mask {mask.shape}")
    return np.where(mask.bool, x, 0.0)


_SQRT_HALF = np.sqrt(0.5)


def _haar_step(x: np.ndarray, axis: int) -> np.ndarray:
    even = np.take(x, np.arange(0, x.shape[axis], 2), axis=axis)
    odd = np.take(x, np.arange(1, x.shape[axis], 2), axis=axis)
    return np.concatenate(((even + odd) * _SQRT_HALF, (even - odd) * _SQRT_HALF), axis=axis)


def _haar_step_inverse(c: np.ndarray, axis: int) -> np.ndarray:
    half = c.shape[axis] // 2
    a = np.take(c, np.arange(half), axis=axis)
    d = np.take(c, np.arange(half, 2 * half), axis=axis)
    out = np.empty_like(c)
    even = [slice(None)] * c.ndim
    odd = [slice(None)] * c.ndim
    even[axis] = slice(0, None, 2)
    odd[axis] = slice(1, None, 2)
    out[tuple(even)] = (a + d) * _SQRT_HALF
    out[tuple(odd)] = (a - d) * _SQRT_HALF
    return out


def haar_2d(img, levels: int, direction: str = "forward") -> np.ndarray:
    """Orthonormal multi-level 2-D Haar transform.

    The forward transform repeatedly splits the current top-left approximation
    block into approximation and detail quadrants.  ``direction="inverse"``
    undoes it exactly.
    """
    img = as_matrix(img, "img")
    if levels < 1:
        raise ValueError(f"levels must be a positive integer, got {levels}")
    m, n = img.shape
    step = 2**levels
    if m % step or n % step:
        raise ValueError(f"image shape {img.shape} is not divisible by 2**{levels}")
    out = img.copy()
    if direction == "forward":
        for lev in range(levels):
            bm, bn = m >> lev, n >> lev
            block = _haar_step(_haar_step(out[:bm, :bn], 0), 1)
            out[:bm, :bn] = block
    elif direction == "inverse":
        for lev in reversed(range(levels)):
            bm, bn = m >> lev, n >> lev
            block = _haar_step_inverse(_haar_step_inverse(out[:bm, :bn], 1), 0)
            out[:bm, :bn] = block
    else:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return out


def uniform_blur_apply(img, kernel_size: int, adjoint: bool = False) -> np.ndarray:
    """Periodic convolution with a ``kernel_size x kernel_size`` box filter.

    The box is centred, so the operator is symmetric and ``adjoint=True``
    (correlation with the flipped kernel) gives the same result.
    """
    img = as_matrix(img, "img")
    k = int(kernel_size)
    if k < 1 or k % 2 == 0 or k > min(img.shape):
        raise ValueError(f"kernel_size must be odd and <= {min(img.shape)}, got {kernel_size}")
    sign = -1 if adjoint else 1
    half = k // 2
    acc = np.zeros_like(img)
    for s in range(-half, half + 1):
        acc += np.roll(img, sign * s, axis=0)
    out = np.zeros_like(img)
    for s in range(-half, half + 1):
        out += np.roll(acc, sign * s, axis=1)
    return out / (k * k)


def operator_norm_estimate(apply, adjoint, x0: np.ndarray, iters: int = 200) -> float:
    """Power iteration on ``adjoint(apply(.))``; returns an estimate of ``||op||_2``."""
    x = np.asarray(x0, dtype=np.float64)
    x = x / np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = adjoint(apply(x))
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return 0.0
        est = float(np.sqrt(nrm))
        x = y / nrm
    return est
