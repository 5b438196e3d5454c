"""Hermitian Toeplitz parameterizations and least-squares structure projections.

Both the one-level form (plain Toeplitz, parameterized by its first column)
and the two-level form (block Toeplitz with Toeplitz blocks, parameterized by
a 2-D difference table) appear as diagonal blocks of the structured PSD
programs solved in :mod:`hrisloc.sdp`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

__all__ = [
    "ToeplitzGenerator",
    "TwoLevelToeplitzGenerator",
    "toeplitz_from_generator",
    "project_toeplitz",
    "project_toeplitz2",
]


@dataclass(frozen=True)
class ToeplitzGenerator:
    """First column of a Hermitian Toeplitz matrix; ``first_col[0]`` is real."""

    first_col: np.ndarray

    def __post_init__(self) -> None:
        col = np.asarray(self.first_col, dtype=complex)
        if col.ndim != 1 or col.size < 1:
            raise ValueError("first_col must be a nonempty vector")
        col = col.copy()
        col[0] = col[0].real
        object.__setattr__(self, "first_col", col)

    @property
    def dim(self) -> int:
        return self.first_col.size

    def matrix(self) -> np.ndarray:
        return toeplitz_from_generator(self)


def toeplitz_from_generator(gen: ToeplitzGenerator) -> np.ndarray:
    """Hermitian Toeplitz matrix ``T[i, j] = u[i - j]`` from its first column."""
    u = gen.first_col
    return scipy.linalg.toeplitz(u, u.conj())


def project_toeplitz(matrix: np.ndarray) -> ToeplitzGenerator:
    """Least-squares Hermitian Toeplitz approximation via diagonal averaging."""
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("input must be square")
    n = a.shape[0]
    cls, counts, n_classes = _two_level_index((n, 1))
    idx = cls.ravel()
    flat = a.ravel()
    sums = np.bincount(idx, weights=flat.real, minlength=n_classes) + 1j * np.bincount(
        idx, weights=flat.imag, minlength=n_classes
    )
    means = sums / counts
    # means[k + n - 1] holds the mean of diagonal offset (i - j) = k
    col = 0.5 * (means[n - 1 :] + means[: n][::-1].conj())
    return ToeplitzGenerator(first_col=col)


@lru_cache(maxsize=16)
def _two_level_index(levels: tuple[int, int]) -> tuple[np.ndarray, np.ndarray, int]:
    """Difference-class index of each entry of a two-level Toeplitz matrix.

    Elements live on a ``(p, q)`` grid vectorized inner-x / outer-z; entry
    ``(u, u')`` belongs to class ``(m - m', n - n')``.
    """
    p, q = levels
    mm = np.tile(np.arange(p), q)
    nn = np.repeat(np.arange(q), p)
    dm = mm[:, None] - mm[None, :]
    dn = nn[:, None] - nn[None, :]
    width = 2 * p - 1
    cls = (dm + p - 1) + (dn + q - 1) * width
    counts = np.bincount(cls.ravel(), minlength=width * (2 * q - 1))
    return cls, counts, width * (2 * q - 1)


@dataclass(frozen=True)
class TwoLevelToeplitzGenerator:
    """Difference table of a Hermitian two-level Toeplitz matrix.

    ``table[dm + p - 1, dn + q - 1]`` is the common value of all entries whose
    grid indices differ by ``(dm, dn)``; Hermitian symmetry means
    ``table[-dm, -dn] = conj(table[dm, dn])`` and a real center.
    """

    table: np.ndarray
    levels: tuple[int, int]

    def __post_init__(self) -> None:
        p, q = self.levels
        table = np.asarray(self.table, dtype=complex)
        if table.shape != (2 * p - 1, 2 * q - 1):
            raise ValueError("table shape must be (2p - 1, 2q - 1)")
        table = table.copy()
        table[p - 1, q - 1] = table[p - 1, q - 1].real
        object.__setattr__(self, "table", table)

    @property
    def dim(self) -> int:
        return self.levels[0] * self.levels[1]

    def matrix(self) -> np.ndarray:
        cls, _, _ = _two_level_index(self.levels)
        return self.table.ravel(order="F")[cls]


def project_toeplitz2(matrix: np.ndarray, levels: tuple[int, int]) -> TwoLevelToeplitzGenerator:
    """Least-squares two-level Toeplitz approximation by difference-class averaging."""
    p, q = levels
    a = np.asarray(matrix, dtype=complex)
    if a.shape != (p * q, p * q):
        raise ValueError("matrix size must match the level grid")
    cls, counts, n_classes = _two_level_index(levels)
    flat = a.ravel()
    idx = cls.ravel()
    sums = np.bincount(idx, weights=flat.real, minlength=n_classes) + 1j * np.bincount(
        idx, weights=flat.imag, minlength=n_classes
    )
    means = sums / counts
    table = means.reshape(2 * p - 1, 2 * q - 1, order="F")
    table = 0.5 * (table + table[::-1, ::-1].conj())
    return TwoLevelToeplitzGenerator(table=table, levels=levels)
