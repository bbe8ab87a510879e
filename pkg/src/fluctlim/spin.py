"""Spin-j ladder matrices and their deformed-boson picture.

The spin-j basis vector with ``L3 = j - n`` is identified with the Hermite
function psi_n, so the fully polarized vector is the vacuum and the spin
raising operator acts as an annihilator. With ``x = 2j/M``::

    L_plus / sqrt(M) == beta(M, x, N) a      (on indices 0..2j)

where ``beta(M, x, n) = sqrt(x - n/M)`` clipped to zero below the origin.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class BlockIndex:
    """Spin block ``j = two_j / 2`` of an M-qubit ensemble."""

    two_j: int
    M: int

    def __post_init__(self):
        if self.M < 1:
            raise ValueError(f"M must be positive, got {self.M}")
        if not 0 <= self.two_j <= self.M:
            raise ValueError(f"two_j={self.two_j} outside [0, M={self.M}]")
        if (self.M - self.two_j) % 2:
            raise ValueError(f"two_j={self.two_j} and M={self.M} differ in parity")

    @property
    def x(self):
        return self.two_j / self.M

    @property
    def j(self):
        return self.two_j / 2

    @property
    def dim(self):
        return self.two_j + 1


def beta(M, x, n):
    """Deformation factor ``sqrt(x - n/M)`` on ``[0, 1]``, zero elsewhere.

    Negative ``n`` also gives zero; those values only ever multiply vanishing
    ladder matrix elements. Accepts scalar or array ``n``.
    """
    n_arr = np.asarray(n)
    arg = x - n_arr / M
    ok = (n_arr >= 0) & (arg >= 0.0) & (arg <= 1.0)
    out = np.where(ok, np.sqrt(np.where(ok, arg, 0.0)), 0.0)
    if out.ndim == 0:
        return float(out)
    return out


class SpinLadder(NamedTuple):
    plus: np.ndarray
    minus: np.ndarray
    z: np.ndarray


def spin_ladder(two_j):
    """``L_+``, ``L_-``, ``L_3`` for spin ``two_j/2`` in the psi_n ordering."""
    if two_j < 0:
        raise ValueError("two_j must be non-negative")
    n = np.arange(1, two_j + 1, dtype=float)
    plus = np.diag(np.sqrt(n * (two_j - n + 1)), 1).astype(complex)
    z = np.diag(two_j / 2 - np.arange(two_j + 1, dtype=float)).astype(complex)
    return SpinLadder(plus, plus.conj().T, z)


class DeformedLadder(NamedTuple):
    annihilator: np.ndarray
    creator: np.ndarray


def deformed_ladder(M, x, D):
    n = np.arange(1, D, dtype=float)
    a = np.diag(beta(M, x, n - 1) * np.sqrt(n), 1).astype(complex)
    return DeformedLadder(a, a.conj().T)


def limit_ladder(x, D):
    """The M -> infinity counterpart ``sqrt(x) a``."""
    n = np.arange(1, D, dtype=float)
    a = np.diag(np.sqrt(x) * np.sqrt(n), 1).astype(complex)
    return DeformedLadder(a, a.conj().T)


def invariant_dim(M, x):
    """Dimension of the span psi_0..psi_K left invariant by ``a_M(x)``.

    ``K`` is the first index with ``beta(M, x, K) == 0``.
    """
    k = int(np.floor(M * x))
    while beta(M, x, k) > 0.0:
        k += 1
    while k > 0 and beta(M, x, k - 1) == 0.0:
        k -= 1
    return k + 1
