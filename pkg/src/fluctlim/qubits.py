"""Explicit 2^M-dimensional qubit operators, used as brute-force oracles.

Qubit basis order is (up, down) with ``sigma_3 = diag(1, -1)``; site 0 is the
most significant tensor factor.
"""
from functools import lru_cache

import numpy as np

SIGMA = {
    0: np.eye(2, dtype=complex),
    1: np.array([[0, 1], [1, 0]], dtype=complex),
    2: np.array([[0, -1j], [1j, 0]], dtype=complex),
    3: np.array([[1, 0], [0, -1]], dtype=complex),
}
RAISE = np.array([[0, 1], [0, 0]], dtype=complex)  # sigma_+ / 2

MAX_QUBITS = 10


def _check_m(M):
    if not 1 <= M <= MAX_QUBITS:
        raise ValueError(f"qubit oracles support 1 <= M <= {MAX_QUBITS}, got {M}")


def site_operator(A, i, M):
    _check_m(M)
    left = np.eye(2 ** i)
    right = np.eye(2 ** (M - i - 1))
    return np.kron(np.kron(left, A), right)


def collective(A, M):
    """``sum_i A^(i)``."""
    out = np.zeros((2 ** M, 2 ** M), dtype=complex)
    for i in range(M):
        out += site_operator(A, i, M)
    return out


def theta(lam):
    return np.diag([(1 + lam) / 2, (1 - lam) / 2]).astype(complex)


def product(rho1, M):
    out = np.ones((1, 1), dtype=complex)
    for _ in range(M):
        out = np.kron(out, rho1)
    return out


def permute_sites(rho, perm, M):
    """Apply the site permutation ``perm`` to both tensor legs of ``rho``."""
    t = rho.reshape((2,) * (2 * M))
    axes = list(perm) + [M + p for p in perm]
    return t.transpose(axes).reshape(2 ** M, 2 ** M)


def adjacent_swap(rho, i, M):
    perm = list(range(M))
    perm[i], perm[i + 1] = perm[i + 1], perm[i]
    return permute_sites(rho, perm, M)


@lru_cache(maxsize=None)
def collective_spin(M):
    """Collective ``L_+``, ``L_-``, ``L_3`` as read-only arrays."""
    plus = collective(RAISE, M)
    z = collective(SIGMA[3], M) / 2
    out = (plus, plus.conj().T.copy(), z)
    for arr in out:
        arr.setflags(write=False)
    return out
