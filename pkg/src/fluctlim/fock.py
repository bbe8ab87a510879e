"""Dense operators on the first D Hermite functions.

Every operator in the package is a complex ``(D, D)`` numpy array whose row
and column ``n`` refer to the Hermite function psi_n. Products of truncated
ladder matrices are truncated as well, so identities such as ``[a, a+] = 1``
only hold away from the last row/column.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import NotDensity, NotHermitian
from .tolerances import EIG, TIGHT


class CanonicalOperators(NamedTuple):
    annihilator: np.ndarray
    creator: np.ndarray
    number: np.ndarray
    position: np.ndarray
    momentum: np.ndarray


def _check_dim(D):
    if int(D) != D or D < 1:
        raise ValueError(f"dimension must be a positive integer, got {D!r}")
    return int(D)


def annihilator(D):
    D = _check_dim(D)
    return np.diag(np.sqrt(np.arange(1, D, dtype=float)), 1).astype(complex)


def number(D):
    D = _check_dim(D)
    return np.diag(np.arange(D, dtype=float)).astype(complex)


def canonical_operators(D):
    """Ladder, number and quadrature matrices truncated to dimension D.

    ``number`` is the diagonal matrix ``diag(0, ..., D-1)``, not the truncated
    product ``creator @ annihilator``; the two agree everywhere here, but the
    diagonal form is what the rest of the package relies on.
    """
    a = annihilator(D)
    ad = a.conj().T
    q = (a + ad) / np.sqrt(2.0)
    p = (a - ad) / (1j * np.sqrt(2.0))
    return CanonicalOperators(a, ad, number(D), q, p)


def hermitian_evolve(H, t):
    """``exp(-i t H)`` for Hermitian H via ``numpy.linalg.eigh``."""
    H = np.asarray(H, dtype=complex)
    check_hermitian(H, EIG)
    if t == 0:
        return np.eye(H.shape[0], dtype=complex)
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    return (V * np.exp(-1j * t * w)) @ V.conj().T


def weyl_operator(D, x1, x2):
    """Truncated Weyl operator ``exp(i (x2 Q - x1 P))``.

    The generator is truncated first and then exponentiated, so the result is
    unitary on the truncation; what is lost is agreement with the true Weyl
    operator near the top rows. Use :func:`unitarity_defect` on a product with
    a padded state to monitor that.
    """
    ops = canonical_operators(D)
    G = x2 * ops.position - x1 * ops.momentum
    return hermitian_evolve(G, -1.0)


def unitarity_defect(U):
    U = np.asarray(U)
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def trace_norm(A):
    return float(np.sum(np.linalg.svd(np.asarray(A), compute_uv=False)))


def hermitian_defect(A):
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(A - A.conj().T)))


def check_square(A):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    return A


def check_hermitian(A, tol=TIGHT):
    A = check_square(A)
    defect = hermitian_defect(A)
    if defect > tol:
        raise NotHermitian(f"matrix is not Hermitian (max asymmetry {defect:.3e} > {tol:.0e})")
    return A


def check_density(rho, trace_tol=EIG, psd_tol=EIG):
    """Validate a density matrix and return it as a complex array."""
    rho = check_hermitian(np.asarray(rho, dtype=complex), TIGHT)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise NotDensity(f"trace {tr!r} differs from 1 by more than {trace_tol:.0e}")
    lo = np.linalg.eigvalsh(rho).min()
    if lo < -psd_tol:
        raise NotDensity(f"minimum eigenvalue {lo:.3e} below -{psd_tol:.0e}")
    return rho


def pad(A, D):
    """Zero-pad (never crop) a square matrix to dimension D."""
    A = np.asarray(A)
    n = A.shape[0]
    if D < n:
        raise ValueError(f"cannot pad a {n}x{n} matrix down to {D}")
    if D == n:
        return A
    out = np.zeros((D, D), dtype=np.result_type(A, complex))
    out[:n, :n] = A
    return out


def tail_mass(rho, start):
    """Population of a density matrix on indices ``>= start``."""
    d = np.real(np.diagonal(rho))
    return float(np.sum(d[max(start, 0):]))


def basis_state(n, D):
    v = np.zeros(D, dtype=complex)
    v[n] = 1.0
    return v


def projector(n, D, m=None):
    """``|psi_n><psi_m|`` (m defaults to n) as a D x D matrix."""
    m = n if m is None else m
    out = np.zeros((D, D), dtype=complex)
    out[n, m] = 1.0
    return out
