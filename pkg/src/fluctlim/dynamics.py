"""Quadratic Hamiltonians, their block deformations and the induced dynamics.

A quadratic Hamiltonian is ``H = c0 a^2 + c1 a a+ + c2 a+ a + c3 a+^2`` with
``c3 = conj(c0)`` and real ``c1, c2``. Its deformation at block ``x`` replaces
every ladder operator by ``a_M(x) = beta(M, x, N) a``; the limit dynamics uses
``x H`` instead.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import fock
from .errors import TimeOutOfRange, TruncationDiverged
from .spin import beta, invariant_dim

GROWTH_STEP = 16
TAIL_WINDOW = 8
TAIL_TOL = 1e-10
D_LIMIT = 2048


@dataclass(frozen=True)
class QuadraticHamiltonian:
    c0: complex
    c1: float
    c2: float
    c3: complex

    def __post_init__(self):
        for name in ("c1", "c2"):
            value = complex(getattr(self, name))
            if value.imag != 0.0:
                raise ValueError(f"{name} must be real, got {value}")
            object.__setattr__(self, name, float(value.real))
        object.__setattr__(self, "c0", complex(self.c0))
        object.__setattr__(self, "c3", complex(self.c3))
        if abs(self.c3 - self.c0.conjugate()) > 1e-14:
            raise ValueError(f"c3={self.c3} must equal conj(c0)={self.c0.conjugate()}")

    @classmethod
    def from_sequence(cls, coeffs):
        c0, c1, c2, c3 = coeffs
        return cls(c0, c1, c2, c3)

    @property
    def coefficients(self):
        return (self.c0, self.c1, self.c2, self.c3)

    @property
    def cmax(self):
        return max(abs(c) for c in self.coefficients)

    def scaled(self, s):
        return QuadraticHamiltonian(s * self.c0, s * self.c1, s * self.c2, s * self.c3)


HARMONIC = QuadraticHamiltonian(0, 0, 1, 0)
SQUEEZING = QuadraticHamiltonian(0.5j, 0, 0, -0.5j)


def _assemble(c, D, b):
    # b(n) is the deformation factor applied to an index-n ladder step
    if D < 1:
        raise ValueError("dimension must be positive")
    n = np.arange(D, dtype=float)
    H = np.zeros((D, D), dtype=complex)
    H[n.astype(int), n.astype(int)] = c.c1 * b(n) ** 2 * (n + 1) + c.c2 * b(n - 1) ** 2 * n
    if D > 2:
        m = n[2:]
        up = b(m - 1) * b(m - 2) * np.sqrt(m * (m - 1))
        idx = np.arange(2, D)
        H[idx - 2, idx] += c.c0 * up
        H[idx, idx - 2] += c.c3 * up
    return H


def limit_hamiltonian(c, D):
    """Compression of ``H`` to the first D Hermite functions.

    Matrix elements are the exact ones (``a a+`` is ``diag(n + 1)``), so the
    result is Hermitian and equals ``E H E`` for the projection E.
    """
    if D < 3:
        raise ValueError("limit_hamiltonian needs D >= 3")
    return _assemble(c, D, lambda n: np.ones_like(n))


def scaled_limit_hamiltonian(c, x, D):
    """``x H`` compressed to dimension D (the M = infinity block Hamiltonian)."""
    return _assemble(c, D, lambda n: np.full_like(n, np.sqrt(x)))


def block_hamiltonian(c, M, x, D):
    """Deformed Hamiltonian ``H_M(x)`` on the first D Hermite functions."""
    return _assemble(c, D, lambda n: beta(M, x, n))


def t0_threshold(c):
    if c.cmax == 0:
        raise ValueError("t0 is undefined for the zero Hamiltonian")
    return 1.0 / (32.0 * c.cmax)


def check_time(c, t):
    """Warn beyond t0, refuse beyond 4 t0."""
    t0 = t0_threshold(c)
    if abs(t) > 4 * t0:
        raise TimeOutOfRange(f"|t|={abs(t)} exceeds 4*t0={4 * t0}")
    if abs(t) > t0:
        warnings.warn(f"|t|={abs(t)} exceeds t0={t0}; convergence is not guaranteed", stacklevel=3)


def evolve_block(block, c, M, x, t):
    rho = fock.check_density(block)
    if t == 0:
        return rho.copy()
    U = fock.hermitian_evolve(block_hamiltonian(c, M, x, rho.shape[0]), t)
    return U @ rho @ U.conj().T


def evolve_adaptive(rho, hamiltonian, t, *, exact_dim=None, step=GROWTH_STEP,
                    window=TAIL_WINDOW, tail_tol=TAIL_TOL, d_limit=D_LIMIT):
    """Evolve ``rho`` under ``hamiltonian(D)`` on a growing truncation.

    ``D`` starts at ``rho.dim + step`` and grows by ``step`` until the evolved
    population on the top ``window`` levels is below ``tail_tol``. If
    ``exact_dim`` is given the Hamiltonian leaves the first ``exact_dim``
    levels invariant and that truncation is used as soon as it is reached.
    """
    s = rho.shape[0]
    if t == 0:
        return rho.copy()
    D = s + step
    if exact_dim is not None:
        D = max(s, min(D, exact_dim))
    while True:
        U = fock.hermitian_evolve(hamiltonian(D), t)
        r = fock.pad(rho, D)
        out = U @ r @ U.conj().T
        if exact_dim is not None and D >= exact_dim:
            return out
        if fock.tail_mass(out, D - window) < tail_tol:
            return out
        D += step
        if exact_dim is not None:
            D = min(D, max(exact_dim, s))
        if D > d_limit:
            raise TruncationDiverged(f"no stable truncation up to D={d_limit}")


def limit_evolution(rho_inf, lam, c, t, **kw):
    """``exp(-i t lam H) rho exp(+i t lam H)`` on an adaptive truncation."""
    rho = fock.check_density(rho_inf)
    if t == 0:
        return rho.copy()
    check_time(c, t)
    return evolve_adaptive(rho, lambda D: scaled_limit_hamiltonian(c, lam, D), t, **kw)


def finite_block_evolution(rho_block, c, M, x, t, **kw):
    """Evolve a (possibly compactly stored) block under ``H_M(x)``.

    Exact once the truncation covers the invariant span of ``a_M(x)``.
    """
    if t == 0:
        return np.asarray(rho_block, dtype=complex).copy()
    return evolve_adaptive(np.asarray(rho_block, dtype=complex),
                           lambda D: block_hamiltonian(c, M, x, D), t,
                           exact_dim=invariant_dim(M, x), **kw)


def flow_generator(c, lam=1.0):
    """Matrix G with ``d/dt (Q, P) = G (Q, P)`` in the Heisenberg picture."""
    s = c.c1 + c.c2
    r = c.c0.real
    m = c.c0.imag
    return lam * np.array([[-2 * m, s - 2 * r], [-(2 * r + s), 2 * m]])


def classical_flow(c, lam, t):
    return scipy.linalg.expm(t * flow_generator(c, lam))


def quadrature_moments(rho):
    """Means and symmetrized covariance of (Q, P) in a truncated state."""
    rho = np.asarray(rho)
    ops = fock.canonical_operators(rho.shape[0] + 2)
    r = fock.pad(rho, rho.shape[0] + 2)
    Q, P = ops.position, ops.momentum
    mean = np.array([np.trace(r @ Q).real, np.trace(r @ P).real])
    qq = np.trace(r @ Q @ Q).real
    pp = np.trace(r @ P @ P).real
    qp = 0.5 * np.trace(r @ (Q @ P + P @ Q)).real
    cov = np.array([[qq, qp], [qp, pp]]) - np.outer(mean, mean)
    return mean, cov


def transport_moments(F, mean, cov):
    return F @ mean, F @ cov @ F.T
