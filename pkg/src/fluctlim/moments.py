"""Observables and their expectation values on both sides of the limit.

Two observable alphabets are supported and never mixed:

* ladder words ``a^R`` with letters ``+1`` (creator, ``ad``) and ``-1``
  (annihilator, ``a``), multiplied left to right;
* polynomials in ``q`` and ``p`` with complex coefficients.

No normal ordering is ever applied.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fock, qubits
from .dynamics import check_time, finite_block_evolution, limit_evolution
from .spin import deformed_ladder, limit_ladder

_LADDER_TOKENS = {"a": -1, "ad": +1, "a+": +1, "adag": +1}
_QP_TOKENS = {"q", "p"}


@dataclass(frozen=True)
class OperatorWord:
    letters: tuple

    def __post_init__(self):
        letters = tuple(int(r) for r in self.letters)
        if any(r not in (-1, 1) for r in letters):
            raise ValueError("ladder letters must be +1 or -1")
        object.__setattr__(self, "letters", letters)

    @classmethod
    def parse(cls, text):
        try:
            return cls(tuple(_LADDER_TOKENS[tok] for tok in text.split()))
        except KeyError as exc:
            raise ValueError(f"unknown ladder letter {exc.args[0]!r} in {text!r}") from None

    @property
    def degree(self):
        return len(self.letters)

    @property
    def weight(self):
        return sum(self.letters)

    def __str__(self):
        return " ".join("ad" if r > 0 else "a" for r in self.letters) or "1"


@dataclass(frozen=True)
class LadderPolynomial:
    """Linear combination of ladder words."""

    terms: tuple  # ((coef, OperatorWord), ...)

    @property
    def degree(self):
        return max((w.degree for _, w in self.terms), default=0)

    def __str__(self):
        return " + ".join(f"{_fmt(c)}*{w}" for c, w in self.terms)


@dataclass(frozen=True)
class CanonicalPolynomial:
    terms: tuple  # ((coef, ("q", "p", ...)), ...)

    def __post_init__(self):
        terms = tuple((complex(c), tuple(w)) for c, w in self.terms)
        for _, w in terms:
            if any(s not in _QP_TOKENS for s in w):
                raise ValueError(f"polynomial words use only q and p, got {w}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def parse(cls, text, coef=1.0):
        return cls(((coef, tuple(text.split())),))

    @property
    def degree(self):
        return max((len(w) for _, w in self.terms), default=0)

    def adjoint(self):
        return CanonicalPolynomial(tuple((np.conj(c), w[::-1]) for c, w in self.terms))

    def __str__(self):
        return " + ".join(f"{_fmt(c)}*{' '.join(w) or '1'}" for c, w in self.terms)


def _fmt(c):
    c = complex(c)
    if c.imag == 0:
        return f"{c.real:g}"
    return f"({c.real:g}{c.imag:+g}j)"


def parse_observable(terms):
    """Observable from a CLI term list or a bare word string.

    Terms are ``{"coef": [re, im], "word": "ad a"}`` mappings (``coef``
    defaults to 1). Words over ``a``/``ad`` give ladder observables, words
    over ``q``/``p`` give a :class:`CanonicalPolynomial`.
    """
    if isinstance(terms, str):
        terms = [{"word": terms}]
    parsed = []
    for term in terms:
        re_im = term.get("coef", [1.0, 0.0])
        coef = complex(re_im[0], re_im[1])
        parsed.append((coef, term["word"].split()))
    letters = {tok for _, toks in parsed for tok in toks}
    if letters and letters <= _QP_TOKENS:
        return CanonicalPolynomial(tuple((c, tuple(t)) for c, t in parsed))
    if letters & _QP_TOKENS:
        raise ValueError("observable mixes q/p with ladder letters")
    words = [(c, OperatorWord.parse(" ".join(t))) for c, t in parsed]
    if len(words) == 1 and words[0][0] == 1:
        return words[0][1]
    return LadderPolynomial(tuple(words))


def word_matrix(word, ann, cre):
    D = ann.shape[0]
    out = np.eye(D, dtype=complex)
    for r in word.letters:
        out = out @ (cre if r > 0 else ann)
    return out


def polynomial_matrix(poly, Qop, Pop):
    D = Qop.shape[0]
    out = np.zeros((D, D), dtype=complex)
    for coef, w in poly.terms:
        term = np.eye(D, dtype=complex)
        for s in w:
            term = term @ (Qop if s == "q" else Pop)
        out += coef * term
    return out


def observable_matrix(obs, ann, cre):
    """Matrix of any observable given the two ladder matrices it is built from."""
    if isinstance(obs, OperatorWord):
        return word_matrix(obs, ann, cre)
    if isinstance(obs, LadderPolynomial):
        return sum(c * word_matrix(w, ann, cre) for c, w in obs.terms)
    if isinstance(obs, CanonicalPolynomial):
        Q = (ann + cre) / np.sqrt(2.0)
        P = (ann - cre) / (1j * np.sqrt(2.0))
        return polynomial_matrix(obs, Q, P)
    raise TypeError(f"unsupported observable {type(obs).__name__}")


def _trace_product(rho, O):
    return complex(np.einsum("ij,ji->", rho, O))


def _need_hamiltonian(c, t):
    if t is not None and t != 0 and c is None:
        raise ValueError("a time was given without a Hamiltonian")
    return t is not None and t != 0


def expectation_finite(state, obs, c=None, t=None):
    """``sum_j w_j Tr(rho_j(t) O_M(x_j))`` over the state's blocks.

    ``O_M(x)`` is ``obs`` built from the deformed ladder pair at ``x = 2j/M``;
    blocks are summed in ascending ``2j``.
    """
    evolve = _need_hamiltonian(c, t)
    if evolve:
        check_time(c, t)
    deg = obs.degree
    total = 0j
    for b in state.blocks:
        rho = b.rho
        if evolve:
            rho = finite_block_evolution(rho, c, state.M, b.x, t)
        D = rho.shape[0] + deg
        lad = deformed_ladder(state.M, b.x, D)
        O = observable_matrix(obs, lad.annihilator, lad.creator)
        total += b.weight * _trace_product(fock.pad(rho, D), O)
    return total


def expectation_limit(rho_inf, lam, obs, c=None, t=None):
    """``Tr(rho_t O(sqrt(lam) a, sqrt(lam) a+))`` with ``rho_t`` the limit evolution."""
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda must lie in (0, 1], got {lam}")
    rho = fock.check_density(rho_inf)
    if _need_hamiltonian(c, t):
        rho = limit_evolution(rho, lam, c, t)
    D = rho.shape[0] + obs.degree
    lad = limit_ladder(lam, D)
    O = observable_matrix(obs, lad.annihilator, lad.creator)
    return _trace_product(fock.pad(rho, D), O)


def commutator_residual(state, lam):
    """``Tr(rho_M [Q_M, P_M]) - i lam``, using ``[Q_M, P_M] = 2i L_3 / M``."""
    total = 0.0
    for b in state.blocks:
        l3 = b.two_j / 2 - np.arange(b.capped_dim)
        total += b.weight * float(np.dot(np.real(np.diagonal(b.rho)), l3))
    return 1j * (2.0 * total / state.M - lam)


def fluctuation_operator_full(A, lam, M):
    """``(1/sqrt(M)) sum_i (A^(i) - Tr(A theta) 1)`` on 2^M dimensions."""
    A = np.asarray(A, dtype=complex)
    mean = np.trace(A @ qubits.theta(lam))
    return (qubits.collective(A, M) - M * mean * np.eye(2 ** M)) / np.sqrt(M)


def full_fluctuation_ladder(lam, M):
    """Qubit-level ``(a_M, a_M+)`` assembled from the fluctuation quadratures."""
    Q = fluctuation_operator_full(qubits.SIGMA[1] / np.sqrt(2), lam, M)
    P = fluctuation_operator_full(qubits.SIGMA[2] / np.sqrt(2), lam, M)
    a = (Q + 1j * P) / np.sqrt(2)
    return a, a.conj().T


def tensor_observable(obs, lam, M):
    """``O(a_M, a_M+)`` as a 2^M-dimensional matrix."""
    a, ad = full_fluctuation_ladder(lam, M)
    return observable_matrix(obs, a, ad)


def tensor_expectation(rho_full, obs, lam, M):
    """``Tr(rho O(a_M, a_M+))`` computed on the full 2^M-dimensional space."""
    return _trace_product(np.asarray(rho_full, dtype=complex), tensor_observable(obs, lam, M))
