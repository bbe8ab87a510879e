"""Permutation-invariant ensemble states and limit-state diagnostics.

A permutation-invariant M-qubit state is stored through its block
decomposition: a weight ``w_j`` and a density matrix ``rho_j`` per spin block,
with ``rho_j`` written in the Hermite-indexed basis of :mod:`fluctlim.spin`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import fock, qubits
from .errors import (LeakageError, NotDensity, NotPermutationInvariant,
                     PaddingDiverged, ProjectionAnnihilates)
from .spin import BlockIndex
from .tolerances import EIG, TIGHT, default_dmax

LEAK_WINDOW = 8
LEAK_TOL = 1e-10


@dataclass(frozen=True)
class ReferenceState:
    """One-qubit reference state ``diag((1 + lam)/2, (1 - lam)/2)``."""

    lam: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")

    @property
    def matrix(self):
        return qubits.theta(self.lam)


@dataclass(frozen=True)
class Block:
    index: BlockIndex
    weight: float
    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "weight", float(self.weight))

    @property
    def two_j(self):
        return self.index.two_j

    @property
    def x(self):
        return self.index.x

    @property
    def capped_dim(self):
        return self.rho.shape[0]


@dataclass(frozen=True)
class PermInvariantState:
    M: int
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if not blocks:
            raise ValueError("a state needs at least one block")
        total = 0.0
        seen = []
        for b in blocks:
            if b.index.M != self.M:
                raise ValueError("block index belongs to a different M")
            if b.weight < 0:
                raise ValueError(f"negative weight {b.weight}")
            if b.capped_dim > b.two_j + 1:
                raise ValueError(f"block of dim {b.capped_dim} exceeds 2j+1={b.two_j + 1}")
            fock.check_density(b.rho, EIG, EIG)
            total += b.weight
            seen.append(b.two_j)
        if seen != sorted(set(seen)):
            raise ValueError("blocks must be sorted by two_j without duplicates")
        if abs(total - 1.0) > TIGHT:
            raise ValueError(f"weights sum to {total!r}, not 1")

    @property
    def weights(self):
        return {b.two_j: b.weight for b in self.blocks}


@dataclass(frozen=True)
class DiscreteMeasure:
    atoms: tuple  # ((x, mass), ...) sorted by x

    def __post_init__(self):
        atoms = tuple(sorted((float(x), float(m)) for x, m in self.atoms))
        object.__setattr__(self, "atoms", atoms)
        if any(m < 0 for _, m in atoms):
            raise ValueError("masses must be non-negative")
        if abs(sum(m for _, m in atoms) - 1.0) > TIGHT:
            raise ValueError("masses must sum to 1")

    def integrate(self, f):
        return sum(m * f(x) for x, m in self.atoms)


def measure_of(state):
    return DiscreteMeasure(tuple((b.x, b.weight) for b in state.blocks))


@dataclass(frozen=True)
class IntegralRepresentation:
    xs: np.ndarray       # ascending grid points 2j/M
    blocks: np.ndarray   # (len(xs), D, D), zero-padded to a common D
    rule: str = "piecewise-linear"


def integral_representation(state):
    D = max(b.capped_dim for b in state.blocks)
    xs = np.array([b.x for b in state.blocks])
    stack = np.stack([fock.pad(b.rho, D) for b in state.blocks])
    return IntegralRepresentation(xs, stack)


def interpolate_block(rep, x):
    """Entrywise linear interpolation between grid blocks, constant outside."""
    xs = rep.xs
    if len(xs) == 0:
        raise ValueError("empty representation")
    hit = np.nonzero(xs == x)[0]
    if hit.size:
        return rep.blocks[hit[0]].copy()
    if x <= xs[0]:
        return rep.blocks[0].copy()
    if x >= xs[-1]:
        return rep.blocks[-1].copy()
    k = int(np.searchsorted(xs, x)) - 1
    s = (x - xs[k]) / (xs[k + 1] - xs[k])
    out = (1 - s) * rep.blocks[k] + s * rep.blocks[k + 1]
    return out / np.trace(out).real


def nearest_two_j(lam, M):
    """Parity-admissible ``2j`` closest to ``lam * M`` (ties go down)."""
    target = lam * M
    k_real = (M - target) / 2
    best = None
    for k in {math.floor(k_real), math.ceil(k_real)}:
        k = min(max(k, 0), M // 2)
        two_j = M - 2 * k
        key = (abs(two_j - target), two_j)
        if best is None or key < best:
            best = key
    return best[1]


def single_block_sequence(rho_inf, lam, M, d_max=None):
    """Ensemble state living in the single block with ``2j/M`` nearest ``lam``.

    The block is ``E rho_inf E`` renormalized, with E projecting onto the first
    ``2j + 1`` Hermite functions (and at most ``d_max`` of them).
    """
    rho = fock.check_density(rho_inf)
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda must lie in (0, 1], got {lam}")
    d_max = default_dmax() if d_max is None else d_max
    two_j = nearest_two_j(lam, M)
    dim = min(two_j + 1, rho.shape[0])
    if dim > d_max:
        leak = fock.tail_mass(rho, d_max - LEAK_WINDOW)
        if leak > LEAK_TOL:
            raise LeakageError(f"state mass {leak:.2e} beyond the D_max={d_max} cap")
        dim = d_max
    block = rho[:dim, :dim]
    tr = np.trace(block).real
    if tr < TIGHT:
        raise ProjectionAnnihilates(
            f"projection onto {two_j + 1} levels removes the state (M={M}, 2j={two_j})")
    return PermInvariantState(M, (Block(BlockIndex(two_j, M), 1.0, block / tr),))


def product_state_weights(lam, M):
    """Block weights of ``theta^{(x)M}`` by adding one qubit at a time.

    Inside every block the product state is ``diag(r_n)`` with
    ``r_n ~ (q/p)^n``; coupling a qubit to spin j sends the fraction
    ``sum_n r_n [p (j+m+1) + q (j-m+1)] / (2j+1)`` (``m = j - n``) of the
    block's weight to ``j + 1/2`` and the rest to ``j - 1/2``.
    """
    if not 1 <= M <= 64:
        raise ValueError("product_state_weights supports 1 <= M <= 64")
    p, q = (1 + lam) / 2, (1 - lam) / 2
    weights = {1: 1.0}
    for _ in range(M - 1):
        nxt = {}
        for two_j, w in weights.items():
            r = _block_profile(lam, two_j)
            m = two_j / 2 - np.arange(two_j + 1)
            j = two_j / 2
            up = float(np.sum(r * (p * (j + m + 1) + q * (j - m + 1))) / (two_j + 1))
            nxt[two_j + 1] = nxt.get(two_j + 1, 0.0) + w * up
            if two_j > 0:
                nxt[two_j - 1] = nxt.get(two_j - 1, 0.0) + w * (1.0 - up)
        weights = nxt
    return [(k, weights[k]) for k in sorted(weights) if weights[k] != 0.0]


def _block_profile(lam, two_j):
    p, q = (1 + lam) / 2, (1 - lam) / 2
    r = (q / p) ** np.arange(two_j + 1)
    return r / r.sum()


def product_state(lam, M):
    """Block decomposition of ``theta^{(x)M}``."""
    blocks = tuple(
        Block(BlockIndex(k, M), w, np.diag(_block_profile(lam, k)).astype(complex))
        for k, w in product_state_weights(lam, M)
    )
    return PermInvariantState(M, blocks)


@lru_cache(maxsize=None)
def schur_basis(M):
    """Orthonormal vectors ``e[:, k, n]`` for spin block ``two_j``.

    ``n`` counts lowering steps from the highest weight, ``k`` labels the
    multiplicity. Built from the kernel of the collective ``L_+`` on each
    ``L_3 = j`` sector. Returns ``{two_j: array(2^M, d_j, 2j+1)}``.
    """
    plus, minus, _ = qubits.collective_spin(M)
    downs = np.array([bin(i).count("1") for i in range(2 ** M)])
    out = {}
    for two_j in range(M % 2, M + 1, 2):
        cols = np.nonzero(downs == (M - two_j) // 2)[0]
        hw = scipy.linalg.null_space(plus[:, cols].real)
        h = np.zeros((2 ** M, hw.shape[1]))
        h[cols] = hw
        E = np.zeros((2 ** M, hw.shape[1], two_j + 1))
        v = h
        for n in range(two_j + 1):
            E[:, :, n] = v / np.linalg.norm(v, axis=0)
            v = minus.real @ E[:, :, n]
        E.setflags(write=False)
        out[two_j] = E
    return out


def is_permutation_invariant(rho_full, M, tol=EIG):
    return all(np.max(np.abs(qubits.adjacent_swap(rho_full, i, M) - rho_full)) <= tol
               for i in range(M - 1))


def brute_force_decompose(rho_full, M):
    """Block weights and states of an explicit permutation-invariant state."""
    rho = np.asarray(rho_full, dtype=complex)
    if rho.shape != (2 ** M, 2 ** M):
        raise ValueError(f"expected a {2 ** M}x{2 ** M} matrix")
    if not is_permutation_invariant(rho, M):
        raise NotPermutationInvariant("state changes under an adjacent site swap")
    blocks = []
    for two_j, E in schur_basis(M).items():
        T = (rho @ E.reshape(E.shape[0], -1)).reshape(E.shape)
        B = np.einsum("akn,akm->nm", E, T)
        w = np.trace(B).real
        if w > 1e-14:
            blocks.append(Block(BlockIndex(two_j, M), w, B / w))
    total = sum(b.weight for b in blocks)
    blocks = [Block(b.index, b.weight / total, b.rho) for b in blocks]
    return PermInvariantState(M, tuple(blocks))


def symmetrize(rho_full, M):
    """Exact average over all M! site permutations (small M only)."""
    from itertools import permutations

    if M > 7:
        raise ValueError("symmetrize is limited to M <= 7")
    acc = np.zeros_like(rho_full, dtype=complex)
    count = 0
    for perm in permutations(range(M)):
        acc += qubits.permute_sites(rho_full, perm, M)
        count += 1
    return acc / count


def random_symmetric_state(M, lam, rng):
    """Random permutation-invariant M-qubit density matrix.

    Half of the weight is a random mixture of product states ``sigma^{(x)M}``,
    the other half is ``X theta^{(x)M} X+`` for a random polynomial X in the
    collective spins. Both pieces commute with site permutations.
    """
    K = 3
    mix = np.zeros((2 ** M, 2 ** M), dtype=complex)
    p = rng.dirichlet(np.ones(K))
    for k in range(K):
        g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        s = g @ g.conj().T
        mix += p[k] * qubits.product(s / np.trace(s), M)
    plus, minus, z = qubits.collective_spin(M)
    gens = [np.eye(2 ** M), plus, minus, z, plus @ minus, minus @ minus, plus @ z]
    coef = rng.normal(size=len(gens)) + 1j * rng.normal(size=len(gens))
    X = sum(c * g for c, g in zip(coef, gens))
    dressed = X @ qubits.product(qubits.theta(lam), M) @ X.conj().T
    rho = 0.5 * mix + 0.5 * dressed / np.trace(dressed)
    return 0.5 * (rho + rho.conj().T)


# -- limit-state diagnostics -------------------------------------------------

def schwartz_seminorm(rho, alpha, alpha_p, beta, beta_p):
    """``|| P^alpha Q^beta rho Q^beta_p P^alpha_p ||_1``, exact for finite rank."""
    rho = np.asarray(rho, dtype=complex)
    D = rho.shape[0] + alpha + alpha_p + beta + beta_p
    ops = fock.canonical_operators(D)
    mp = np.linalg.matrix_power
    left = mp(ops.momentum, alpha) @ mp(ops.position, beta)
    right = mp(ops.position, beta_p) @ mp(ops.momentum, alpha_p)
    return fock.trace_norm(left @ fock.pad(rho, D) @ right)


def decay_sup(rho, k):
    """``max_{n,m} |rho_nm| (n + m)^k`` with ``0^0 = 1``."""
    rho = np.asarray(rho)
    idx = np.arange(rho.shape[0], dtype=float)
    s = idx[:, None] + idx[None, :]
    return float(np.max(np.abs(rho) * s ** k))


def characteristic_function(rho, x1, x2, step=10, d_limit=512, tol=1e-8):
    """``Tr(rho W(x1, x2))`` with the truncation grown until it settles."""
    rho = np.asarray(rho, dtype=complex)
    D = rho.shape[0] + step
    value = np.trace(fock.pad(rho, D) @ fock.weyl_operator(D, x1, x2))
    while True:
        D += step
        if D > d_limit:
            raise PaddingDiverged(f"characteristic function unsettled at D={d_limit}")
        new = np.trace(fock.pad(rho, D) @ fock.weyl_operator(D, x1, x2))
        if abs(new - value) < tol:
            return complex(new)
        value = new


# -- named presets -------------------------------------------------------------

def parse_state(spec):
    """Density matrix from a preset string or a matrix-element list.

    ``"fock:n"``, ``"superposition:c0,c1,..."`` (Python complex literals),
    ``"coherent:re,im"``, ``"thermal:nbar:D"``, or ``[[n, m, re, im], ...]``;
    in the list form a missing ``(m, n)`` entry is filled in by conjugation.
    """
    if isinstance(spec, str):
        kind, _, arg = spec.partition(":")
        kind = kind.strip().lower()
        if kind == "fock":
            n = int(arg)
            if n < 0:
                raise ValueError("fock index must be non-negative")
            return fock.projector(n, n + 1)
        if kind == "superposition":
            c = np.array([complex(s.replace(" ", "")) for s in arg.split(",")])
            return _pure(c)
        if kind == "coherent":
            re, im = (float(s) for s in arg.split(","))
            return _pure(_coherent_amplitudes(complex(re, im)))
        if kind == "thermal":
            nbar_s, d_s = arg.split(":")
            nbar, D = float(nbar_s), int(d_s)
            if nbar < 0 or D < 1:
                raise ValueError("thermal needs nbar >= 0 and D >= 1")
            pops = (nbar / (nbar + 1)) ** np.arange(D)
            return np.diag(pops / pops.sum()).astype(complex)
        raise ValueError(f"unknown state preset {spec!r}")
    entries = [(int(n), int(m), complex(re, im)) for n, m, re, im in spec]
    D = 1 + max(max(n, m) for n, m, _ in entries)
    rho = np.zeros((D, D), dtype=complex)
    given = set()
    for n, m, v in entries:
        rho[n, m] = v
        given.add((n, m))
    for n, m, v in entries:
        if (m, n) not in given:
            rho[m, n] = np.conj(v)
    try:
        return fock.check_density(rho)
    except NotDensity as exc:
        raise ValueError(f"matrix elements do not form a density matrix: {exc}") from exc


def _pure(c):
    norm = np.linalg.norm(c)
    if norm == 0:
        raise ValueError("zero vector")
    c = c / norm
    return np.outer(c, c.conj())


def _coherent_amplitudes(alpha, tail=1e-14):
    amps = [np.exp(-abs(alpha) ** 2 / 2)]
    mass = abs(amps[0]) ** 2
    n = 0
    while 1.0 - mass > tail and n < 4096:
        n += 1
        amps.append(amps[-1] * alpha / np.sqrt(n))
        mass += abs(amps[-1]) ** 2
    return np.array(amps)
