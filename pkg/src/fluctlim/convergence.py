"""Convergence sweeps and numerical certification of the supporting bounds.

``sweep`` compares finite-ensemble expectations with their continuum limit
along a single-block sequence and fits the decay rate. The ``verify_*``
functions scan deterministic grids and report the worst slack
``rhs - lhs`` of one inequality each; a report passes when that slack is at
least :data:`~fluctlim.tolerances.SLACK`.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import fock
from .dynamics import (SQUEEZING, HARMONIC, QuadraticHamiltonian, block_hamiltonian,
                       check_time, scaled_limit_hamiltonian, t0_threshold)
from .errors import ProjectionAnnihilates, TruncationDiverged
from .moments import OperatorWord, expectation_finite, expectation_limit
from .spin import beta, invariant_dim
from .states import single_block_sequence
from .tolerances import SLACK

FIT_FLOOR = 1e-14
MIN_ROWS = 4
INF = math.inf


@dataclass(frozen=True)
class Row:
    M: int
    two_j: int | None
    finite: complex
    limit: complex
    abs_error: float
    status: str = "ok"


@dataclass(frozen=True)
class Fit:
    slope: float
    intercept: float
    residual: float


@dataclass
class ConvergenceReport:
    observable: str
    lam: float
    t: float | None
    rows: list
    fit: Fit | None
    passed: bool

    @property
    def valid_rows(self):
        return [r for r in self.rows if r.status == "ok"]


def fit_rate(Ms, errors):
    """Least-squares line through ``(log M, log error)``; None below 4 usable rows."""
    pts = [(m, e) for m, e in zip(Ms, errors) if e > FIT_FLOOR]
    if len(pts) < MIN_ROWS:
        return None
    lx = np.log([p[0] for p in pts])
    ly = np.log([p[1] for p in pts])
    (slope, intercept), res, *_ = np.polyfit(lx, ly, 1, full=True)
    rms = math.sqrt(float(res[0]) / len(pts)) if len(res) else 0.0
    return Fit(float(slope), float(intercept), rms)


def _row(rho_inf, lam, obs, c, t, M, limit, d_max):
    try:
        state = single_block_sequence(rho_inf, lam, M, d_max=d_max)
    except ProjectionAnnihilates:
        return Row(M, None, complex(np.nan, np.nan), limit, math.nan, "projection_annihilates")
    finite = expectation_finite(state, obs, c, t)
    return Row(M, state.blocks[0].two_j, finite, limit, abs(finite - limit))


def sweep(rho_inf, lam, obs, c=None, t=None, Ms=(), *, expected_slope=-1.0,
          slope_tol=0.1, abs_tol=None, rate_constant=None, threads=1, d_max=None):
    """Single-block convergence sweep of ``obs`` over the ensemble sizes ``Ms``.

    Rows whose block projection annihilates the state are kept with status
    ``projection_annihilates`` and excluded from the fit; fewer than four
    usable rows raise :class:`ProjectionAnnihilates`.

    The report passes when the fitted slope is within ``slope_tol`` of
    ``expected_slope`` (only if a fit exists), every error is at most
    ``rate_constant / M`` (if given) and the error at the largest M is at
    most ``abs_tol`` (if given). Without a fit all errors must vanish to
    ``max(1e-14, abs_tol)``.
    """
    Ms = [int(m) for m in Ms]
    if not Ms or any(m < 1 for m in Ms) or Ms != sorted(set(Ms)):
        raise ValueError("Ms must be a nonempty strictly ascending list of positive integers")
    if t is not None and t != 0:
        if c is None:
            raise ValueError("a time was given without a Hamiltonian")
        check_time(c, t)
    limit = expectation_limit(rho_inf, lam, obs, c, t)

    def work(M):
        return _row(rho_inf, lam, obs, c, t, M, limit, d_max)

    if threads == 1:
        rows = [work(M) for M in Ms]
    else:
        with ThreadPoolExecutor(max_workers=threads or None) as pool:
            rows = list(pool.map(work, Ms))

    valid = [r for r in rows if r.status == "ok"]
    if len(valid) < MIN_ROWS and len(Ms) >= MIN_ROWS:
        raise ProjectionAnnihilates(
            f"only {len(valid)} of {len(Ms)} ensemble sizes give a usable block")
    fit = fit_rate([r.M for r in valid], [r.abs_error for r in valid])

    passed = bool(valid)
    if fit is not None and slope_tol is not None:
        passed &= abs(fit.slope - expected_slope) <= slope_tol
    if fit is None:
        floor = max(FIT_FLOOR, abs_tol or 0.0)
        passed &= all(r.abs_error <= floor for r in valid)
    if abs_tol is not None and valid:
        passed &= valid[-1].abs_error <= abs_tol
    if rate_constant is not None:
        passed &= all(r.abs_error <= rate_constant / r.M + 1e-15 for r in valid)
    return ConvergenceReport(str(obs), lam, t, rows, fit, bool(passed))


# -- inequality suites --------------------------------------------------------

@dataclass
class BoundReport:
    """Outcome of one inequality scan.

    ``worst`` describes the grid point with the smallest slack, including its
    left and right hand sides.
    """

    name: str
    checks: int
    worst_slack: float
    worst: dict
    passed: bool
    details: dict = field(default_factory=dict)


class _Worst:
    def __init__(self):
        self.checks = 0
        self.slack = math.inf
        self.case = {}

    def update(self, lhs, rhs, **case):
        lhs = np.atleast_1d(np.asarray(lhs, dtype=float))
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), lhs.shape)
        self.checks += lhs.size
        if lhs.size == 0:
            return
        slack = rhs - lhs
        k = int(np.argmin(slack))
        if slack[k] < self.slack:
            self.slack = float(slack[k])
            self.case = dict(case, lhs=float(lhs[k]), rhs=float(rhs[k]), index=k)

    def report(self, name, extra_ok=True, **details):
        ok = self.slack >= SLACK and extra_ok
        return BoundReport(name, self.checks, self.slack, self.case, bool(ok), details)


def words(max_degree, min_degree=0):
    """All ladder words with ``min_degree <= |R| <= max_degree``, shortest first."""
    out = []
    for d in range(min_degree, max_degree + 1):
        out.extend(OperatorWord(w) for w in itertools.product((-1, 1), repeat=d))
    return out


DEFAULT_BETA_MS = (1, 2, 3, 4, 5, 7, 8, 16, 31, 64, 100, 256, 1024, 4096)


def verify_beta_bound(Ms=DEFAULT_BETA_MS, xs=None, n_max=256):
    """``|sqrt(x) - beta(M, x, n)| <= sqrt(n/M)`` on a grid.

    The default x grid has 41 equispaced points plus every block atom
    ``k/M`` so that the boundary ``x = n/M`` is hit exactly.
    """
    w = _Worst()
    for M in Ms:
        grid = np.linspace(0.0, 1.0, 41) if xs is None else np.asarray(xs, dtype=float)
        if xs is None:
            grid = np.union1d(grid, np.arange(M + 1) / M)
        n = np.arange(min(n_max, M) + 1)
        for x in grid:
            lhs = np.abs(np.sqrt(x) - beta(M, x, n))
            w.update(lhs, np.sqrt(n / M), M=M, x=float(x))
        # n beyond M: beta vanishes and the bound is trivially above one
    return w.report("beta_bound")


def _ladder_norms(word, D, n_values):
    ops = fock.canonical_operators(D)
    A = np.eye(D, dtype=complex)
    for r in word.letters:
        A = A @ (ops.creator if r > 0 else ops.annihilator)
    return np.linalg.norm(A[:, n_values], axis=0)


def verify_hermite_growth(n_max=24, d_max=4):
    """``||a^R psi_n|| <= 2^(n/2) 4^|R| |R|!`` for every word up to degree ``d_max``.

    The computation is exact: ``a^R psi_n`` stays in the first ``n + |R| + 1``
    Hermite functions. The sharper form with ``4^(|R|/2) (|R|/2)!`` for even
    ``|R|`` is checked alongside and reported in ``details``.
    """
    D = n_max + d_max + 2
    n = np.arange(n_max + 1)
    w, sharp = _Worst(), _Worst()
    best_ratio = (-1.0, None)
    for word in words(d_max):
        d = word.degree
        lhs = _ladder_norms(word, D, n)
        rhs = 2.0 ** (n / 2) * 4.0 ** d * math.factorial(d)
        w.update(lhs, rhs, word=str(word))
        ratio = float(np.max(lhs / rhs))
        if d and ratio > best_ratio[0]:
            best_ratio = (ratio, str(word))
        if d % 2 == 0:
            h = d // 2
            sharp.update(lhs, 2.0 ** (n / 2) * 4.0 ** h * math.factorial(h), word=str(word))
    return w.report("hermite_growth", extra_ok=sharp.slack >= SLACK,
                    sharp_worst_slack=sharp.slack, sharp_worst=sharp.case,
                    worst_ratio=best_ratio[0], worst_ratio_word=best_ratio[1])


GENERIC = QuadraticHamiltonian(0.3 + 0.2j, 0.7, -0.4, 0.3 - 0.2j)
DEFAULT_HAMILTONIANS = (HARMONIC, SQUEEZING, GENERIC)
DEFAULT_BLOCK_MS = (1, 2, 4, 16, 64, 256, INF)
DEFAULT_XS = (0.0, 0.25, 0.5, 1.0)


def _hamiltonian(c, M, x, D):
    if M == INF:
        return scaled_limit_hamiltonian(c, x, D)
    return block_hamiltonian(c, M, x, D)


def verify_csek(cs=DEFAULT_HAMILTONIANS, S_max=2, n_max=16, m_max=4,
                Ms=DEFAULT_BLOCK_MS, xs=DEFAULT_XS):
    """``||a^S H_M(x)^m psi_n|| <= 2^(3d + n/2) d! m! (32 cmax)^m`` with ``d = |S|``.

    Exact arithmetic on the span reached by ``n + 2m + |S|`` ladder steps;
    ``M = inf`` means the limit Hamiltonian ``x H``.
    """
    if m_max > 6:
        raise ValueError("m_max is limited to 6")
    D = n_max + 2 * m_max + S_max + 2
    ops = fock.canonical_operators(D)
    n = np.arange(n_max + 1)
    w = _Worst()
    for c, M, x in itertools.product(cs, Ms, xs):
        if M != INF and not 0 <= x <= 1:
            continue
        H = _hamiltonian(c, M, x, D)
        vecs = np.eye(D, dtype=complex)[:, n]
        powers = [vecs]
        for _ in range(m_max):
            powers.append(H @ powers[-1])
        for word in words(S_max):
            A = np.eye(D, dtype=complex)
            for r in word.letters:
                A = A @ (ops.creator if r > 0 else ops.annihilator)
            d = word.degree
            for m, v in enumerate(powers):
                lhs = np.linalg.norm(A @ v, axis=0)
                rhs = (2.0 ** (3 * d + n / 2) * math.factorial(d) * math.factorial(m)
                       * (32 * c.cmax) ** m)
                w.update(lhs, rhs, c=c.coefficients, M=M, x=x, m=m, word=str(word))
    return w.report("csek")


def tail_constants(q, d):
    """Constants ``(K1, K2)`` of the bound ``K1 exp(-K2 n)`` for ``q < 1``."""
    K1 = 2.0 ** (3 * d) * math.factorial(d) / (1 - q) * q ** ((2 - d) / 2)
    K2 = -(0.5 * math.log(2.0) + 0.25 * math.log(q))
    return K1, K2


class _Propagator:
    """``U*_{M,t}(x) psi_n`` on a truncation grown until the tail is negligible."""

    def __init__(self, c, M, x, t, margin=32, window=8, tol=1e-15, d_limit=1024):
        self.c, self.M, self.x, self.t = c, M, x, t
        self.margin, self.window, self.tol, self.d_limit = margin, window, tol, d_limit

    def columns(self, n_values, extra=0):
        """Columns ``U* psi_n`` for each n, on a common dimension ``D``."""
        n_values = np.asarray(n_values)
        D = int(n_values.max()) + extra + self.margin
        if self.M != INF:
            D = min(D, max(invariant_dim(self.M, self.x), int(n_values.max()) + 1) + extra + 1)
        while True:
            H = _hamiltonian(self.c, self.M, self.x, D)
            U_star = fock.hermitian_evolve(H, -self.t)
            cols = U_star[:, n_values]
            exact = self.M != INF and D >= invariant_dim(self.M, self.x)
            tail = np.sum(np.abs(cols[D - self.window - extra:]) ** 2, axis=0)
            if exact or self.t == 0 or np.all(tail < self.tol):
                return U_star, cols, D
            D += self.margin
            if D > self.d_limit:
                raise TruncationDiverged(f"propagator did not settle below D={self.d_limit}")


def _word_matrix(word, D):
    ops = fock.canonical_operators(D)
    A = np.eye(D, dtype=complex)
    for r in word.letters:
        A = A @ (ops.creator if r > 0 else ops.annihilator)
    return A


def _window_mask(D, n):
    k = np.arange(D)
    return (k >= n / 2) & (k <= 3 * n / 2)


def window_leakage(c, word_list, t, ns, M, x):
    """``||(1 - E_[n/2, 3n/2]) a^S U*_{M,t}(x) psi_n||`` for each word and each n."""
    ns = np.asarray(ns)
    d_top = max(wd.degree for wd in word_list)
    if t == 0:
        D = int(ns.max()) + d_top + 2
        cols = np.eye(D, dtype=complex)[:, ns]
    else:
        _, cols, D = _Propagator(c, M, x, t).columns(ns, extra=d_top + 1)
    out = []
    for word in word_list:
        phi = _word_matrix(word, D) @ cols
        out.append(np.array([np.linalg.norm(phi[~_window_mask(D, n), k])
                             for k, n in enumerate(ns)]))
    return out


DEFAULT_TAIL_NS = tuple(range(8, 65, 8))
DEFAULT_TAIL_MS = (16, 64, 256, 1024, INF)
DEFAULT_TAIL_XS = (0.25, 0.5, 1.0)
DEFAULT_TAIL_WORDS = ((), (-1,), (1,), (1, -1), (-1, -1))


def verify_tail_decay(c=SQUEEZING, S=DEFAULT_TAIL_WORDS, t=0.01, ns=DEFAULT_TAIL_NS,
                      Ms=DEFAULT_TAIL_MS, xs=DEFAULT_TAIL_XS):
    """``||(1 - E_[n/2, 3n/2]) a^S U*_{M,t}(x) psi_n|| <= K1 exp(-K2 n)``.

    Requires ``q = 32 |t| cmax < 1/4``. ``S`` is one word or a list of words
    given as letter tuples.
    """
    q = 32 * abs(t) * c.cmax
    if not q < 0.25:
        raise ValueError(f"tail decay needs q = 32|t|cmax < 1/4, got q={q}")
    if not S:
        S = ((),)
    elif not isinstance(S[0], (tuple, list, OperatorWord)):
        S = (S,)
    word_list = [s if isinstance(s, OperatorWord) else OperatorWord(tuple(s)) for s in S]
    w = _Worst()
    ns = np.asarray(ns)
    for M, x in itertools.product(Ms, xs):
        leak = window_leakage(c, word_list, t, ns, M, x)
        for word, lhs in zip(word_list, leak):
            if q == 0:
                rhs = np.zeros_like(lhs)
            else:
                K1, K2 = tail_constants(q, word.degree)
                rhs = K1 * np.exp(-K2 * ns)
            w.update(lhs, rhs, M=M, x=x, word=str(word))
    K2 = tail_constants(q, 0)[1] if q > 0 else math.inf
    return w.report("tail_decay", q=q, K2=K2)


DEFAULT_UOB_MS = tuple(2 ** k for k in range(6, 13))
DEFAULT_UOB_XS = (0.25, 0.5, 1.0)
UOB_CAP = 192


def verify_uniform_operator_bound(c=SQUEEZING, S=(-1,), t=0.02, Ms=DEFAULT_UOB_MS,
                                  xs=DEFAULT_UOB_XS, p=None, cap=UOB_CAP, tech2_ns=DEFAULT_TAIL_NS):
    """Boundedness in M of ``||(N + p)^(-p/2) U a^S U*||``.

    The norm is taken over inputs in the first ``min(2j + 1, cap)`` Hermite
    functions (the whole invariant span once ``M x < cap``). The report
    passes when, for every x, the running supremum over M grows by less than
    1% across the last octave of ``Ms``. The window bound
    ``||E_[n/2, 3n/2] a^S U* psi_n|| <= (3n/2 + 2d)^(d/2)`` is checked on the
    same propagators and contributes to the slack.
    """
    word = S if isinstance(S, OperatorWord) else OperatorWord(tuple(S))
    d = word.degree
    p = d if p is None else p
    t0_threshold(c)
    Ms = sorted(Ms)
    w = _Worst()
    sups = {}
    limit_norms = {}
    ok = True
    for x in xs:
        norms = []
        for M in list(Ms) + [INF]:
            K = cap if M == INF else min(int(round(M * x)) + 1, cap)
            value = _uob_norm(c, word, t, M, x, p, K)
            if M == INF:
                limit_norms[x] = value
            else:
                norms.append(value)
            if tech2_ns:
                ns = np.asarray(tech2_ns)
                _, cols, D = _Propagator(c, M, x, t).columns(ns, extra=d + 1)
                phi = _word_matrix(word, D) @ cols
                lhs = [np.linalg.norm(phi[_window_mask(D, n), k]) for k, n in enumerate(ns)]
                w.update(lhs, (1.5 * ns + 2 * d) ** (d / 2), M=M, x=x, lemma="window")
        running = np.maximum.accumulate(norms)
        growth = running[-1] / running[-2] - 1.0 if len(running) > 1 else 0.0
        sups[x] = {"norms": [float(v) for v in norms], "last_octave_growth": float(growth)}
        ok &= growth < 0.01
    return w.report("uniform_operator_bound", extra_ok=ok, p=p, sups=sups,
                    limit_norms=limit_norms)


def _uob_norm(c, word, t, M, x, p, K, tol=1e-9):
    prop = _Propagator(c, M, x, t)
    cols_idx = np.arange(K)
    d = word.degree
    prev = None
    extra = 2 * d + 2
    while True:
        U_star, cols, D = prop.columns(cols_idx, extra=extra)
        U = U_star.conj().T
        weight = (np.arange(D) + p) ** (-p / 2) if p else np.ones(D)
        op = weight[:, None] * (U @ (_word_matrix(word, D) @ cols))
        value = float(np.linalg.norm(op[: D - d - 1], 2))
        if M != INF or t == 0:
            return value
        if prev is not None and abs(value - prev) <= tol * max(1.0, value):
            return value
        prev = value
        extra += 16


DEFAULT_STRONG_MS = tuple(2 ** k for k in range(4, 15))
DEFAULT_STRONG_XS = (0.05, 0.25, 0.5, 0.75, 1.0)


def strong_convergence_norm(word, M, x, n_extra=64):
    """``||(a_M(x)^R - x^(|R|/2) a^R)(N + 2|R|)^(-|R|)||``.

    Both words shift the number basis by ``w(R)``, so the operator is a
    weighted shift and its norm is the largest coefficient. Beyond
    ``n = M x + |R|`` the deformed word vanishes and the remaining
    coefficients decrease, so a finite range of n suffices.
    """
    d = word.degree
    n = np.arange(int(math.ceil(M * x)) + d + n_extra, dtype=float)
    deformed = np.ones_like(n)
    plain = np.ones_like(n)
    k = n.copy()
    for r in reversed(word.letters):
        if r > 0:
            step = np.sqrt(np.maximum(k + 1, 0))
            deformed = deformed * beta(M, x, k) * step
            k = k + 1
        else:
            step = np.sqrt(np.maximum(k, 0))
            deformed = deformed * beta(M, x, k - 1) * step
            k = k - 1
        plain = plain * step
    coef = (deformed - x ** (d / 2) * plain) * (n + 2 * d) ** (-d)
    return float(np.max(np.abs(coef)))


def verify_strong_convergence(max_degree=2, Ms=DEFAULT_STRONG_MS, xs=DEFAULT_STRONG_XS,
                              rate=-0.5, rate_tol=0.1, fit_octaves=4):
    """Norm convergence of the deformed words at rate ``M^(-1/2)`` uniformly in x.

    For each M the supremum over x and over nonempty words up to
    ``max_degree`` must decrease strictly from octave to octave, and the
    log-log slope over the last ``fit_octaves`` octaves must lie within
    ``rate_tol`` of ``rate``.
    """
    Ms = sorted(Ms)
    sup = []
    for M in Ms:
        sup.append(max(strong_convergence_norm(wd, M, x)
                       for wd in words(max_degree, 1) for x in xs))
    sup = np.array(sup)
    decreasing = bool(np.all(np.diff(sup) < 0))
    k = min(fit_octaves + 1, len(Ms))
    slope = float(np.polyfit(np.log(Ms[-k:]), np.log(sup[-k:]), 1)[0])
    w = _Worst()
    # slack form: distance of the slope from the tolerance band edge
    w.update(abs(slope - rate), rate_tol, slope=slope)
    return w.report("strong_convergence", extra_ok=decreasing,
                    sups=[float(s) for s in sup], Ms=list(Ms), slope=slope,
                    decreasing=decreasing)
