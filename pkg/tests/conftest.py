import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy import integrate, special

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def hermite_function(n, y):
    norm = 1.0 / math.sqrt(2.0 ** n * math.factorial(n) * math.sqrt(math.pi))
    return norm * special.eval_hermite(n, y) * np.exp(-y * y / 2)


def weyl_element(m, n, x1, x2):
    """``<psi_m| W(x1, x2) |psi_n>`` by quadrature.

    ``(W psi)(y) = exp(-i x1 x2 / 2) exp(i x2 y) psi(y - x1)``.
    """
    def f(y, part):
        v = (np.exp(-0.5j * x1 * x2 + 1j * x2 * y)
             * hermite_function(m, y) * hermite_function(n, y - x1))
        return v.real if part == 0 else v.imag

    re = integrate.quad(f, -40, 40, args=(0,), limit=400, epsabs=1e-13)[0]
    im = integrate.quad(f, -40, 40, args=(1,), limit=400, epsabs=1e-13)[0]
    return complex(re, im)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert on it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
