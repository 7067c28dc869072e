"""Dense state-vector oracle shared by the test modules.

The oracle is deliberately independent of the package: it builds 2**n
vectors with ``np.kron`` and applies gates as full matrices.
"""

import functools

import numpy as np
import pytest

KET = {"H": np.array([1, 0], dtype=complex), "V": np.array([0, 1], dtype=complex)}
H_GATE = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
X_GATE = np.array([[0, 1], [1, 0]], dtype=complex)


def ket(pattern):
    return functools.reduce(np.kron, (KET[c] for c in pattern))


def dense(amps, n):
    vec = np.zeros(2**n, dtype=complex)
    for pattern, a in amps.items():
        vec = vec + a * ket(pattern)
    return vec


def one_qubit_op(gate, photon, n):
    ops = [np.eye(2)] * n
    ops[photon - 1] = gate
    return functools.reduce(np.kron, ops)


def cond_phase_op(photon, pol, angle, n):
    d = np.ones(2, dtype=complex)
    d[0 if pol == "H" else 1] = np.exp(1j * angle)
    return one_qubit_op(np.diag(d), photon, n)


def fidelity(u, v):
    return abs(np.vdot(u, v)) ** 2 / (np.vdot(u, u).real * np.vdot(v, v).real)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_amps(rng, n, nbranches=None):
    from weakkerr.hybrid_state import all_patterns

    pats = all_patterns(n)
    if nbranches is not None:
        pats = list(rng.choice(pats, size=nbranches, replace=False))
    return {p: complex(rng.normal(), rng.normal()) for p in pats}


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
