import numpy as np
import pytest
from scipy.linalg import expm

# single-site matrices in the package's ordering: index 0 = down, 1 = up
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, 1j], [-1j, 0]], dtype=complex)
SZ = np.array([[-1, 0], [0, 1]], dtype=complex)
ID = np.eye(2, dtype=complex)


def site_op(op, i, L):
    """Kronecker embedding; site i is bit i, so it sits at factor L-1-i."""
    out = np.ones((1, 1), dtype=complex)
    for pos in range(L):
        out = np.kron(out, op if pos == L - 1 - i else ID)
    return out


def bonds(L, boundary):
    b = [(i, i + 1) for i in range(L - 1)]
    if boundary == "periodic":
        b.append((L - 1, 0))
    return b


def dense_model(kind, L, params, boundary="periodic", J=1.0, anisotropy=0.5):
    """Full-space Hamiltonian from explicit Kronecker products."""
    sx = [site_op(SX, i, L) for i in range(L)]
    sy = [site_op(SY, i, L) for i in range(L)]
    sz = [site_op(SZ, i, L) for i in range(L)]
    dim = 2**L
    H = np.zeros((dim, dim), dtype=complex)
    if kind == "XXZ":
        lam = params[0]
        for i, j in bonds(L, boundary):
            H += J * 0.25 * (sx[i] @ sx[j] + sy[i] @ sy[j] + lam * sz[i] @ sz[j])
        if len(params) == 2:
            H -= params[1] * 0.5 * sum(sz)
    elif kind == "TFIM":
        for i, j in bonds(L, boundary):
            H -= J * sx[i] @ sx[j]
        H -= params[0] * sum(sz)
    elif kind == "RotatedXY":
        h, phi = params
        g = anisotropy
        for i, j in bonds(L, boundary):
            H -= J * (0.5 * (1 + g) * sx[i] @ sx[j] + 0.5 * (1 - g) * sy[i] @ sy[j])
        H -= h * sum(sz)
        U = expm(-0.5j * phi * sum(sz))
        H = U @ H @ U.conj().T
    elif kind == "QubitInField":
        th, ph = params
        H = -0.5 * (np.cos(th) * SZ + np.sin(th) * (np.cos(ph) * SX + np.sin(ph) * SY))
    return H


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# ---------------------------------------------------------------------------
# acceptance reporting: one line per criterion in the terminal summary
# ---------------------------------------------------------------------------

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    def _record(number, title, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] criterion {number}: {title} -- {detail}")
        print(ACCEPTANCE_LINES[-1])
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
