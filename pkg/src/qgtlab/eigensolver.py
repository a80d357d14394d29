"""Ground states and low-lying spectra of sector Hamiltonians.

Two paths share one result type: a dense Hermitian eigensolve for small
sectors and a Lanczos iteration with full reorthogonalization for large
ones.  Excited states in Lanczos are found one at a time by locking: each
new run is kept orthogonal to every eigenvector already converged, which
also recovers degenerate multiplets that a single Krylov space would miss.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import CapacityExceeded, DegenerateGroundState, NotConverged
from .hamiltonian import (
    DEFAULT_DIMENSION_CAP,
    ModelSpec,
    SparseOperator,
    build_hamiltonian,
    default_sector,
    full_space,
    sector_basis,
)

DENSE_CAP = 4096
# above this size the automatic choice prefers Lanczos: a dense eigh at a few
# thousand states costs seconds, Lanczos for a few eigenpairs milliseconds
AUTO_DENSE_MAX = 512
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 1000
DEFAULT_SEED = 42
DEGENERACY_TOL = 1e-8

_CHECK_EVERY = 5


class DegenerateGroundStateWarning(UserWarning):
    pass


@dataclass
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    complete: bool
    residuals: np.ndarray
    iterations: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def gaps(self) -> np.ndarray:
        return self.eigenvalues - self.eigenvalues[0]

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def ground_state(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    @property
    def degenerate(self) -> bool:
        return "DegenerateGroundState" in self.warnings

    def diagnostics_csv(self) -> str:
        """Solver diagnostics as CSV rows: (eigen_index, iteration, residual)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eigen_index", "iteration", "residual"])
        for k, history in enumerate(self.residual_history):
            for it, res in history:
                w.writerow([k, it, format(res, ".17g")])
        return buf.getvalue()


def _residuals(op: SparseOperator, values, vectors) -> np.ndarray:
    hv = op.matrix @ vectors
    return np.linalg.norm(hv - vectors * values[None, :], axis=0)


def _flag_degeneracy(values, tol, notes):
    if len(values) > 1 and values[1] - values[0] < tol:
        notes.append("DegenerateGroundState")
        warnings.warn(
            f"ground state is degenerate to {values[1] - values[0]:.2e}",
            DegenerateGroundStateWarning,
            stacklevel=3,
        )


def dense_spectrum(op: SparseOperator, cap: int = DENSE_CAP,
                   degeneracy_tol: float = DEGENERACY_TOL) -> SpectralData:
    if op.dimension > cap:
        raise CapacityExceeded(f"dense eigensolve of dimension {op.dimension} exceeds cap {cap}")
    values, vectors = sla.eigh(op.to_dense())
    notes = []
    _flag_degeneracy(values, degeneracy_tol, notes)
    return SpectralData(values, vectors, True, _residuals(op, values, vectors), warnings=notes)


def _start_vector(rng, n, dtype):
    v = rng.standard_normal(n)
    if np.issubdtype(dtype, np.complexfloating):
        v = v + 1j * rng.standard_normal(n)
    return v


def _project_out(w, basis, count):
    if count:
        block = basis[:count]
        w -= block.T @ (block.conj() @ w)
    return w


def _lanczos_lowest(op, start, locked, tol, max_iter):
    """Lowest eigenpair of ``op`` restricted to the complement of ``locked``.

    Returns (value, vector, iterations, history).  Raises NotConverged.
    """
    A = op.matrix
    n = op.dimension
    dtype = np.result_type(A.dtype, start.dtype, *(v.dtype for v in locked))
    locked_arr = np.array(locked, dtype=dtype) if locked else np.empty((0, n), dtype=dtype)
    n_locked = len(locked)
    room = n - n_locked

    v = start.astype(dtype, copy=True)
    for _ in range(2):
        v = _project_out(v, locked_arr, n_locked)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise NotConverged("start vector lies inside the locked subspace")
    v /= norm

    capacity = min(max_iter, room) + 1
    V = np.empty((min(64, capacity), n), dtype=dtype)
    alphas, betas = [], []
    history = []
    best = np.inf
    V[0] = v
    m = 0
    while True:
        w = A @ V[m]
        alpha = float(np.real(np.vdot(V[m], w)))
        alphas.append(alpha)
        # full reorthogonalization, applied twice
        for _ in range(2):
            w = _project_out(w, V, m + 1)
            w = _project_out(w, locked_arr, n_locked)
        beta = float(np.linalg.norm(w))
        m += 1

        exhausted = beta <= 1e-13 * max(1.0, abs(alpha)) or m >= room
        if m % _CHECK_EVERY == 0 or exhausted or m >= max_iter:
            theta, s = sla.eigh_tridiagonal(np.array(alphas), np.array(betas),
                                            select="i", select_range=(0, 0))
            theta = float(theta[0])
            estimate = abs(beta * s[-1, 0]) if not exhausted else 0.0
            scale = max(1.0, abs(theta))
            if estimate <= 0.5 * tol * scale:
                vec = V[:m].T @ s[:, 0].astype(dtype)
                vec /= np.linalg.norm(vec)
                res = float(np.linalg.norm(A @ vec - theta * vec))
                history.append((m, res))
                best = min(best, res)
                if res <= tol * scale:
                    return theta, vec, m, history
            else:
                history.append((m, estimate))
                best = min(best, estimate)
            if exhausted:
                raise NotConverged(f"Krylov space exhausted at residual {best:.3e}", best)
        if m >= max_iter:
            raise NotConverged(f"no convergence in {max_iter} iterations, best residual {best:.3e}", best)

        betas.append(beta)
        if m >= V.shape[0]:
            grown = np.empty((min(2 * V.shape[0], capacity), n), dtype=dtype)
            grown[:m] = V[:m]
            V = grown
        V[m] = w / beta


def lanczos_lowest_k(op: SparseOperator, k: int = 1, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER, seed: int = DEFAULT_SEED,
                     v0: np.ndarray | None = None,
                     degeneracy_tol: float = DEGENERACY_TOL) -> SpectralData:
    """The ``k`` lowest eigenpairs of a Hermitian sparse operator.

    Residuals satisfy ``||Hv - Ev|| <= tol * max(1, |E|)``.  The result is a
    deterministic function of ``(op, k, tol, max_iter, seed, v0)``.  ``v0``
    (e.g. a nearby ground state) replaces the random start of the first
    eigenpair only.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = op.dimension
    if k > n:
        raise ValueError(f"k={k} exceeds dimension {n}")
    rng = np.random.default_rng(seed)
    locked, values, iterations, histories = [], [], [], []
    for j in range(k):
        if j == 0 and v0 is not None:
            start = np.asarray(v0)
        else:
            start = _start_vector(rng, n, op.dtype)
        theta, vec, its, history = _lanczos_lowest(op, start, locked, tol, max_iter)
        locked.append(vec)
        values.append(theta)
        iterations.append(its)
        histories.append(history)

    vectors = np.array(locked).T
    values = np.array(values)
    if k > 1:
        # Rayleigh-Ritz on the locked span restores exact ordering and orthogonality
        q, _ = np.linalg.qr(vectors)
        small = q.conj().T @ (op.matrix @ q)
        values, s = np.linalg.eigh(0.5 * (small + small.conj().T))
        vectors = q @ s
    residuals = _residuals(op, values, vectors)
    scale = np.maximum(1.0, np.abs(values))
    if np.any(residuals > tol * scale):
        raise NotConverged(f"final residuals {residuals} above tolerance", float(residuals.max()))
    notes = []
    _flag_degeneracy(values, degeneracy_tol, notes)
    return SpectralData(values, vectors, False, residuals, iterations, histories, notes)


def solve(op: SparseOperator, k: int = 1, solver: str = "auto", dense_cap: int = DENSE_CAP,
          **lanczos_kwargs) -> SpectralData:
    """Dispatch to ``dense_spectrum`` or ``lanczos_lowest_k`` by dimension."""
    if solver == "dense" or (solver == "auto" and op.dimension <= dense_cap):
        return dense_spectrum(op, cap=max(dense_cap, op.dimension) if solver == "dense" else dense_cap)
    return lanczos_lowest_k(op, k=k, **lanczos_kwargs)


def gap(spec: ModelSpec, L: int | None = None, params=None, solver: str = "auto",
        cap: int = DEFAULT_DIMENSION_CAP, **lanczos_kwargs) -> float:
    """Lowest excitation energy E_1 - E_0 over all searched sectors.

    For XXZ in a total-Sz sector the sectors Sz=0 and Sz=+-1 are searched
    (for even L); otherwise the full space.
    """
    spec = spec.at(params=params, L=L)
    if spec.kind == "XXZ" and spec.sz2 is not None:
        energies = []
        for two_sz in (spec.sz2, spec.sz2 + 2, spec.sz2 - 2):
            try:
                sector = sector_basis(spec, two_sz / 2, cap=cap)
            except Exception:
                continue
            k = 2 if two_sz == spec.sz2 else 1
            k = min(k, sector.dimension)
            data = solve(build_hamiltonian(spec, sector, cap=cap), k=k, solver=solver,
                         dense_cap=AUTO_DENSE_MAX, **lanczos_kwargs)
            energies.extend(data.eigenvalues[:k].tolist())
        energies.sort()
        return float(energies[1] - energies[0])
    sector = default_sector(spec, cap=cap) if spec.kind != "XXZ" else full_space(spec.L, cap=cap)
    data = solve(build_hamiltonian(spec, sector, cap=cap), k=2, solver=solver,
                 dense_cap=AUTO_DENSE_MAX, **lanczos_kwargs)
    return float(data.eigenvalues[1] - data.eigenvalues[0])


def require_unique(data: SpectralData, degeneracy_tol: float = DEGENERACY_TOL):
    if len(data.eigenvalues) > 1 and data.eigenvalues[1] - data.eigenvalues[0] < degeneracy_tol:
        raise DegenerateGroundState(
            f"ground state degenerate: E1 - E0 = {data.eigenvalues[1] - data.eigenvalues[0]:.3e}"
        )
