"""Symmetry-sector bases and sparse Hamiltonians for the model catalog.

Conventions
-----------
Site ``i`` of a chain is bit ``i`` of an integer bit-pattern; a set bit is
spin up (sigma^z = +1).  Matrix elements are stored as ``M[a, b] = <a|M|b>``
with rows and columns indexed by the rank of the pattern inside its sector.

Models
------
XXZ           H = J sum_i [Sx Sx + Sy Sy + lam Sz Sz] - h sum_i Sz_i   (S = sigma/2)
TFIM          H = -J sum_i sx_i sx_{i+1} - h sum_i sz_i
RotatedXY     H = U(phi) H_XY(h) U(phi)^dag,  U(phi) = exp(-i phi/2 sum_i sz_i)
              H_XY = -J sum_i [(1+g)/2 sx sx + (1-g)/2 sy sy] - h sum_i sz_i
QubitInField  H = -(sz cos(theta) + sin(theta) (sx cos(phi) + sy sin(phi))) / 2
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import (
    BadParameterIndex,
    CapacityExceeded,
    DimensionMismatch,
    EmptySector,
    InvalidModel,
    NotHermitian,
    SectorMismatch,
)

DEFAULT_DIMENSION_CAP = 5_000_000
HERMITIAN_CHECK_MAX_DIM = 4096
HERMITIAN_ATOL = 1e-13

MODEL_KINDS = ("XXZ", "TFIM", "RotatedXY", "QubitInField")
BOUNDARIES = ("periodic", "open")

_PARAM_NAMES = {
    ("XXZ", 1): ("lambda",),
    ("XXZ", 2): ("lambda", "h"),
    ("TFIM", 1): ("h",),
    ("RotatedXY", 2): ("h", "phi"),
    ("QubitInField", 2): ("theta", "phi"),
}


@dataclass(frozen=True)
class ModelSpec:
    """A parametrized Hamiltonian family H(params) on ``L`` sites.

    ``sz2`` selects the total-Sz sector (stored as 2*Sz) used for XXZ ground
    states; ``None`` means the full 2^L space.  It is ignored by the other
    models, which never conserve Sz.  ``anisotropy`` is the XY anisotropy of
    the RotatedXY model.
    """

    kind: str
    L: int
    params: tuple = ()
    boundary: str = "periodic"
    J: float = 1.0
    anisotropy: float = 0.5
    sz2: int | None = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise InvalidModel(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.boundary not in BOUNDARIES:
            raise InvalidModel(f"unknown boundary {self.boundary!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        L = int(self.L)
        object.__setattr__(self, "L", L)
        if L < 1:
            raise InvalidModel("L must be >= 1")
        if self.kind == "QubitInField":
            if L != 1:
                raise InvalidModel("QubitInField requires L = 1")
        else:
            if L < 2:
                raise InvalidModel(f"{self.kind} requires L >= 2")
            if self.boundary == "periodic" and L == 2:
                raise InvalidModel("periodic boundary with L = 2 double-counts the bond")
        if (self.kind, len(self.params)) not in _PARAM_NAMES:
            raise InvalidModel(f"{self.kind} does not accept {len(self.params)} parameters")
        if self.kind != "XXZ":
            object.__setattr__(self, "sz2", None)

    @property
    def m(self) -> int:
        return len(self.params)

    @property
    def param_names(self) -> tuple:
        return _PARAM_NAMES[(self.kind, len(self.params))]

    @property
    def real_representable(self) -> bool:
        """True when H(params) is a real symmetric matrix for every parameter value."""
        return self.kind in ("XXZ", "TFIM")

    def at(self, params=None, L=None) -> "ModelSpec":
        changes = {}
        if params is not None:
            changes["params"] = tuple(np.atleast_1d(np.asarray(params, dtype=float)))
        if L is not None:
            changes["L"] = L
        return dataclasses.replace(self, **changes) if changes else self


# ---------------------------------------------------------------------------
# sectors
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _binomial_table(L: int) -> np.ndarray:
    table = np.zeros((L + 1, L + 2), dtype=np.int64)
    for p in range(L + 1):
        for j in range(min(p, L + 1) + 1):
            table[p, j] = comb(p, j)
    table.setflags(write=False)
    return table


@dataclass(frozen=True, eq=False)
class SymmetrySector:
    """Ordered basis of bit-patterns with O(L) rank/unrank.

    For ``conserved == "total-Sz"`` the rank is the combinatorial number
    system index, which coincides with the position in the ascending basis.
    """

    L: int
    conserved: str
    two_sz: int | None
    basis: np.ndarray

    @property
    def dimension(self) -> int:
        return int(self.basis.shape[0])

    @property
    def n_up(self) -> int | None:
        if self.two_sz is None:
            return None
        return (self.L + self.two_sz) // 2

    def rank(self, states) -> np.ndarray:
        states = np.asarray(states, dtype=np.int64)
        if self.conserved == "none":
            return states.copy()
        table = _binomial_table(self.L)
        rank = np.zeros(states.shape, dtype=np.int64)
        count = np.zeros(states.shape, dtype=np.int64)
        for p in range(self.L):
            bit = (states >> p) & 1
            count += bit
            rank += bit * table[p, count]
        return rank

    def unrank(self, indices) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        if self.conserved == "none":
            return indices.copy()
        table = _binomial_table(self.L)
        r = indices.copy()
        states = np.zeros(indices.shape, dtype=np.int64)
        for j in range(self.n_up, 0, -1):
            # largest p with C(p, j) <= r
            p = np.searchsorted(table[: self.L, j], r, side="right") - 1
            states |= np.left_shift(np.int64(1), p)
            r -= table[p, j]
        return states


def full_space(L: int, cap: int = DEFAULT_DIMENSION_CAP) -> SymmetrySector:
    dim = 1 << L
    if dim > cap:
        raise CapacityExceeded(f"full space of L={L} has dimension {dim} > cap {cap}")
    return SymmetrySector(L, "none", None, np.arange(dim, dtype=np.int64))


def sector_basis(spec: ModelSpec, sz, cap: int = DEFAULT_DIMENSION_CAP) -> SymmetrySector:
    """Total-Sz sector with ``n_up = L/2 + sz`` up spins, ascending patterns."""
    L = spec.L
    two_sz = int(round(2 * float(sz)))
    if abs(2 * float(sz) - two_sz) > 1e-12:
        raise EmptySector(f"sz={sz} is not a half-integer")
    if abs(two_sz) > L or (two_sz - L) % 2:
        raise EmptySector(f"no states with 2*Sz={two_sz} on L={L} sites")
    n_up = (L + two_sz) // 2
    dim = comb(L, n_up)
    if dim > cap:
        raise CapacityExceeded(f"Sz sector of dimension {dim} exceeds cap {cap}")
    sector = SymmetrySector(L, "total-Sz", two_sz, np.empty(0, dtype=np.int64))
    basis = sector.unrank(np.arange(dim, dtype=np.int64))
    return SymmetrySector(L, "total-Sz", two_sz, basis)


def default_sector(spec: ModelSpec, cap: int = DEFAULT_DIMENSION_CAP) -> SymmetrySector:
    if spec.kind == "XXZ" and spec.sz2 is not None:
        return sector_basis(spec, spec.sz2 / 2, cap=cap)
    return full_space(spec.L, cap=cap)


def translation_permutation(sector: SymmetrySector) -> np.ndarray:
    """Index map of the one-site cyclic shift: ``T|b_k> = |b_perm[k]>``."""
    L = sector.L
    s = sector.basis
    shifted = ((s << 1) | (s >> (L - 1))) & ((1 << L) - 1)
    return sector.rank(shifted)


# ---------------------------------------------------------------------------
# sparse operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Immutable CSR operator.  ``apply`` may be called concurrently."""

    matrix: sp.csr_matrix
    hermitian: bool = True

    def __post_init__(self):
        m = self.matrix
        if m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"operator must be square, got {m.shape}")
        if self.hermitian and m.shape[0] <= HERMITIAN_CHECK_MAX_DIM:
            dev = abs(m - m.conj().T)
            worst = dev.max() if dev.nnz else 0.0
            if worst > HERMITIAN_ATOL:
                raise NotHermitian(f"max|M - M^dag| = {worst:.3e}")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def indptr(self) -> np.ndarray:
        return self.matrix.indptr

    @property
    def indices(self) -> np.ndarray:
        return self.matrix.indices

    @property
    def data(self) -> np.ndarray:
        return self.matrix.data

    @property
    def dtype(self):
        return self.matrix.dtype

    def apply(self, v: np.ndarray) -> np.ndarray:
        return apply(self, v)

    def __matmul__(self, v):
        return apply(self, v)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def apply(op: SparseOperator, v) -> np.ndarray:
    v = np.asarray(v)
    if v.shape[0] != op.dimension:
        raise DimensionMismatch(f"vector length {v.shape[0]} != operator dimension {op.dimension}")
    return op.matrix @ v


def identity_operator(dimension: int) -> SparseOperator:
    return SparseOperator(sp.identity(dimension, dtype=float, format="csr"))


def _assemble(rows, cols, vals, dim) -> SparseOperator:
    rows = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
    vals = np.concatenate(vals) if vals else np.empty(0)
    if np.iscomplexobj(vals) and not np.any(vals.imag):
        vals = vals.real
    m = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return SparseOperator(m, hermitian=True)


def _bonds(spec: ModelSpec):
    L = spec.L
    bonds = [(i, i + 1) for i in range(L - 1)]
    if spec.boundary == "periodic":
        bonds.append((L - 1, 0))
    return bonds


def _sigma_z(states, i):
    return 2 * ((states >> i) & 1) - 1


def _xxz_terms(spec, sector, which):
    states = sector.basis
    dim = sector.dimension
    idx = np.arange(dim, dtype=np.int64)
    lam = spec.params[0]
    J = spec.J
    diag = np.zeros(dim)
    rows, cols, vals = [], [], []
    for i, j in _bonds(spec):
        if which in (None, 0):
            zz = 0.25 * _sigma_z(states, i) * _sigma_z(states, j)
            diag += J * (lam if which is None else 1.0) * zz
        if which is None:
            mask = ((states >> i) & 1) != ((states >> j) & 1)
            flipped = states[mask] ^ ((1 << i) | (1 << j))
            rows.append(sector.rank(flipped))
            cols.append(idx[mask])
            vals.append(np.full(int(mask.sum()), 0.5 * J))
    if spec.m == 2 and which in (None, 1):
        h = spec.params[1] if which is None else 1.0
        diag += -h * 0.5 * (2 * np.bitwise_count(states).astype(float) - spec.L)
    rows.append(idx)
    cols.append(idx)
    vals.append(diag)
    return rows, cols, vals


def _tfim_terms(spec, sector, which):
    states = sector.basis
    dim = sector.dimension
    idx = np.arange(dim, dtype=np.int64)
    h = spec.params[0]
    mag = 2.0 * np.bitwise_count(states).astype(float) - spec.L
    if which == 0:
        return [idx], [idx], [-mag]
    rows, cols, vals = [idx], [idx], [-h * mag]
    for i, j in _bonds(spec):
        rows.append(sector.rank(states ^ ((1 << i) | (1 << j))))
        cols.append(idx)
        vals.append(np.full(dim, -spec.J))
    return rows, cols, vals


def _rotated_xy_terms(spec, sector, which):
    states = sector.basis
    dim = sector.dimension
    idx = np.arange(dim, dtype=np.int64)
    h, phi = spec.params
    gamma = spec.anisotropy
    mag = 2.0 * np.bitwise_count(states).astype(float) - spec.L
    if which == 0:
        return [idx], [idx], [-mag]
    rows, cols, vals = [], [], []
    if which is None:
        rows.append(idx)
        cols.append(idx)
        vals.append((-h * mag).astype(complex))
    for i, j in _bonds(spec):
        flipped = states ^ ((1 << i) | (1 << j))
        same = ((states >> i) & 1) == ((states >> j) & 1)
        amp = np.where(same, -spec.J * gamma, -spec.J).astype(complex)
        dz = 2.0 * (np.bitwise_count(flipped).astype(float) - np.bitwise_count(states))
        amp *= np.exp(-0.5j * phi * dz)
        if which == 1:
            amp *= -0.5j * dz
        rows.append(sector.rank(flipped))
        cols.append(idx)
        vals.append(amp)
    return rows, cols, vals


_SX = np.array([[0, 1], [1, 0]], dtype=complex)
# basis index 0 = down, 1 = up
_SY = np.array([[0, 1j], [-1j, 0]], dtype=complex)
_SZ = np.array([[-1, 0], [0, 1]], dtype=complex)


def _qubit_terms(spec, sector, which):
    theta, phi = spec.params
    if which is None:
        m = -0.5 * (np.cos(theta) * _SZ + np.sin(theta) * (np.cos(phi) * _SX + np.sin(phi) * _SY))
    elif which == 0:
        m = -0.5 * (-np.sin(theta) * _SZ + np.cos(theta) * (np.cos(phi) * _SX + np.sin(phi) * _SY))
    else:
        m = -0.5 * np.sin(theta) * (-np.sin(phi) * _SX + np.cos(phi) * _SY)
    r, c = np.nonzero(m)
    return [r.astype(np.int64)], [c.astype(np.int64)], [m[r, c]]


_BUILDERS = {
    "XXZ": _xxz_terms,
    "TFIM": _tfim_terms,
    "RotatedXY": _rotated_xy_terms,
    "QubitInField": _qubit_terms,
}


def _check_sector(spec: ModelSpec, sector: SymmetrySector):
    if sector.L != spec.L:
        raise SectorMismatch(f"sector built for L={sector.L}, model has L={spec.L}")
    if sector.conserved == "total-Sz" and spec.kind != "XXZ":
        raise SectorMismatch(f"{spec.kind} does not conserve total Sz")


def build_hamiltonian(spec: ModelSpec, sector: SymmetrySector | None = None,
                      cap: int = DEFAULT_DIMENSION_CAP) -> SparseOperator:
    if sector is None:
        sector = default_sector(spec, cap=cap)
    _check_sector(spec, sector)
    if sector.dimension > cap:
        raise CapacityExceeded(f"dimension {sector.dimension} exceeds cap {cap}")
    rows, cols, vals = _BUILDERS[spec.kind](spec, sector, None)
    return _assemble(rows, cols, vals, sector.dimension)


def build_perturbation(spec: ModelSpec, sector: SymmetrySector | None, mu: int,
                       cap: int = DEFAULT_DIMENSION_CAP) -> SparseOperator:
    """The operator dH/dparams[mu] in the same sector and ordering as ``build_hamiltonian``."""
    if not 0 <= mu < spec.m:
        raise BadParameterIndex(f"parameter index {mu} out of range for m={spec.m}")
    if sector is None:
        sector = default_sector(spec, cap=cap)
    _check_sector(spec, sector)
    if sector.dimension > cap:
        raise CapacityExceeded(f"dimension {sector.dimension} exceeds cap {cap}")
    rows, cols, vals = _BUILDERS[spec.kind](spec, sector, mu)
    return _assemble(rows, cols, vals, sector.dimension)


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path) -> dict:
    return parse_config_text(Path(path).read_text())


def model_from_config(cfg: dict) -> ModelSpec:
    kind = cfg.get("kind", cfg.get("model"))
    if kind is None:
        raise InvalidModel("config needs a 'kind' entry")
    params = cfg.get("params", "")
    if isinstance(params, str):
        params = [float(x) for x in params.replace(";", ",").split(",") if x.strip()]
    kwargs = dict(kind=kind, L=int(cfg.get("L", 1 if kind == "QubitInField" else 8)), params=tuple(params))
    if "boundary" in cfg:
        kwargs["boundary"] = cfg["boundary"]
    if "J" in cfg:
        kwargs["J"] = float(cfg["J"])
    if "anisotropy" in cfg:
        kwargs["anisotropy"] = float(cfg["anisotropy"])
    if "sz" in cfg:
        sz = str(cfg["sz"]).strip().lower()
        kwargs["sz2"] = None if sz in ("none", "full") else int(round(2 * float(sz)))
    return ModelSpec(**kwargs)
