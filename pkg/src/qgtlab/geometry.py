"""Quantum geometric tensor of ground states, by three independent routes.

* ``qgt_fd_overlap``: central differences of gauge-fixed ground states,
  assembled as <dPsi|(1 - |Psi><Psi|)|dPsi>.
* ``qgt_spectral_sum``: the sum over excited states of matrix elements of
  dH divided by squared excitation energies.
* ``qgt_corr_integral``: the first moment of the connected imaginary-time
  correlation function of dH, either mode by mode in closed form or by
  adaptive quadrature of the summed integrand.

The Berry curvature (imaginary part) is also available from gauge-invariant
overlap products around plaquettes and closed loops.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .eigensolver import (
    AUTO_DENSE_MAX,
    DEFAULT_SEED,
    DEFAULT_TOL,
    DEGENERACY_TOL,
    DENSE_CAP,
    SpectralData,
    dense_spectrum,
    lanczos_lowest_k,
    require_unique,
    solve,
)
from .errors import (
    CapacityExceeded,
    DegenerateGroundState,
    GaplessAtFiniteSize,
    LoopNotClosed,
    MeshTooCoarse,
    QuadratureNotConverged,
)
from .hamiltonian import (
    ModelSpec,
    SparseOperator,
    build_hamiltonian,
    build_perturbation,
    default_sector,
)

DEFAULT_DELTA = 1e-3
# above this dimension ground states come from Lanczos on the "auto" path
GROUND_STATE_DENSE_MAX = AUTO_DENSE_MAX
QUAD_TAIL = 1e-14
METHODS = ("fd-overlap", "spectral-sum", "corr-integral")


@dataclass
class QGTResult:
    params: np.ndarray
    L: int
    Q: np.ndarray
    method: str
    model: str = ""
    param_names: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        # exact hermiticity makes Re Q symmetric and Im Q antisymmetric bit for bit
        Q = np.asarray(self.Q, dtype=complex)
        self.Q = 0.5 * (Q + Q.conj().T)

    @property
    def g(self) -> np.ndarray:
        return self.Q.real

    @property
    def F(self) -> np.ndarray:
        return self.Q.imag

    @property
    def q(self) -> np.ndarray:
        """Intensive tensor Q / L (chains are one-dimensional)."""
        return self.Q / self.L


@dataclass(frozen=True)
class FidelityRecord:
    params: tuple
    params_prime: tuple
    value: float
    L: int


# ---------------------------------------------------------------------------
# ground states
# ---------------------------------------------------------------------------


def _spec_at(spec: ModelSpec, L, params) -> ModelSpec:
    return spec.at(params=params, L=L)


def ground_state(spec: ModelSpec, k: int = 2, solver: str = "auto", v0=None,
                 seed: int = DEFAULT_SEED, tol: float = DEFAULT_TOL, **kw) -> SpectralData:
    """Lowest ``k`` eigenpairs of ``spec`` in its default sector.

    The dense path returns the complete spectrum regardless of ``k``.
    """
    H = build_hamiltonian(spec)
    if solver == "dense" or (solver == "auto" and H.dimension <= GROUND_STATE_DENSE_MAX):
        return dense_spectrum(H, cap=max(DENSE_CAP, H.dimension))
    return lanczos_lowest_k(H, k=min(k, H.dimension), tol=tol, seed=seed, v0=v0, **kw)


def _unique_ground_state(spec, solver, **kw):
    data = ground_state(spec, k=2, solver=solver, **kw)
    require_unique(data)
    return data


def _in_sector_gap(data: SpectralData) -> float:
    return float(data.eigenvalues[1] - data.eigenvalues[0]) if len(data.eigenvalues) > 1 else math.inf


def fidelity(spec: ModelSpec, L: int, params, params_prime, solver: str = "auto") -> FidelityRecord:
    """|<Psi_0(params)|Psi_0(params_prime)>| for unique ground states."""
    a = _unique_ground_state(_spec_at(spec, L, params), solver).ground_state
    b = _unique_ground_state(_spec_at(spec, L, params_prime), solver).ground_state
    value = min(1.0, float(abs(np.vdot(a, b))))
    return FidelityRecord(tuple(np.atleast_1d(params).astype(float)),
                          tuple(np.atleast_1d(params_prime).astype(float)), value, spec.L if L is None else L)


# ---------------------------------------------------------------------------
# route 1: finite differences of gauge-fixed ground states
# ---------------------------------------------------------------------------


def _gauge_fix(psi, reference):
    ov = np.vdot(reference, psi)
    if ov == 0:
        raise DegenerateGroundState("stencil ground state orthogonal to the centre state")
    return psi * (np.conj(ov) / abs(ov)), abs(ov)


def qgt_fd_overlap(spec: ModelSpec, L: int, params, delta=DEFAULT_DELTA,
                   solver: str = "auto", **kw) -> QGTResult:
    """Central-difference QGT with error O(delta^2).

    Stencil states are rotated so their overlap with the centre state is
    real and positive.  A stencil that straddles a level crossing is not
    detected.  On the Lanczos path only the centre point is checked for a
    degenerate ground state.
    """
    centre_spec = _spec_at(spec, L, params)
    params = np.asarray(centre_spec.params, dtype=float)
    m = len(params)
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (m,))
    if np.any(delta <= 0):
        raise ValueError("finite-difference steps must be positive")

    centre = _unique_ground_state(centre_spec, solver, **kw)
    psi0 = centre.ground_state
    derivs = []
    fids = []
    for mu in range(m):
        pair = []
        for sign in (1.0, -1.0):
            shifted = params.copy()
            shifted[mu] += sign * delta[mu]
            data = ground_state(centre_spec.at(params=shifted), k=1, solver=solver, v0=psi0, **kw)
            if data.complete:
                require_unique(data)
            psi, ov = _gauge_fix(data.ground_state, psi0)
            pair.append(psi)
            fids.append(ov)
        derivs.append((pair[0] - pair[1]) / (2.0 * delta[mu]))
    D = np.array(derivs)
    proj = D.conj() @ psi0  # <d_mu|psi0>
    Q = D.conj() @ D.T - np.outer(proj, proj.conj())
    diag = {
        "gap": _in_sector_gap(centre),
        "fidelity_used": float(fids[0]),
        "fidelities": fids,
        "delta": delta.tolist(),
        "solver": "dense" if centre.complete else "lanczos",
    }
    return QGTResult(params, centre_spec.L, Q, "fd-overlap", spec.kind, centre_spec.param_names, diag)


# ---------------------------------------------------------------------------
# shared spectral ingredients
# ---------------------------------------------------------------------------


def _matrix_elements(spec: ModelSpec, data: SpectralData):
    """X[mu, n] = <Psi_0| dH_mu |Psi_n> for every returned eigenvector."""
    sector = default_sector(spec)
    psi0 = data.ground_state
    rows = []
    for mu in range(spec.m):
        dH = build_perturbation(spec, sector, mu)
        rows.append((dH.matrix.conj().T @ psi0).conj() @ data.eigenvectors)
    return np.array(rows)


def _complete_spectrum(spec, dense_cap=DENSE_CAP):
    H = build_hamiltonian(spec)
    if H.dimension > dense_cap:
        raise CapacityExceeded(
            f"complete spectrum needs dimension <= {dense_cap}, got {H.dimension}")
    data = dense_spectrum(H, cap=dense_cap)
    require_unique(data)
    return data


def qgt_spectral_sum(spec: ModelSpec, L: int, params, truncate: int | None = None,
                     dense_cap: int = DENSE_CAP, **kw) -> QGTResult:
    """Sum over excited states of <0|dH_mu|n><n|dH_nu|0> / (E_n - E_0)^2.

    With ``truncate=k`` only the ``k`` lowest states (Lanczos) enter; the
    result then underestimates the positive semidefinite tensor, and the
    diagnostic ``tail_bound`` bounds the missing diagonal weight.
    """
    point = _spec_at(spec, L, params)
    if truncate is None:
        data = _complete_spectrum(point, dense_cap)
    else:
        data = lanczos_lowest_k(build_hamiltonian(point), k=truncate, **kw)
        require_unique(data)
    X = _matrix_elements(point, data)
    eps = data.gaps[1:]
    Xe = X[:, 1:]
    Q = (Xe / eps**2) @ Xe.conj().T
    diag = {"gap": float(eps[0]), "fidelity_used": math.nan, "levels": int(len(data.eigenvalues))}
    if truncate is not None:
        sector = default_sector(point)
        psi0 = data.ground_state
        tails = []
        for mu in range(point.m):
            v = build_perturbation(point, sector, mu).matrix @ psi0
            remaining = float(np.vdot(v, v).real) - float(np.sum(np.abs(X[mu]) ** 2))
            tails.append(max(remaining, 0.0) / eps[-1] ** 2)
        diag["tail_bound"] = tails
        diag["truncation"] = truncate
    return QGTResult(np.asarray(point.params), point.L, Q, "spectral-sum", spec.kind, point.param_names, diag)


# ---------------------------------------------------------------------------
# route 3: imaginary-time correlation integral
# ---------------------------------------------------------------------------


def correlation_function(X: np.ndarray, eps: np.ndarray, tau) -> np.ndarray:
    """G_{mu nu}(tau) = sum_n exp(-eps_n tau) X_{n mu} X_{n nu}^* for tau >= 0."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    weights = np.exp(-np.outer(tau, eps))  # (ntau, nmodes)
    G = np.einsum("tn,an,bn->tab", weights, X, X.conj())
    return np.where(tau[:, None, None] >= 0, G, 0.0)


def _quad_moment(X, eps, epsrel, limit):
    """int_0^tau_max tau G(tau) dtau by adaptive quadrature, entry by entry."""
    tau_max = -math.log(QUAD_TAIL) / eps[0]
    # breakpoints at the decay times of the modes keep the subdivision honest
    points = np.unique(np.clip(1.0 / np.geomspace(eps.max(), eps[0], 12), 0, tau_max))
    points = points[: max(limit - 1, 0)] if len(points) >= limit else points
    m = X.shape[0]
    scale = float(np.sum(np.abs(X) ** 2 / eps**2)) or 1.0
    Q = np.zeros((m, m), dtype=complex)
    evaluations = 0
    for a in range(m):
        for b in range(a, m):
            amp = X[a] * X[b].conj()
            keep = np.abs(amp) > 1e-300
            if not np.any(keep):
                continue
            amp_k, eps_k = amp[keep], eps[keep]
            parts = []
            for comp in (np.real, np.imag):
                c = comp(amp_k)
                if not np.any(c):
                    parts.append(0.0)
                    continue

                def integrand(t, c=c, e=eps_k):
                    return t * float(np.dot(c, np.exp(-e * t)))

                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", integrate.IntegrationWarning)
                    out = integrate.quad(integrand, 0.0, tau_max, points=points if len(points) else None, epsabs=1e-15 * scale,
                                         epsrel=epsrel, limit=limit, full_output=1)
                evaluations += out[2]["neval"]
                if len(out) > 3:
                    raise QuadratureNotConverged(f"quadrature failed for entry ({a},{b}): {out[3]}")
                parts.append(out[0])
            Q[a, b] = parts[0] + 1j * parts[1]
            Q[b, a] = np.conj(Q[a, b])
    return Q, tau_max, evaluations


def qgt_corr_integral(spec: ModelSpec, L: int, params, quadrature: str = "closed-form",
                      epsrel: float = 1e-12, limit: int = 2000, dense_cap: int = DENSE_CAP) -> QGTResult:
    """QGT as the first moment int_0^inf tau G(tau) dtau of the correlation function.

    ``quadrature="closed-form"`` integrates each exponential mode exactly;
    ``"adaptive"`` integrates the summed integrand numerically up to the
    time where exp(-gap * tau) drops below 1e-14.
    """
    point = _spec_at(spec, L, params)
    data = _complete_spectrum(point, dense_cap)
    X = _matrix_elements(point, data)[:, 1:]
    eps = data.gaps[1:]
    diag = {"gap": float(eps[0]), "fidelity_used": math.nan, "quadrature": quadrature}
    if quadrature == "closed-form":
        moments = 1.0 / eps**2  # int_0^inf tau exp(-eps tau) dtau
        Q = (X * moments) @ X.conj().T
    elif quadrature == "adaptive":
        Q, tau_max, nev = _quad_moment(X, eps, epsrel, limit)
        diag.update(tau_max=tau_max, evaluations=nev)
    else:
        raise ValueError(f"unknown quadrature scheme {quadrature!r}")
    return QGTResult(np.asarray(point.params), point.L, Q, "corr-integral", spec.kind, point.param_names, diag)


def qgt(spec: ModelSpec, L: int, params, method: str = "fd-overlap", **kw) -> QGTResult:
    if method in ("fd", "fd-overlap"):
        return qgt_fd_overlap(spec, L, params, **kw)
    if method in ("spectral", "spectral-sum"):
        return qgt_spectral_sum(spec, L, params, **kw)
    if method in ("corr", "corr-integral"):
        return qgt_corr_integral(spec, L, params, **kw)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Berry curvature and phases
# ---------------------------------------------------------------------------


@dataclass
class PlaquetteField:
    axes: tuple
    nodes: tuple  # (values along axis 0, values along axis 1)
    phases: np.ndarray  # Arg of the overlap product, shape (n0 - 1, n1 - 1)
    F: np.ndarray

    @property
    def centers(self):
        a, b = self.nodes
        return 0.5 * (a[1:] + a[:-1]), 0.5 * (b[1:] + b[:-1])

    @property
    def areas(self) -> np.ndarray:
        a, b = self.nodes
        return np.outer(np.diff(a), np.diff(b))


def _states_on(spec, points, solver):
    states = []
    for p in points:
        data = _unique_ground_state(spec.at(params=p), solver)
        states.append(data.ground_state)
    return np.array(states)


def berry_curvature_plaquette(spec: ModelSpec, L: int, grid, axes=(0, 1),
                              solver: str = "auto", max_phase: float = math.pi / 2) -> PlaquetteField:
    """Berry curvature F_{mu nu} on the plaquettes of a rectangular mesh.

    ``grid`` is a pair of node arrays for parameters ``axes[0]`` and
    ``axes[1]``; the remaining parameters are taken from ``spec``.  With
    corners 1=(i,j), 2=(i+1,j), 3=(i+1,j+1), 4=(i,j+1) the overlap product
    <1|2><2|3><3|4><4|1> has phase 2 F area to leading order, and is
    independent of the phase of every corner state.
    """
    spec = spec.at(L=L)
    if spec.m < 2:
        raise ValueError("plaquette curvature needs at least two parameters")
    a = np.asarray(grid[0], dtype=float)
    b = np.asarray(grid[1], dtype=float)
    base = np.asarray(spec.params, dtype=float)
    points = []
    for x in a:
        for y in b:
            p = base.copy()
            p[axes[0]] = x
            p[axes[1]] = y
            points.append(p)
    S = _states_on(spec, points, solver).reshape(len(a), len(b), -1)

    def ov(u, v):
        return np.sum(u.conj() * v, axis=-1)

    prod = (ov(S[:-1, :-1], S[1:, :-1]) * ov(S[1:, :-1], S[1:, 1:])
            * ov(S[1:, 1:], S[:-1, 1:]) * ov(S[:-1, 1:], S[:-1, :-1]))
    phases = np.angle(prod)
    worst = float(np.max(np.abs(phases))) if phases.size else 0.0
    if worst > max_phase:
        raise MeshTooCoarse(f"plaquette phase {worst:.3f} exceeds {max_phase:.3f}; refine the mesh")
    F = phases / (2.0 * np.outer(np.diff(a), np.diff(b)))
    return PlaquetteField(tuple(axes), (a, b), phases, F)


def _hamiltonians_match(spec, p, q, atol=1e-10):
    A = build_hamiltonian(spec.at(params=p)).matrix
    B = build_hamiltonian(spec.at(params=q)).matrix
    diff = abs(A - B)
    return (diff.max() if diff.nnz else 0.0) <= atol


def berry_phase_loop(spec: ModelSpec, L: int, loop, solver: str = "auto") -> float:
    """Berry phase -Arg prod_j <psi_j|psi_{j+1}> around a closed polyline, in (-pi, pi].

    The last point of ``loop`` must describe the same Hamiltonian as the
    first (periodic coordinates such as phi = 0 and 2 pi qualify); its
    state is replaced by the first one so the product closes exactly.
    """
    spec = spec.at(L=L)
    loop = np.atleast_2d(np.asarray(loop, dtype=float))
    if loop.shape[0] < 3:
        raise LoopNotClosed("a loop needs at least three points")
    if not _hamiltonians_match(spec, loop[0], loop[-1]):
        raise LoopNotClosed("first and last loop points give different Hamiltonians")
    states = _states_on(spec, loop[:-1], solver)
    nxt = np.roll(states, -1, axis=0)
    overlaps = np.sum(states.conj() * nxt, axis=1)
    return float(-np.angle(np.prod(overlaps)))


def parameter_circle(spec: ModelSpec, axis: int, n: int, start: float = 0.0,
                     period: float = 2 * math.pi) -> np.ndarray:
    """Closed polyline sweeping one periodic parameter with the others fixed."""
    base = np.asarray(spec.params, dtype=float)
    pts = np.repeat(base[None, :], n + 1, axis=0)
    pts[:, axis] = start + period * np.arange(n + 1) / n
    return pts


def wrap_phase(x):
    """Map an angle to (-pi, pi]."""
    return -((-np.asarray(x) + math.pi) % (2 * math.pi) - math.pi)


# ---------------------------------------------------------------------------
# super-extensivity bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool
    gap: float


def qgt_bound_check(spec: ModelSpec, L: int, params, direction, solver: str = "auto",
                    slack: float = 1e-10) -> BoundCheck:
    """Check |<phi|Q|phi>| <= gap^-2 (<dH dH^dag> - |<dH>|^2), dH = sum_mu phi_mu dH_mu.

    The gap is the lowest excitation inside the ground-state sector, which
    is the only sector the perturbation connects to.
    """
    point = _spec_at(spec, L, params)
    phi = np.asarray(direction, dtype=complex)
    nrm = np.linalg.norm(phi)
    if not np.isclose(nrm, 1.0, atol=1e-12):
        raise ValueError("direction must be a unit vector")
    H = build_hamiltonian(point)
    sector = default_sector(point)
    if H.dimension <= GROUND_STATE_DENSE_MAX or solver == "dense":
        data = dense_spectrum(H, cap=max(DENSE_CAP, H.dimension))
        require_unique(data)
        X = _matrix_elements(point, data)[:, 1:]
        eps = data.gaps[1:]
        Q = (X / eps**2) @ X.conj().T
        gap = float(eps[0])
        psi0 = data.ground_state
    else:
        result = qgt_fd_overlap(point, point.L, point.params, solver=solver)
        Q = result.Q
        gap = result.diagnostics["gap"]
        psi0 = ground_state(point, k=1, solver=solver).ground_state
    if gap < DEGENERACY_TOL:
        raise GaplessAtFiniteSize(f"gap {gap:.3e} at finite size")
    dH = sum(phi[mu] * build_perturbation(point, sector, mu).matrix for mu in range(point.m))
    v = dH.conj().T @ psi0
    mean = np.vdot(psi0, dH @ psi0)
    variance = float(np.vdot(v, v).real - abs(mean) ** 2)
    lhs = float(abs(phi.conj() @ Q @ phi))
    rhs = variance / gap**2
    return BoundCheck(lhs, rhs, lhs <= rhs * (1 + slack), gap)
