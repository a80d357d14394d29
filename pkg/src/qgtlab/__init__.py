"""Quantum geometric tensor of spin-chain ground states and its finite-size scaling."""

__version__ = "0.1.0"

from .eigensolver import SpectralData, dense_spectrum, gap, lanczos_lowest_k
from .geometry import (
    QGTResult,
    berry_curvature_plaquette,
    berry_phase_loop,
    fidelity,
    qgt,
    qgt_bound_check,
    qgt_corr_integral,
    qgt_fd_overlap,
    qgt_spectral_sum,
)
from .hamiltonian import (
    ModelSpec,
    SparseOperator,
    SymmetrySector,
    apply,
    build_hamiltonian,
    build_perturbation,
    sector_basis,
)
from .scaling import (
    K_of_lambda,
    ScalingInput,
    delta_Q,
    extract_slope,
    fit_fss,
    predicted_critical_fss,
    predicted_offcritical,
)
