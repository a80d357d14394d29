"""Scaling predictions for the geometric tensor and finite-size fits.

The exponent of the intensive tensor follows from the scaling dimensions
of the perturbing operators, the dynamical exponent and the spatial
dimension.  Finite-size data are fitted with models that are linear in
their coefficients once the exponents (or the correlation length) are
fixed, so every fit is an ordinary least-squares solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadData, IllConditionedFit, OutOfDomain, UndefinedExponent

# Correlation length of the XXZ chain at anisotropy 2 (Bethe ansatz value,
# published with truncated digits as 8.35...).
XI_LAMBDA_2 = 8.35
MASSIVE_MIN_L = 14
MAX_CONDITION = 1e12
_EXACT_TOL = 1e-12


@dataclass(frozen=True)
class ScalingInput:
    """Scaling data near a critical point.

    ``delta_lambda`` is the scaling dimension of the driving coupling, the
    inverse of the correlation-length exponent.
    """

    delta_mu: float
    delta_nu: float | None = None
    zeta: float = 1.0
    d: int = 1
    delta_lambda: float | None = None

    def __post_init__(self):
        if self.delta_nu is None:
            object.__setattr__(self, "delta_nu", self.delta_mu)
        if self.d < 1:
            raise OutOfDomain("spatial dimension must be >= 1")
        if self.zeta <= 0:
            raise OutOfDomain("dynamical exponent must be positive")
        for v in (self.delta_mu, self.delta_nu):
            if not math.isfinite(v):
                raise OutOfDomain("scaling dimensions must be finite")


def delta_Q(inp: ScalingInput) -> float:
    """Scaling dimension of the intensive geometric tensor."""
    return inp.delta_mu + inp.delta_nu - 2 * inp.zeta - inp.d


@dataclass(frozen=True)
class OffCriticalPrediction:
    exponent: float
    divergent: bool
    value: float | None = None  # |lam - lam_c|**exponent when both are given


def predicted_offcritical(inp: ScalingInput, lam: float | None = None,
                          lam_c: float | None = None) -> OffCriticalPrediction:
    """Exponent of the singular part, q ~ |lam - lam_c|^(Delta_Q / Delta_lambda)."""
    if inp.delta_lambda is None or inp.delta_lambda == 0:
        raise UndefinedExponent("the driving coupling needs a nonzero scaling dimension")
    exponent = delta_Q(inp) / inp.delta_lambda
    value = None
    if lam is not None and lam_c is not None:
        value = abs(lam - lam_c) ** exponent
    return OffCriticalPrediction(exponent, exponent < 0, value)


@dataclass(frozen=True)
class CriticalPrediction:
    classification: str
    delta_Q: float
    q_exponent: float  # q_sing ~ L**q_exponent
    Q_exponent: float  # Q_sing ~ L**Q_exponent
    superextensive_condition: bool


def predicted_critical_fss(inp: ScalingInput) -> CriticalPrediction:
    """Finite-size law at the critical point, q_sing ~ L^(-Delta_Q)."""
    dq = delta_Q(inp)
    if abs(dq) <= _EXACT_TOL:
        label = "extensive"
    elif dq < 0:
        label = "super-extensive"
    else:
        label = "sub-extensive"
    condition = inp.d + 2 * inp.zeta - (inp.delta_mu + inp.delta_nu) > _EXACT_TOL
    return CriticalPrediction(label, dq, -dq, inp.d - dq, condition)


def K_of_lambda(lam: float) -> float:
    """Luttinger parameter of the XXZ chain for anisotropy in (-1, 1].

    The cosine operator of the low-energy theory has dimension 4 K.
    """
    if not (-1.0 < lam <= 1.0):
        raise OutOfDomain(f"K(lambda) defined on (-1, 1], got {lam}")
    return 0.5 * math.pi / (math.pi - math.acos(lam))


def xxz_input(lam: float) -> ScalingInput:
    """Marginal (partial_x Phi)^2 contribution of S^z S^z in the gapless XXZ chain."""
    K_of_lambda(lam)
    return ScalingInput(delta_mu=2.0, zeta=1.0, d=1)


QUASI_FREE_INPUT = ScalingInput(delta_mu=1.0, zeta=1.0, d=1, delta_lambda=1.0)


# ---------------------------------------------------------------------------
# finite-size fits
# ---------------------------------------------------------------------------

FIT_MODELS = ("gapless", "gapless-with-irrelevant", "logarithmic", "massive")


def _log_basis(L):
    return 1.0 / (L * np.log(L))


def design_matrix(L, model: str, fixed: dict | None = None, log_basis=None):
    """Columns of the linear fit model evaluated at sizes ``L``."""
    L = np.asarray(L, dtype=float)
    fixed = fixed or {}
    one = np.ones_like(L)
    if model == "gapless":
        cols, names = [one, 1.0 / L], ["A1", "A2"]
    elif model == "gapless-with-irrelevant":
        if "delta_v2" not in fixed:
            raise ValueError("gapless-with-irrelevant needs fixed['delta_v2']")
        cols = [one, 1.0 / L, L ** (3.0 - 2.0 * fixed["delta_v2"])]
        names = ["A1", "A2", "A3"]
    elif model == "logarithmic":
        extra = log_basis or _log_basis
        cols, names = [one, 1.0 / L, extra(L)], ["A1", "A2", "A3"]
    elif model == "massive":
        xi = fixed.get("xi")
        if xi is None or xi <= 0:
            raise ValueError("massive model needs a positive fixed['xi']")
        cols, names = [one, np.exp(-L / xi) / np.sqrt(L)], ["A1", "A2"]
    else:
        raise ValueError(f"unknown fit model {model!r}; expected one of {FIT_MODELS}")
    return np.column_stack(cols), names


@dataclass
class ScalingFit:
    model: str
    coefficients: np.ndarray
    names: list
    fixed: dict
    rss: float
    r2: float
    residuals: np.ndarray
    condition: float
    L: np.ndarray
    values: np.ndarray
    lam: float | None = None
    extra: dict = field(default_factory=dict)

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)]) if name in self.names else math.nan

    def predict(self, L) -> np.ndarray:
        A, _ = design_matrix(L, self.model, self.fixed, self.extra.get("log_basis"))
        return A @ self.coefficients


def fit_fss(data, model: str = "gapless", fixed: dict | None = None, min_L: int | None = None,
            lam: float | None = None, log_basis=None) -> ScalingFit:
    """Least-squares fit of (L, q) pairs to one of ``FIT_MODELS``.

    ``min_L`` drops smaller sizes before fitting (the massive model is
    usually fitted with ``min_L=14`` at anisotropy 2, where xi = 8.35).
    """
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise BadData("data must be a sequence of (L, value) pairs")
    if min_L is not None:
        arr = arr[arr[:, 0] >= min_L]
    order = np.argsort(arr[:, 0], kind="stable")
    L, y = arr[order, 0], arr[order, 1]
    fixed = dict(fixed or {})
    A, names = design_matrix(L, model, fixed, log_basis)
    p = A.shape[1]
    if len(L) <= p:
        raise BadData(f"{model} fit has {p} coefficients and needs more than {p} points, got {len(L)}")
    # column scaling makes the condition number reflect collinearity, not units
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise IllConditionedFit("design matrix has a zero column", math.inf)
    As = A / norms
    cond = float(np.linalg.cond(As))
    if not math.isfinite(cond) or cond > MAX_CONDITION:
        raise IllConditionedFit(f"design matrix condition number {cond:.3e}", cond)
    coef_s, *_ = np.linalg.lstsq(As, y, rcond=None)
    coef = coef_s / norms
    residuals = y - A @ coef
    rss = float(residuals @ residuals)
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else (1.0 if rss == 0 else 0.0)
    extra = {"log_basis": log_basis} if log_basis is not None else {}
    return ScalingFit(model, coef, names, fixed, rss, r2, residuals, cond, L, y, lam, extra)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float


def extract_slope(data) -> SlopeFit:
    """Slope of log Q against log L with its standard error."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 3:
        raise BadData("need at least three (L, Q) pairs")
    if np.any(arr <= 0):
        raise BadData("log-log slope needs positive L and Q")
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([slope, intercept])
    dof = len(x) - 2
    s2 = float(resid @ resid) / dof
    stderr = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    return SlopeFit(float(slope), float(intercept), stderr)
