"""Single-particle phase-space lattice.

The resonantly kicked oscillator (kick period 2*pi/q0) has the slow
rotating-frame Hamiltonian

    H(X, P) = (K/q0) * sum_{j=1..q0} cos(X cos(2 pi j/q0) + P sin(2 pi j/q0)),

which for q0 = 4 collapses to (K/2)(cos X + cos P). This module evaluates
that field on grids and builds its operator form in a truncated Fock basis
from the matrix elements of exp(i(X cos t + P sin t)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import CutoffTooSmall
from .specfun import laguerre_table

__all__ = [
    "ModelParams",
    "PhasePoint",
    "FockOperator",
    "h_rwa_field",
    "h_sq_field",
    "render_lattice",
    "displacement_element",
    "displacement_matrix",
    "build_rwa_fock",
    "build_hsq_fock",
    "coherent_vector",
    "coherent_expectation",
    "alpha_from_xp",
    "audit_cutoff",
    "geometric_phase",
]

DEFAULT_CUTOFF = 256


@dataclass(frozen=True)
class ModelParams:
    """Physical configuration shared by all simulations.

    ``tau`` is derived as 2*pi/q0 and never stored independently.
    """

    K: float
    q0: int = 4
    lam: float = 1.0
    kappa: float = 0.0
    n0: float = 0.0

    def __post_init__(self):
        if int(self.q0) != self.q0 or self.q0 < 3:
            raise ValueError(f"q0 must be an integer >= 3, got {self.q0}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if self.n0 < 0:
            raise ValueError(f"n0 must be >= 0, got {self.n0}")
        if not math.isfinite(self.K):
            raise ValueError("K must be finite")

    @property
    def tau(self) -> float:
        return 2.0 * math.pi / self.q0


class PhasePoint(NamedTuple):
    X: float
    P: float


@dataclass
class FockOperator:
    matrix: np.ndarray
    hermitian: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("FockOperator needs a square matrix")
        if self.hermitian and not np.allclose(m, m.conj().T, rtol=0, atol=1e-12):
            raise ValueError("matrix flagged hermitian is not")

    @property
    def cutoff(self) -> int:
        return self.matrix.shape[0]


# ---------------------------------------------------------------------------
# Classical fields
# ---------------------------------------------------------------------------

def h_rwa_field(params: ModelParams, X, P):
    """RWA lattice Hamiltonian at phase-space point(s) (X, P)."""
    X = np.asarray(X, dtype=float)
    P = np.asarray(P, dtype=float)
    q0 = params.q0
    acc = np.zeros(np.broadcast(X, P).shape)
    for j in range(1, q0 + 1):
        theta = 2.0 * math.pi * j / q0
        acc = acc + np.cos(X * math.cos(theta) + P * math.sin(theta))
    out = params.K / q0 * acc
    return out[()] if out.ndim == 0 else out


def h_sq_field(K: float, X, P):
    """Square-lattice field (K/2)(cos X + cos P)."""
    out = 0.5 * K * (np.cos(X) + np.cos(P))
    return out[()] if np.ndim(out) == 0 else out


def render_lattice(params: ModelParams, x_range, p_range, resolution):
    """Sample H_RWA / K on a rectangular grid.

    ``resolution`` is an int or an (nx, np) pair, each >= 2. Axes include
    both endpoints. Returns ``(X_axis, P_axis, values)`` with
    ``values[i, j]`` at ``(X_axis[i], P_axis[j])``.
    """
    if np.ndim(resolution) == 0:
        nx = n_p = int(resolution)
    else:
        nx, n_p = (int(r) for r in resolution)
    if nx < 2 or n_p < 2:
        raise ValueError("resolution must be >= 2 per axis")
    if params.K == 0:
        raise ValueError("render_lattice scales by K; K must be nonzero")
    xs = np.linspace(x_range[0], x_range[1], nx)
    ps = np.linspace(p_range[0], p_range[1], n_p)
    grid = h_rwa_field(params, xs[:, None], ps[None, :]) / params.K
    return xs, ps, grid


# ---------------------------------------------------------------------------
# Fock-basis operators
# ---------------------------------------------------------------------------

def displacement_element(l: int, k: int, lam: float, t: float = 0.0) -> complex:
    """<l| exp(i(X cos t + P sin t)) |k> in the number basis.

    For l <= k this is
    exp(-lam/4 + i(k-l)(pi/2 - t)) sqrt(l!/k!) (lam/2)^((k-l)/2) L_l^{k-l}(lam/2);
    the l > k elements follow from the adjoint, which is the same operator
    at phase t + pi.
    """
    if l < 0 or k < 0:
        raise ValueError("Fock indices must be >= 0")
    if l > k:
        return displacement_element(k, l, lam, t + math.pi).conjugate()
    d = k - l
    lag = float(laguerre_table(l, d, 0.5 * lam)[l])
    if d == 0:
        mag = math.exp(-0.25 * lam) * lag
    else:
        log_mag = (
            -0.25 * lam
            + 0.5 * (math.lgamma(l + 1) - math.lgamma(k + 1))
            + 0.5 * d * math.log(0.5 * lam)
        )
        mag = math.exp(log_mag) * lag
    return complex(mag * np.exp(1j * d * (0.5 * math.pi - t)))


def displacement_matrix(cutoff: int, lam: float, t: float = 0.0, scale: float = 1.0) -> np.ndarray:
    """Truncated matrix of exp(i*scale*(X cos t + P sin t)).

    ``scale`` multiplies the phase-space wavevector; the Laguerre argument
    becomes lam*scale^2/2.
    """
    x = 0.5 * lam * scale * scale
    out = np.zeros((cutoff, cutoff), dtype=complex)
    if x == 0.0:
        np.fill_diagonal(out, 1.0)
        return out
    logx = math.log(x)
    lf = np.array([math.lgamma(n + 1.0) for n in range(cutoff)])
    for d in range(cutoff):
        n_rows = cutoff - d
        lag = laguerre_table(n_rows - 1, d, x)
        rows = np.arange(n_rows)
        log_mag = -0.5 * x + 0.5 * (lf[rows] - lf[rows + d]) + 0.5 * d * logx
        upper = np.exp(log_mag) * lag * np.exp(1j * d * (0.5 * math.pi - t))
        out[rows, rows + d] = upper
        if d > 0:
            # <k|M|l> = conj(<l|M(t+pi)|k>) for k > l
            out[rows + d, rows] = (upper * np.exp(1j * d * math.pi)).conj()
    return out


def build_rwa_fock(params: ModelParams, cutoff: int = DEFAULT_CUTOFF) -> FockOperator:
    """H_RWA for general q0 in the number basis (Hermitian by construction)."""
    if cutoff < 16:
        raise ValueError("Fock cutoff must be >= 16")
    acc = np.zeros((cutoff, cutoff), dtype=complex)
    for j in range(1, params.q0 + 1):
        acc += displacement_matrix(cutoff, params.lam, 2.0 * math.pi * j / params.q0)
    h = params.K / (2.0 * params.q0) * (acc + acc.conj().T)
    h = 0.5 * (h + h.conj().T)
    return FockOperator(h, hermitian=True, meta={"q0": params.q0, "lam": params.lam, "K": params.K})


def build_hsq_fock(params: ModelParams, cutoff: int = DEFAULT_CUTOFF) -> FockOperator:
    """(K/2)(cos X + cos P) in the number basis, irrespective of ``params.q0``."""
    if cutoff < 16:
        raise ValueError("Fock cutoff must be >= 16")
    mx = displacement_matrix(cutoff, params.lam, 0.0)
    mp = displacement_matrix(cutoff, params.lam, 0.5 * math.pi)
    h = 0.25 * params.K * (mx + mx.conj().T + mp + mp.conj().T)
    h = 0.5 * (h + h.conj().T)
    return FockOperator(h, hermitian=True, meta={"q0": 4, "lam": params.lam, "K": params.K})


def alpha_from_xp(X: float, P: float, lam: float) -> complex:
    """Coherent amplitude with <X> = X and <P> = P."""
    return complex(X, P) / math.sqrt(2.0 * lam)


def coherent_vector(alpha: complex, cutoff: int) -> np.ndarray:
    """exp(-|alpha|^2/2) alpha^n / sqrt(n!) for n < cutoff."""
    out = np.empty(cutoff, dtype=complex)
    out[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, cutoff):
        out[n] = out[n - 1] * alpha / math.sqrt(n)
    return out


def coherent_expectation(op: FockOperator, alpha: complex, lam: float | None = None) -> complex:
    """<alpha| op |alpha> using the truncated coherent-state vector.

    Reliable when cutoff >= 4|alpha|^2 + 40. Raises CutoffTooSmall when
    the truncated vector has lost more than 1e-8 of its norm. ``lam`` is
    accepted for signature symmetry with :func:`alpha_from_xp`.
    """
    vec = coherent_vector(alpha, op.cutoff)
    norm = float(np.vdot(vec, vec).real)
    if norm < 1.0 - 1e-8:
        raise CutoffTooSmall(
            f"coherent state |alpha|^2={abs(alpha) ** 2:.3g} not contained in cutoff {op.cutoff}"
        )
    return complex(np.vdot(vec, op.matrix @ vec))


def audit_cutoff(params: ModelParams, cutoff: int, alphas, tol: float = 1e-8) -> float:
    """Double the cutoff and check coherent expectations of H_sq move < ``tol``.

    Returns the largest shift observed; raises CutoffTooSmall otherwise.
    """
    small = build_hsq_fock(params, cutoff)
    large = build_hsq_fock(params, 2 * cutoff)
    worst = 0.0
    for a in alphas:
        shift = abs(coherent_expectation(small, a) - coherent_expectation(large, a))
        worst = max(worst, shift)
    if worst > tol:
        raise CutoffTooSmall(f"cutoff {cutoff} shifts expectations by {worst:.2e}")
    return worst


def geometric_phase(xi1: complex, xi2: complex) -> float:
    """Signed area S = Im(xi2 * conj(xi1)) / 2 enclosed by composing two displacements.

    The accumulated phase factor is exp(i S / lambda).
    """
    return 0.5 * (complex(xi2) * complex(xi1).conjugate()).imag
