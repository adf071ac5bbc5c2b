"""Special functions and quadrature.

Everything here is implemented from recurrences and series so that results
do not depend on which scipy build is installed. The functions accept
scalars or numpy arrays for the argument and are pure.

Method notes
------------
* Hermite (physicists') and generalised Laguerre polynomials use the
  standard forward three-term recurrences.
* ``I0`` uses its power series up to x = 30 and the Hankel asymptotic
  series above, both carried in the exponentially scaled form e^{-x} I0(x).
* ``J_j`` uses Miller's downward recurrence normalised with
  J0 + 2 sum_k J_2k = 1.
* :func:`integrate` is a globally adaptive 7/15-point Gauss-Kronrod rule.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonConvergence

__all__ = [
    "QuadratureSpec",
    "hermite",
    "hermite_table",
    "laguerre_gen",
    "laguerre_table",
    "bessel_i0",
    "bessel_i0e",
    "bessel_j",
    "bessel_j_table",
    "integrate",
    "log_factorial",
    "log_gamma_ratio",
]


# ---------------------------------------------------------------------------
# Orthogonal polynomials
# ---------------------------------------------------------------------------

def hermite(n: int, x):
    """Physicists' Hermite polynomial H_n(x).

    Uses H_{m+1} = 2x H_m - 2m H_{m-1}. Complex arguments are accepted.
    Very large ``n * |x|`` overflows to +-inf; no rescaling is attempted.
    """
    if n < 0:
        raise ValueError("hermite degree must be >= 0")
    x = np.asarray(x)
    h_prev = np.ones_like(x, dtype=np.result_type(x, float))
    if n == 0:
        return h_prev[()] if h_prev.ndim == 0 else h_prev
    h = 2.0 * x + 0.0 * h_prev
    with np.errstate(over="ignore", invalid="ignore"):
        for m in range(1, n):
            h_prev, h = h, 2.0 * x * h - 2.0 * m * h_prev
    return h[()] if np.ndim(h) == 0 else h


def hermite_table(n_max: int, x) -> np.ndarray:
    """Stack of H_0..H_{n_max} evaluated at ``x``; shape (n_max+1, *x.shape)."""
    x = np.asarray(x)
    out = np.empty((n_max + 1,) + x.shape, dtype=np.result_type(x, float))
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 2.0 * x
    with np.errstate(over="ignore", invalid="ignore"):
        for m in range(1, n_max):
            out[m + 1] = 2.0 * x * out[m] - 2.0 * m * out[m - 1]
    return out


def laguerre_gen(n: int, k: int, x):
    """Generalised Laguerre polynomial L_n^k(x) for n >= 0, k >= -n.

    Recurrence: (m+1) L_{m+1} = (2m+1+k-x) L_m - (m+k) L_{m-1}.
    """
    if n < 0:
        raise ValueError("laguerre degree must be >= 0")
    if k < -n:
        raise ValueError("laguerre order must satisfy k >= -n")
    x = np.asarray(x, dtype=float)
    l_prev = np.ones_like(x)
    if n == 0:
        return l_prev[()] if l_prev.ndim == 0 else l_prev
    l_cur = 1.0 + k - x
    for m in range(1, n):
        l_prev, l_cur = l_cur, ((2 * m + 1 + k - x) * l_cur - (m + k) * l_prev) / (m + 1)
    return l_cur[()] if np.ndim(l_cur) == 0 else l_cur


def laguerre_table(n_max: int, k: int, x) -> np.ndarray:
    """Stack of L_0^k..L_{n_max}^k at ``x``; shape (n_max+1, *x.shape)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 1.0 + k - x
    for m in range(1, n_max):
        out[m + 1] = ((2 * m + 1 + k - x) * out[m] - (m + k) * out[m - 1]) / (m + 1)
    return out


# ---------------------------------------------------------------------------
# Modified Bessel I0
# ---------------------------------------------------------------------------

_I0_SWITCH = 30.0


def _i0e_series(x: np.ndarray) -> np.ndarray:
    term = np.exp(-x)
    total = term.copy()
    q = 0.25 * x * x
    for m in range(1, 200):
        term = term * q / (m * m)
        total += term
        if np.all(term <= 1e-17 * total):
            break
    return total


def _i0e_asymptotic(x: np.ndarray) -> np.ndarray:
    term = np.ones_like(x)
    total = term.copy()
    for k in range(1, 80):
        nxt = term * (2 * k - 1) ** 2 / (k * 8.0 * x)
        if np.all(np.abs(nxt) <= 1e-17 * total) or np.any(np.abs(nxt) > np.abs(term)):
            break
        term = nxt
        total += term
    return total / np.sqrt(2.0 * np.pi * x)


def bessel_i0e(x):
    """Exponentially scaled modified Bessel function e^{-x} I0(x), x >= 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("bessel_i0e requires x >= 0")
    flat = np.atleast_1d(x).ravel()
    out = np.empty_like(flat)
    small = flat <= _I0_SWITCH
    if np.any(small):
        out[small] = _i0e_series(flat[small])
    if np.any(~small):
        out[~small] = _i0e_asymptotic(flat[~small])
    out = out.reshape(np.shape(x))
    return out[()] if out.ndim == 0 else out


def bessel_i0(x):
    """Modified Bessel function I0(x), x >= 0 (overflows beyond x ~ 713)."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        return bessel_i0e(x) * np.exp(x)


# ---------------------------------------------------------------------------
# Bessel J via Miller's algorithm
# ---------------------------------------------------------------------------

def _miller_start(j_max: int, x_max: float) -> int:
    top = max(j_max, int(math.ceil(x_max)), 1)
    start = top + 20 + int(math.sqrt(40.0 * top))
    return start + (start % 2)


def bessel_j_table(j_max: int, x) -> np.ndarray:
    """J_0..J_{j_max} at each point of ``x``; shape (j_max+1, *x.shape).

    Negative orders follow from J_{-j} = (-1)^j J_j.
    """
    if j_max < 0:
        raise ValueError("j_max must be >= 0")
    x = np.asarray(x, dtype=float)
    shape = x.shape
    xf = np.atleast_1d(x).ravel()
    ax = np.abs(xf)
    out = np.zeros((j_max + 1, xf.size))
    zero = ax == 0.0
    out[0, zero] = 1.0
    nz = ~zero
    if np.any(nz):
        a = ax[nz]
        start = _miller_start(j_max, float(a.max()))
        j_next = np.zeros_like(a)
        j_cur = np.full_like(a, 1e-300)
        norm = np.zeros_like(a)
        vals = np.zeros((j_max + 1, a.size))
        for k in range(start, 0, -1):
            j_prev = (2.0 * k / a) * j_cur - j_next
            j_next, j_cur = j_cur, j_prev
            # j_cur now holds the (unnormalised) value of order k-1
            order = k - 1
            if order % 2 == 0 and order > 0:
                norm += 2.0 * j_cur
            if order <= j_max:
                vals[order] = j_cur
            big = np.abs(j_cur) > 1e250
            if np.any(big):
                scale = np.where(big, 1e-250, 1.0)
                j_cur *= scale
                j_next *= scale
                norm *= scale
                vals *= scale
        norm += vals[0]
        vals /= norm
        out[:, nz] = vals
    neg = xf < 0
    if np.any(neg):
        odd = np.arange(j_max + 1) % 2 == 1
        out[np.ix_(odd, neg)] *= -1.0
    return out.reshape((j_max + 1,) + shape)


def bessel_j(j: int, x):
    """Bessel function of the first kind J_j(x) for integer order ``j``."""
    order = abs(int(j))
    val = bessel_j_table(order, x)[order]
    if j < 0 and order % 2 == 1:
        val = -val
    return val[()] if np.ndim(val) == 0 else val


# ---------------------------------------------------------------------------
# Log-space combinatorics
# ---------------------------------------------------------------------------

def log_factorial(n: int) -> float:
    return math.lgamma(n + 1.0)


def log_gamma_ratio(a: float, b: float) -> float:
    """log(Gamma(a) / Gamma(b)) for positive a, b."""
    return math.lgamma(a) - math.lgamma(b)


# ---------------------------------------------------------------------------
# Adaptive Gauss-Kronrod quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureSpec:
    """Integration window [center - half_width, center + half_width] and accuracy."""

    half_width: float
    tol: float = 1e-10
    max_depth: int = 30
    center: float = 0.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be > 0")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


# Kronrod 15-point abscissae/weights with embedded 7-point Gauss weights
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_WEIGHTS_K = np.concatenate([_WK[:-1], _WK[::-1]])
_WEIGHTS_G = np.zeros(15)
_WEIGHTS_G[1:7:2] = _WG[:3]
_WEIGHTS_G[7] = _WG[3]
_WEIGHTS_G[9:15:2] = _WG[2::-1]


def _gk15(f, a: float, b: float) -> tuple[float, float]:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    fx = np.asarray(f(mid + half * _NODES), dtype=float)
    if not np.all(np.isfinite(fx)):
        raise NonConvergence(f"integrand not finite on [{a}, {b}]")
    k = half * float(_WEIGHTS_K @ fx)
    g = half * float(_WEIGHTS_G @ fx)
    return k, abs(k - g)


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    spec: QuadratureSpec,
    initial_panels: int = 8,
) -> tuple[float, float]:
    """Integrate ``f`` over the window in ``spec``; returns (value, error estimate).

    ``f`` must accept a 1-D array of abscissae and return values of the same
    shape. The panel with the largest error is bisected until the summed
    error is below ``spec.tol`` or a panel would exceed ``spec.max_depth``
    bisections. Raises :class:`NonConvergence` if the final estimate is
    more than ten times the tolerance.
    """
    a = spec.center - spec.half_width
    width = 2.0 * spec.half_width / initial_panels
    heap = []
    total = 0.0
    err = 0.0
    for i in range(initial_panels):
        lo = a + i * width
        hi = lo + width
        val, e = _gk15(f, lo, hi)
        total += val
        err += e
        heapq.heappush(heap, (-e, lo, hi, val, 0))
    exhausted = False
    while err > spec.tol and heap:
        neg_e, lo, hi, val, depth = heapq.heappop(heap)
        if depth >= spec.max_depth:
            heapq.heappush(heap, (neg_e, lo, hi, val, depth))
            exhausted = True
            break
        mid = 0.5 * (lo + hi)
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        total += v1 + v2 - val
        err += e1 + e2 + neg_e
        heapq.heappush(heap, (-e1, lo, mid, v1, depth + 1))
        heapq.heappush(heap, (-e2, mid, hi, v2, depth + 1))
    # re-sum to shed accumulated rounding in the running totals
    total = math.fsum(item[3] for item in heap)
    err = math.fsum(-item[0] for item in heap)
    if exhausted and err > 10.0 * spec.tol:
        raise NonConvergence(
            f"quadrature error {err:.3e} exceeds 10x tolerance {spec.tol:.1e}"
        )
    return total, err
