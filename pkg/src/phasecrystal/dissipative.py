"""Kicked, damped oscillator evolved through the characteristic function.

The state is held as w(s, k) = <exp(i(k x + s p)/lambda)>, the Fourier
transform of the Wigner function, sampled on a square grid s, k in
[-L, L) with N points per axis. Each kick period applies two exact maps:

* damping + free rotation by tau (Lindblad, thermal occupation n0)::

      w'(s, k) = exp(-(n0 + 1/2)(1 - e^{-kappa tau})(s^2 + k^2) / (2 lambda))
                 * w(s_r, k_r)
      s_r = e^{-kappa tau/2} (k sin tau + s cos tau)
      k_r = e^{-kappa tau/2} (k cos tau - s sin tau)

* the kick exp(-i K tau cos x / lambda), expanded with Jacobi-Anger::

      w'(s, k) = sum_j J_j(2 K tau sin(s/2) / lambda) w(s, k + j lambda)

Off-grid reads use tensor-product Lagrange interpolation with ``order``
nodes per axis (order 2 is bilinear) and points outside the grid read
zero. Grid points that land on nodes to
within 1e-9 of a cell are snapped, so a quarter turn on a q0 = 4 grid is
exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from ._accel import njit, pick
from .errors import DomainTooSmall
from .lattice import ModelParams
from .specfun import bessel_j_table

__all__ = [
    "CharGrid",
    "QGrid",
    "EnergyRecord",
    "Evolution",
    "init_state",
    "dissipative_step",
    "kick_step",
    "choose_j_max",
    "evolve",
    "iter_evolve",
    "husimi_from_char",
    "mean_energy",
    "moments",
    "grid_checks",
]

BOUNDARY_TOL = 1e-10
DEFAULT_ORDER = 8
_SNAP = 1e-9


@dataclass
class CharGrid:
    """Samples w[i, j] = w(s_i, k_j) with s_i = k_i = -L + i * 2L/N."""

    L: float
    N: int
    lam: float
    w: np.ndarray

    def __post_init__(self):
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")
        if not self.L > 0 or not self.lam > 0:
            raise ValueError("L and lambda must be positive")
        if self.w.shape != (self.N, self.N):
            raise ValueError("sample array does not match N")

    @property
    def ds(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.ds * np.arange(self.N)

    def copy(self) -> "CharGrid":
        return replace(self, w=self.w.copy())

    def trace(self) -> complex:
        c = self.N // 2
        return complex(self.w[c, c])

    def rows(self):
        """Yield (s, k, Re w, Im w)."""
        ax = self.axis
        for i in range(self.N):
            for j in range(self.N):
                v = self.w[i, j]
                yield float(ax[i]), float(ax[j]), float(v.real), float(v.imag)


@dataclass
class QGrid:
    """Husimi function Q(X, P) = <alpha|rho|alpha> on the FFT-conjugate grid.

    ``norm`` records sum Q dX dP / (2 pi lambda), which is 1 for a state
    contained in the window.
    """

    X: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    lam: float
    norm: float = field(default=float("nan"))

    def rows(self):
        for i, x in enumerate(self.X):
            for j, p in enumerate(self.P):
                yield float(x), float(p), float(self.Q[i, j])

    def local_maxima(self, rel_threshold: float = 0.05) -> np.ndarray:
        """(X, P) of strict 8-neighbour maxima above ``rel_threshold`` * max."""
        q = self.Q
        core = q[1:-1, 1:-1]
        mask = core > rel_threshold * q.max()
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                nb = q[1 + di : q.shape[0] - 1 + di, 1 + dj : q.shape[1] - 1 + dj]
                mask &= core > nb
        ii, jj = np.nonzero(mask)
        return np.column_stack([self.X[ii + 1], self.P[jj + 1]])


# ---------------------------------------------------------------------------
# Initial states
# ---------------------------------------------------------------------------

def init_state(kind: str = "ground", L: float = 25.6, N: int = 512, lam: float = 1.0,
               X0: float = 0.0, P0: float = 0.0) -> CharGrid:
    """Vacuum (``"ground"``) or coherent state centred at (X0, P0).

    The coherent grid is exp(-(s^2 + k^2)/(4 lam)) exp(i(k X0 + s P0)/lam),
    which yields <x> = X0 and <p> = P0 under the w(s, k) convention above.
    """
    g = CharGrid(L, N, lam, np.zeros((N, N), dtype=complex))
    s = g.axis[:, None]
    k = g.axis[None, :]
    env = np.exp(-(s * s + k * k) / (4.0 * lam))
    if kind == "ground":
        g.w = env.astype(complex)
    elif kind == "coherent":
        g.w = env * np.exp(1j * (k * X0 + s * P0) / lam)
    else:
        raise ValueError(f"unknown initial state {kind!r}")
    edge = max(np.abs(g.w[0]).max(), np.abs(g.w[:, 0]).max(),
               np.abs(g.w[-1]).max(), np.abs(g.w[:, -1]).max())
    if edge > BOUNDARY_TOL:
        raise DomainTooSmall(f"|w| = {edge:.2e} on the boundary; increase L")
    return g


# ---------------------------------------------------------------------------
# Interpolation stencils
# ---------------------------------------------------------------------------

@njit
def _fill_weights(t, m, wts):
    lo = -(m // 2) + 1
    for a in range(m):
        xa = lo + a
        v = 1.0
        for b in range(m):
            if b != a:
                xb = lo + b
                v *= (t - xb) / (xa - xb)
        wts[a] = v


@njit
def _lagrange_weights(t, m):
    """Weights of the m-point Lagrange stencil at nodes -m/2+1 .. m/2 for offset t in [0, 1)."""
    wts = np.empty(m)
    _fill_weights(t, m, wts)
    return wts


def _split(f):
    """Integer base and fraction, snapping to the node when within 1e-9 of it."""
    r = np.floor(f + 0.5)
    f = np.where(np.abs(f - r) < _SNAP, r, f)
    base = np.floor(f)
    return base.astype(np.int64), f - base


# ---------------------------------------------------------------------------
# Damping + rotation
# ---------------------------------------------------------------------------

@njit
def _rotate_nb(w, s0, ds, c, sn, shrink, gauss, m):
    n = w.shape[0]
    out = np.zeros_like(w)
    lo = -(m // 2) + 1
    wi = np.empty(m)
    wj = np.empty(m)
    for i in range(n):
        s = s0 + ds * i
        for j in range(n):
            k = s0 + ds * j
            fi = (shrink * (k * sn + s * c) - s0) / ds
            fj = (shrink * (k * c - s * sn) - s0) / ds
            ri = np.floor(fi + 0.5)
            rj = np.floor(fj + 0.5)
            if abs(fi - ri) < 1e-9:
                fi = ri
            if abs(fj - rj) < 1e-9:
                fj = rj
            if fi < 0.0 or fj < 0.0 or fi > n - 1 or fj > n - 1:
                continue
            i0 = int(np.floor(fi))
            j0 = int(np.floor(fj))
            ti = fi - i0
            tj = fj - j0
            acc = 0.0 + 0.0j
            if ti == 0.0 and tj == 0.0:
                acc = w[i0, j0]
            else:
                _fill_weights(ti, m, wi)
                _fill_weights(tj, m, wj)
                for a in range(m):
                    ii = i0 + lo + a
                    if ii < 0 or ii > n - 1:
                        continue
                    row = 0.0 + 0.0j
                    for b in range(m):
                        jj = j0 + lo + b
                        if jj < 0 or jj > n - 1:
                            continue
                        row += wj[b] * w[ii, jj]
                    acc += wi[a] * row
            out[i, j] = acc * np.exp(-gauss * (s * s + k * k))
    return out


def _weights_np(t, m):
    lo = -(m // 2) + 1
    nodes = lo + np.arange(m)
    wts = []
    for a in range(m):
        v = np.ones_like(t)
        for b in range(m):
            if b != a:
                v = v * (t - nodes[b]) / (nodes[a] - nodes[b])
        wts.append(v)
    return wts


def _rotate_np(w, s0, ds, c, sn, shrink, gauss, m):
    n = w.shape[0]
    ax = s0 + ds * np.arange(n)
    s = ax[:, None]
    k = ax[None, :]
    fi = (shrink * (k * sn + s * c) - s0) / ds
    fj = (shrink * (k * c - s * sn) - s0) / ds
    i0, ti = _split(fi)
    j0, tj = _split(fj)
    inside = (i0 >= 0) & (j0 >= 0) & (i0 + (ti > 0) <= n - 1) & (j0 + (tj > 0) <= n - 1)
    wi = _weights_np(ti, m)
    wj = _weights_np(tj, m)
    lo = -(m // 2) + 1
    padded = np.zeros((n + 2 * m, n + 2 * m), dtype=w.dtype)
    padded[m:m + n, m:m + n] = w
    i0c = np.clip(i0, -(m // 2), n + m // 2 - 1)
    j0c = np.clip(j0, -(m // 2), n + m // 2 - 1)
    acc = np.zeros(fi.shape, dtype=complex)
    for a in range(m):
        for b in range(m):
            acc += wi[a] * wj[b] * padded[i0c + lo + a + m, j0c + lo + b + m]
    return np.where(inside, acc * np.exp(-gauss * (s * s + k * k)), 0.0)


_rotate = pick(_rotate_nb, _rotate_np)


def dissipative_step(g: CharGrid, params: ModelParams, order: int = DEFAULT_ORDER) -> CharGrid:
    """Free rotation by tau with damping rate kappa and thermal occupation n0.

    ``order`` is the number of interpolation nodes per axis (2 is bilinear).
    """
    _check_order(order)
    tau = params.tau
    decay = 1.0 - math.exp(-params.kappa * tau)
    gauss = (params.n0 + 0.5) * decay / (2.0 * g.lam)
    shrink = math.exp(-0.5 * params.kappa * tau)
    out = _rotate(g.w, -g.L, g.ds, math.cos(tau), math.sin(tau), shrink, gauss, order)
    return replace(g, w=out)


def _check_order(order):
    if order not in (2, 4, 6, 8):
        raise ValueError("interpolation order must be 2, 4, 6 or 8")


# ---------------------------------------------------------------------------
# Kick
# ---------------------------------------------------------------------------

def choose_j_max(K: float, tau: float, lam: float, tol: float = 1e-14) -> int:
    """Smallest j with |J_j(2|K| tau / lam)| below ``tol`` (and every larger order)."""
    x = 2.0 * abs(K) * tau / lam
    if x == 0.0:
        return 0
    top = int(x + 10.0 * x ** (1.0 / 3.0) + 40)
    tab = np.abs(bessel_j_table(top, np.array([x]))[:, 0])
    for j in range(top + 1):
        if np.all(tab[j:] < tol):
            return j
    return top


def _shift_stencils(shift, j_max, m):
    """Per-order base offset and weights for reading w(s, k + j lam)."""
    bases = np.empty(2 * j_max + 1, dtype=np.int64)
    wts = np.zeros((2 * j_max + 1, m))
    for idx, jj in enumerate(range(-j_max, j_max + 1)):
        b, t = _split(np.array(jj * shift))
        bases[idx] = int(b)
        if float(t) == 0.0:
            wts[idx, (m // 2) - 1] = 1.0
        else:
            wts[idx] = _lagrange_weights(float(t), m)
    return bases, wts


@njit
def _kick_nb(w, coef, bases, wts):
    n = w.shape[0]
    m = wts.shape[1]
    lo = -(m // 2) + 1
    out = np.zeros_like(w)
    for jj in range(coef.shape[0]):
        base = bases[jj]
        for i in range(n):
            c = coef[jj, i]
            if c == 0.0:
                continue
            for j in range(n):
                acc = 0.0 + 0.0j
                for b in range(m):
                    wb = wts[jj, b]
                    if wb == 0.0:
                        continue
                    src = j + base + lo + b
                    if src < 0 or src > n - 1:
                        continue
                    acc += wb * w[i, src]
                out[i, j] += c * acc
    return out


def _kick_np(w, coef, bases, wts):
    n = w.shape[0]
    m = wts.shape[1]
    lo = -(m // 2) + 1
    pad = int(np.max(np.abs(bases))) + m + 1
    padded = np.zeros((n, n + 2 * pad), dtype=w.dtype)
    padded[:, pad:pad + n] = w
    out = np.zeros_like(w)
    for jj in range(coef.shape[0]):
        shifted = np.zeros_like(w)
        for b in range(m):
            if wts[jj, b] != 0.0:
                start = pad + bases[jj] + lo + b
                shifted += wts[jj, b] * padded[:, start:start + n]
        out += coef[jj][:, None] * shifted
    return out


_kick = pick(_kick_nb, _kick_np)


def _kick_coefficients(g: CharGrid, params: ModelParams, j_max: int) -> np.ndarray:
    z = 2.0 * params.K * params.tau * np.sin(0.5 * g.axis) / g.lam
    tab = bessel_j_table(j_max, z)  # (j_max+1, N)
    neg = tab[1:][::-1] * np.where(np.arange(j_max, 0, -1) % 2, -1.0, 1.0)[:, None]
    return np.ascontiguousarray(np.concatenate([neg, tab], axis=0))


def kick_step(g: CharGrid, params: ModelParams, j_max: int | None = None,
              order: int = DEFAULT_ORDER, _coef: np.ndarray | None = None) -> CharGrid:
    """Apply exp(-i K tau cos x / lambda) to the state held in ``g``."""
    if params.K == 0.0:
        return g.copy()
    if j_max is None:
        j_max = choose_j_max(params.K, params.tau, g.lam)
    _check_order(order)
    coef = _coef if _coef is not None else _kick_coefficients(g, params, j_max)
    bases, wts = _shift_stencils(g.lam / g.ds, j_max, order)
    out = _kick(g.w, coef, bases, wts)
    return replace(g, w=out)


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------

def _marginal_second_moment(line: np.ndarray, dk: float, lam: float) -> tuple:
    """<y>, <y^2> of the density whose characteristic function is ``line``.

    ``line[j]`` samples <exp(i k_j y / lam)> on k_j = -L + j dk with k = 0
    at j = N/2. The density is recovered by FFT on the conjugate grid.
    """
    n = line.size
    dens = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(line))).real
    y = np.fft.fftshift(np.fft.fftfreq(n, d=dk)) * 2.0 * math.pi * lam
    dens = dens / dens.sum()
    return float((y * dens).sum()), float((y * y * dens).sum())


def _fd_second_derivative(line: np.ndarray, c: int, h: float) -> complex:
    return (-line[c + 2] + 16 * line[c + 1] - 30 * line[c] + 16 * line[c - 1] - line[c - 2]) / (12 * h * h)


def moments(g: CharGrid, method: str = "spectral") -> dict:
    """First and second moments of x and p."""
    c = g.N // 2
    if method == "spectral":
        mx, x2 = _marginal_second_moment(g.w[c, :], g.ds, g.lam)
        mp, p2 = _marginal_second_moment(g.w[:, c], g.ds, g.lam)
    elif method == "fd":
        h = g.ds
        row, col = g.w[c, :], g.w[:, c]
        x2 = float((-g.lam ** 2 * _fd_second_derivative(row, c, h)).real)
        p2 = float((-g.lam ** 2 * _fd_second_derivative(col, c, h)).real)
        d1 = lambda v: (-v[c + 2] + 8 * v[c + 1] - 8 * v[c - 1] + v[c - 2]) / (12 * h)
        mx = float((-1j * g.lam * d1(row)).real)
        mp = float((-1j * g.lam * d1(col)).real)
    else:
        raise ValueError(f"unknown method {method!r}")
    return {"x": mx, "p": mp, "x2": x2, "p2": p2}


def mean_energy(g: CharGrid, method: str = "spectral") -> tuple:
    """Return (<x^2 + p^2>/2, lambda <a^dagger a>).

    ``method="spectral"`` reads the moments from the FFT of the k-axis and
    s-axis cuts through the origin; ``"fd"`` uses 4th-order central
    differences at the origin, adequate only for states much narrower
    than lambda / ds.
    """
    m = moments(g, method)
    half = 0.5 * (m["x2"] + m["p2"])
    return half, half - 0.5 * g.lam


def husimi_from_char(g: CharGrid) -> QGrid:
    """Q(X, P) = <alpha|rho|alpha> via FFT of w(s, k) exp(-(s^2 + k^2)/(4 lam)).

    The output axes span [-pi lam / ds, pi lam / ds).
    """
    ax = g.axis
    cq = g.w * np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (4.0 * g.lam))
    # rows are s (conjugate to P), columns are k (conjugate to X)
    spec = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(cq)))
    q = (spec.real * g.ds * g.ds / (2.0 * math.pi * g.lam)).T
    conj_axis = np.fft.fftshift(np.fft.fftfreq(g.N, d=g.ds)) * 2.0 * math.pi * g.lam
    dx = conj_axis[1] - conj_axis[0]
    norm = float(q.sum() * dx * dx / (2.0 * math.pi * g.lam))
    return QGrid(conj_axis.copy(), conj_axis.copy(), q, g.lam, norm)


def grid_checks(g: CharGrid) -> dict:
    """Trace error |w(0,0) - 1|, hermiticity error max|w(-s,-k) - conj w(s,k)|
    and the largest |w| on the grid edge.

    Kicks widen the support of w; once the edge value grows past about
    1e-10 the zero extension starts to break hermiticity and L should grow.
    """
    inner = g.w[1:, 1:]
    flipped = inner[::-1, ::-1]
    w = np.abs(g.w)
    return {
        "trace_error": abs(g.trace() - 1.0),
        "hermiticity_error": float(np.max(np.abs(flipped - inner.conj()))),
        "boundary": float(max(w[0].max(), w[-1].max(), w[:, 0].max(), w[:, -1].max())),
    }


# ---------------------------------------------------------------------------
# Time evolution
# ---------------------------------------------------------------------------

@dataclass
class EnergyRecord:
    kick: int
    half_moment: float
    number_energy: float


@dataclass
class Evolution:
    final: CharGrid
    energies: list
    snapshots: dict


def iter_evolve(g: CharGrid, params: ModelParams, n_kicks: int, j_max: int | None = None,
                energy_method: str = "spectral", order: int = DEFAULT_ORDER) -> Iterator[tuple]:
    """Yield (kick index, grid, energies) after every damping + kick pair."""
    if n_kicks < 1:
        raise ValueError("n_kicks must be >= 1")
    if abs(params.lam - g.lam) > 1e-15 * g.lam:
        raise ValueError("grid lambda differs from model lambda")
    if j_max is None:
        j_max = choose_j_max(params.K, params.tau, g.lam)
    coef = _kick_coefficients(g, params, j_max) if params.K != 0 else None
    cur = g
    for n in range(1, n_kicks + 1):
        cur = dissipative_step(cur, params, order)
        if coef is not None:
            cur = kick_step(cur, params, j_max, order, _coef=coef)
        yield n, cur, mean_energy(cur, energy_method)


def evolve(g: CharGrid, params: ModelParams, n_kicks: int, record_every: int = 0,
           j_max: int | None = None, energy_method: str = "spectral",
           order: int = DEFAULT_ORDER) -> Evolution:
    """Run ``n_kicks`` periods; keep a snapshot every ``record_every`` kicks (0: final only)."""
    half, num = mean_energy(g, energy_method)
    energies = [EnergyRecord(0, half, num)]
    snaps = {}
    cur = g
    for n, cur, (half, num) in iter_evolve(g, params, n_kicks, j_max, energy_method, order):
        energies.append(EnergyRecord(n, half, num))
        if record_every and n % record_every == 0:
            snaps[n] = cur
    snaps[n_kicks] = cur
    return Evolution(cur, energies, snaps)
