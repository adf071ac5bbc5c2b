"""Quasienergy bands of the square phase-space lattice (q0 = 4).

For lambda / 2pi = p/q the RWA Hamiltonian (K/2)(cos X + cos P) reduces,
in Zak's kq basis, to a q x q cyclic tridiagonal (Harper) matrix. Its
eigenvalues times K/4 are the quasienergies. The Chern numbers use the
gauge-invariant plaquette (link-variable) discretisation of the Berry flux.

Conventions
-----------
* ``harper_matrix`` is written for the gauge-transformed amplitudes
  ``ubar_m = exp(i m lam kP) u_m``: unit hoppings, on-site
  ``2 cos(lam (kX + m))`` and the twist ``exp(-+ i 2 pi p kP)`` on the
  wrap-around bond. In this gauge the matrix is strictly periodic with
  periods q/p in kX and 1/p in kP; that torus is where Chern numbers are
  integrated.
* Eigenstate wavefunctions use the kq comb whose teeth sit at
  ``X_l = -lam kP + 2 pi l / q``; with that placement the recursion for
  ``u_m`` carries exp(-i lam kP) on u_{m-1} and exp(+i lam kP) on u_{m+1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .errors import GapClosure, NonConvergence, SecularMismatch

__all__ = [
    "RationalFlux",
    "BlochK",
    "BandSpectrum",
    "ZakState",
    "ButterflyBand",
    "harper_matrix",
    "harper_matrices",
    "quasienergies",
    "secular_residual",
    "band_surface",
    "butterfly",
    "degeneracy_check",
    "chern_number",
    "chern_report",
    "diophantine_gap_labels",
    "zak_state",
    "eigenstate_q_function",
]

SECULAR_CHECK_TOL = 1e-6
GAP_TOL = 1e-10


@dataclass(frozen=True)
class RationalFlux:
    """lambda / 2pi = p / q in lowest terms."""

    p: int
    q: int

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ValueError("flux needs positive p and q")
        if math.gcd(self.p, self.q) != 1:
            raise ValueError(f"p={self.p} and q={self.q} are not coprime")

    @property
    def lam(self) -> float:
        return 2.0 * math.pi * self.p / self.q

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.p, self.q)

    @classmethod
    def from_fraction(cls, frac) -> "RationalFlux":
        f = Fraction(frac)
        return cls(f.numerator, f.denominator)

    def __str__(self):
        return f"{self.p}/{self.q}"


class BlochK(NamedTuple):
    kX: float
    kP: float


@dataclass
class BandSpectrum:
    """Quasienergies E[b, i, j] at kX_axis[i], kP_axis[j] (ascending in b)."""

    flux: RationalFlux
    K: float
    kX: np.ndarray
    kP: np.ndarray
    energies: np.ndarray

    @property
    def n_bands(self) -> int:
        return self.energies.shape[0]

    def rows(self):
        """Yield (kX, kP, band, E) with 1-based band index."""
        for i, kx in enumerate(self.kX):
            for j, kp in enumerate(self.kP):
                for b in range(self.n_bands):
                    yield float(kx), float(kp), b + 1, float(self.energies[b, i, j])


@dataclass
class ZakState:
    """Band eigenstate |psi> = sum_m u_m |phi_(kX+m, kP)> with sum |u_m|^2 = 1."""

    flux: RationalFlux
    k: BlochK
    band: int
    energy: float
    coeffs: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if abs(np.vdot(self.coeffs, self.coeffs).real - 1.0) > 1e-12:
            raise ValueError("Zak coefficients must be normalised")


class ButterflyBand(NamedTuple):
    p: int
    q: int
    lam_over_2pi: float
    band: int
    e_min: float
    e_max: float


# ---------------------------------------------------------------------------
# Harper matrix and secular equation
# ---------------------------------------------------------------------------

def harper_matrices(flux: RationalFlux, kX, kP) -> np.ndarray:
    """Batched Harper matrices; ``kX``/``kP`` broadcast to shape S, result S + (q, q)."""
    kX, kP = np.broadcast_arrays(np.asarray(kX, float), np.asarray(kP, float))
    q, lam = flux.q, flux.lam
    h = np.zeros(kX.shape + (q, q), dtype=complex)
    m = np.arange(q)
    h[..., m, m] = 2.0 * np.cos(lam * (kX[..., None] + m))
    twist = np.exp(1j * 2.0 * math.pi * flux.p * kP)
    if q == 1:
        h[..., 0, 0] += 2.0 * twist.real
        return h
    idx = np.arange(q - 1)
    h[..., idx, idx + 1] += 1.0
    h[..., idx + 1, idx] += 1.0
    h[..., q - 1, 0] += twist
    h[..., 0, q - 1] += twist.conj()
    return h


def harper_matrix(flux: RationalFlux, k, K: float | None = None) -> np.ndarray:
    """q x q Hermitian matrix whose eigenvalues times K/4 are the quasienergies at k.

    ``K`` is accepted for signature symmetry; the matrix is dimensionless.
    """
    kX, kP = k
    return harper_matrices(flux, kX, kP)


def _transfer_half_trace(flux: RationalFlux, a: np.ndarray) -> np.ndarray:
    """1/2 Tr prod_j [[a - 2 cos(j lam), -1], [1, 0]] for an array of a = 4E/K."""
    lam = flux.lam
    # product applied to the identity, tracked column-wise
    m00 = np.ones_like(a)
    m01 = np.zeros_like(a)
    m10 = np.zeros_like(a)
    m11 = np.ones_like(a)
    for j in range(1, flux.q + 1):
        d = a - 2.0 * math.cos(j * lam)
        m00, m01, m10, m11 = m00 * d + m01, -m00, m10 * d + m11, -m10
    return 0.5 * (m00 + m11)


def secular_residual(flux: RationalFlux, k, energies, K: float) -> np.ndarray:
    """|cos(q lam kX) + cos(q lam kP) - 1 - Tr(prod T_j)/2| for each energy."""
    kX, kP = k
    a = 4.0 * np.asarray(energies, dtype=float) / K
    lhs = math.cos(flux.q * flux.lam * kX) + math.cos(flux.q * flux.lam * kP)
    return np.abs(lhs - 1.0 - _transfer_half_trace(flux, a))


def quasienergies(flux: RationalFlux, k, K: float, check: bool = True) -> np.ndarray:
    """Sorted quasienergies at k, cross-checked against the transfer-matrix trace."""
    if K == 0:
        return np.zeros(flux.q)
    ev = np.linalg.eigvalsh(harper_matrix(flux, k))
    e = np.sort(0.25 * K * ev)
    if check:
        res = secular_residual(flux, k, e, K)
        if np.max(res) > SECULAR_CHECK_TOL:
            raise SecularMismatch(
                f"flux {flux} k={tuple(k)}: secular residual {np.max(res):.2e}"
            )
    return e


def band_surface(flux: RationalFlux, K: float, n_kx: int = 41, n_kp: int = 41) -> BandSpectrum:
    """Quasienergies over kX in [0,1), kP in [0,1/p) on a uniform grid."""
    kx = np.arange(n_kx) / n_kx
    kp = np.arange(n_kp) / (n_kp * flux.p)
    h = harper_matrices(flux, kx[:, None], kp[None, :])
    ev = np.linalg.eigvalsh(h)
    e = np.sort(0.25 * K * ev, axis=-1)
    return BandSpectrum(flux, K, kx, kp, np.moveaxis(e, -1, 0))


# ---------------------------------------------------------------------------
# Butterfly and degeneracy
# ---------------------------------------------------------------------------

def _fluxes_up_to(q_max: int, include_one: bool = True):
    for q in range(1, q_max + 1):
        for p in range(1, q + 1):
            if math.gcd(p, q) != 1:
                continue
            if p == q and not (include_one and q == 1):
                continue
            yield RationalFlux(p, q)


def band_intervals(flux: RationalFlux, K: float, n_k: int = 8) -> np.ndarray:
    """[min, max] per band, shape (q, 2), over a k-grid plus the band-edge points.

    Band edges sit where cos(2 pi p kX) and cos(2 pi p kP) are both +1 or
    both -1, so (0, 0) and (1/2p, 1/2p) are always sampled.
    """
    p = flux.p
    grid = np.arange(n_k) / (n_k * p)
    kx = np.concatenate([grid, [0.0, 0.5 / p]])
    kp = np.concatenate([grid, [0.0, 0.5 / p]])
    h = harper_matrices(flux, kx[:, None], kp[None, :])
    e = np.sort(0.25 * K * np.linalg.eigvalsh(h), axis=-1).reshape(-1, flux.q)
    return np.stack([e.min(axis=0), e.max(axis=0)], axis=1)


def butterfly(q_max: int, K: float, n_k: int = 8, fluxes: Sequence[RationalFlux] | None = None):
    """Band intervals for every reduced p/q in (0, 1] with q <= q_max.

    Returns a list of :class:`ButterflyBand` rows ordered by (q, p, band).
    """
    if q_max < 2 and fluxes is None:
        raise ValueError("q_max must be >= 2")
    rows = []
    todo = fluxes if fluxes is not None else list(_fluxes_up_to(q_max))
    for flux in todo:
        iv = band_intervals(flux, K, n_k)
        for b, (lo, hi) in enumerate(iv):
            rows.append(ButterflyBand(flux.p, flux.q, flux.p / flux.q, b + 1, float(lo), float(hi)))
    return rows


def degeneracy_shift(flux: RationalFlux) -> float:
    """kX translation (q/p mod 1) under which every band is invariant."""
    return float(Fraction(flux.q, flux.p) % 1)


def degeneracy_check(flux: RationalFlux, K: float, n_grid: int = 41) -> float:
    """max |E_b(kX, kP) - E_b(kX + q/p mod 1, kP)| over an n_grid^2 mesh of the zone."""
    shift = degeneracy_shift(flux)
    if shift == 0.0:
        return 0.0
    kx = np.arange(n_grid) / n_grid
    kp = np.arange(n_grid) / (n_grid * flux.p)
    e0 = np.linalg.eigvalsh(harper_matrices(flux, kx[:, None], kp[None, :]))
    e1 = np.linalg.eigvalsh(harper_matrices(flux, ((kx + shift) % 1.0)[:, None], kp[None, :]))
    return float(0.25 * abs(K) * np.max(np.abs(e0 - e1)))


# ---------------------------------------------------------------------------
# Chern numbers
# ---------------------------------------------------------------------------

def _edge_points(flux: RationalFlux):
    p, q = flux.p, flux.q
    kx = np.arange(2 * q) / (2.0 * p)
    kp = np.array([0.0, 0.5 / p])
    return kx, kp


def _min_gap(ev: np.ndarray, bands: Sequence[int]) -> float:
    """Smallest separation between the band group and its neighbours."""
    lo, hi = min(bands), max(bands)
    gaps = []
    if lo > 0:
        gaps.append(np.min(ev[..., lo] - ev[..., lo - 1]))
    if hi < ev.shape[-1] - 1:
        gaps.append(np.min(ev[..., hi + 1] - ev[..., hi]))
    return float(min(gaps)) if gaps else math.inf


def _link(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Normalised det(a^dagger b) over the trailing (q, nb) axes."""
    ov = np.einsum("...mi,...mj->...ij", a.conj(), b)
    d = np.linalg.det(ov) if ov.shape[-1] > 1 else ov[..., 0, 0]
    return d / np.abs(d)


def chern_number(flux: RationalFlux, band, K: float = 1.0, n_grid: int = 24) -> int:
    """Chern number of one band (1-based index) or of a contiguous group of bands.

    Integrates the lattice field strength over the strict period of the
    Harper matrix, kX in [0, q/p) and kP in [0, 1/p), with ``n_grid``
    plaquettes per axis. Passing a list of bands returns the total Chern
    number of that group (non-Abelian link variables), which stays defined
    when bands inside the group touch.

    Raises GapClosure when the group touches a neighbouring band on the
    grid or at the band-edge points of the zone.
    """
    if n_grid < 12:
        raise ValueError("n_grid must be >= 12")
    bands = [band] if np.ndim(band) == 0 else list(band)
    idx = sorted(int(b) - 1 for b in bands)
    if idx != list(range(idx[0], idx[-1] + 1)) or idx[0] < 0 or idx[-1] >= flux.q:
        raise ValueError(f"bands {bands} are not a contiguous range in 1..{flux.q}")
    sign = 1.0 if K >= 0 else -1.0

    kx = np.arange(n_grid) * (flux.q / flux.p) / n_grid
    kp = np.arange(n_grid) / (flux.p * n_grid)
    h = sign * harper_matrices(flux, kx[:, None], kp[None, :])
    ev, vec = np.linalg.eigh(h)

    ekx, ekp = _edge_points(flux)
    ev_edge = np.linalg.eigvalsh(sign * harper_matrices(flux, ekx[:, None], ekp[None, :]))
    gap = min(_min_gap(ev, idx), _min_gap(ev_edge, idx))
    if gap < GAP_TOL:
        raise GapClosure(f"flux {flux}: bands {bands} touch a neighbour (gap {gap:.1e})")

    u = vec[..., idx]
    ux = _link(u, np.roll(u, -1, axis=0))
    uy = _link(u, np.roll(u, -1, axis=1))
    plaq = ux * np.roll(uy, -1, axis=0) / (np.roll(ux, -1, axis=1) * uy)
    flux_sum = np.angle(plaq).sum()
    c = flux_sum / (2.0 * math.pi)
    n = int(round(c))
    if abs(c - n) > 1e-6:
        raise NonConvergence(f"Berry flux {c:.6f} is not an integer")
    return n


def diophantine_gap_labels(flux: RationalFlux) -> list:
    """t_r solving r = q s_r + p t_r with |t_r| <= q/2 for r = 1..q-1.

    ``None`` marks gaps with two admissible solutions (|t_r| = q/2, even q),
    where the gap closes.
    """
    p, q = flux.p, flux.q
    out = []
    for r in range(1, q):
        sols = [t for t in range(-q, q + 1) if (r - p * t) % q == 0 and 2 * abs(t) <= q]
        out.append(sols[0] if len(sols) == 1 else None)
    return out


def chern_report(flux: RationalFlux, K: float = 1.0, n_grid: int = 24) -> dict:
    """Per-band Chern numbers and symmetric gap labels.

    Bands that touch a neighbour get ``None``; touching groups are reported
    as a whole under ``groups``. A gap below E = 0 is labelled by the sum
    over bands beneath it, a gap above E = 0 by the sum over bands above.
    """
    q = flux.q
    per_band = []
    for b in range(1, q + 1):
        try:
            per_band.append(chern_number(flux, b, K, n_grid))
        except GapClosure:
            per_band.append(None)
    groups = []
    b = 0
    while b < q:
        if per_band[b] is not None:
            b += 1
            continue
        e = b
        while e + 1 < q and per_band[e + 1] is None:
            e += 1
        members = list(range(b + 1, e + 2))
        try:
            total = chern_number(flux, members, K, n_grid)
        except GapClosure:
            total = None
        groups.append({"bands": members, "chern": total})
        b = e + 1

    iv = band_intervals(flux, K)
    gaps = []
    for r in range(1, q):
        lo, hi = iv[r - 1, 1], iv[r, 0]
        mid = 0.5 * (lo + hi)
        entry = {"gap": r, "E_low": float(lo), "E_high": float(hi), "open": bool(hi - lo > GAP_TOL)}
        if mid < 0:
            members = per_band[:r]
        else:
            members = per_band[r:]
        entry["chern"] = None if any(c is None for c in members) or not entry["open"] else int(sum(members))
        entry["side"] = "below" if mid < 0 else "above"
        gaps.append(entry)
    return {
        "flux": str(flux),
        "p": flux.p,
        "q": flux.q,
        "K": K,
        "n_grid": n_grid,
        "band_chern": per_band,
        "groups": groups,
        "gaps": gaps,
        "diophantine_t": diophantine_gap_labels(flux),
    }


# ---------------------------------------------------------------------------
# Eigenstates and their Husimi functions
# ---------------------------------------------------------------------------

def zak_state(flux: RationalFlux, k, band: int, K: float = 1.0) -> ZakState:
    """Eigenstate of band ``band`` (1-based, counted from the bottom) at k."""
    if not 1 <= band <= flux.q:
        raise ValueError(f"band must be in 1..{flux.q}")
    kX, kP = k
    h = harper_matrix(flux, k)
    ev, vec = np.linalg.eigh(h)
    order = np.argsort(0.25 * K * ev, kind="stable")
    col = order[band - 1]
    ubar = vec[:, col]
    m = np.arange(flux.q)
    u = np.exp(-1j * m * flux.lam * kP) * ubar
    # fix the global phase so that the largest component is real positive
    j = int(np.argmax(np.abs(u)))
    u = u * np.exp(-1j * np.angle(u[j]))
    u = u / np.linalg.norm(u)
    return ZakState(flux, BlochK(float(kX), float(kP)), band, float(0.25 * K * ev[col]), u)


def _q_amplitude(state: ZakState, xs: np.ndarray, ps: np.ndarray, window: float) -> np.ndarray:
    flux = state.flux
    lam, q = flux.lam, flux.q
    kX, kP = state.k
    spacing = 2.0 * math.pi / q
    offset = -lam * kP
    l_lo = math.floor((xs.min() - window - offset) / spacing) - 1
    l_hi = math.ceil((xs.max() + window - offset) / spacing) + 1
    ls = np.arange(l_lo, l_hi + 1)
    x_l = offset + spacing * ls
    m = np.arange(q)
    # comb weight of every tooth: sum_m u_m exp(i (kX + m) 2 pi l / q)
    phases = np.exp(1j * np.outer(ls, kX + m) * spacing)
    c_l = math.sqrt(lam / q) * phases @ state.coeffs
    dx = x_l[None, :] - xs[:, None]
    g = np.where(np.abs(dx) <= window, np.exp(-dx * dx / (2.0 * lam)), 0.0)
    g *= (math.pi * lam) ** -0.25
    pw = np.exp(-1j * np.outer(x_l, ps) / lam)
    return g @ (c_l[:, None] * pw)


def eigenstate_q_function(state: ZakState, xs, ps, window_sigmas: float = 10.0) -> np.ndarray:
    """Husimi Q(X, P) = |<alpha|psi>|^2 / pi on the grid xs x ps.

    The coherent-state overlap with the delta comb is summed over teeth
    within ``window_sigmas * sqrt(lam)`` of X. Raises NonConvergence if
    widening the window by 20 % moves any value by more than 1e-10 of the
    grid maximum.
    """
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    sl = math.sqrt(state.flux.lam)
    amp = _q_amplitude(state, xs, ps, window_sigmas * sl)
    wide = _q_amplitude(state, xs, ps, 1.2 * window_sigmas * sl)
    q = np.abs(amp) ** 2 / math.pi
    qw = np.abs(wide) ** 2 / math.pi
    scale = max(float(q.max()), 1e-300)
    if np.max(np.abs(q - qw)) > 1e-10 * scale:
        raise NonConvergence("Zak comb truncation not converged")
    return q
