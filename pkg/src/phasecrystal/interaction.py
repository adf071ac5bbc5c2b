"""Two-body interactions mapped into the rotating-frame phase space.

A real-space pair potential V(x1 - x2), averaged over one trap period,
becomes a function of the quantised phase-space distance
R_N = 2 sqrt(lambda (N + 1/2)):

    U(R_N) = int dq V_q exp(-lambda q^2 / 2) L_N(lambda q^2),
    V_q    = (1/2pi) int dx V(x) exp(-i q x).

Two atoms in single-particle states (coherent or squeezed) then feel the
direct and exchange interactions

    U_c = sum_N U(R_N) I_N,     U_e = sum_N (-1)^N U(R_N) I_N,

with I_N the weight of the relative-motion eigenstate Phi_N in the pair
state. Closed forms are provided for contact (eps * delta) and hardcore
(radius a) potentials.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import CutoffTooSmall, InvalidSqueeze, ParseError
from .specfun import QuadratureSpec, bessel_i0e, hermite_table, integrate, laguerre_table

__all__ = [
    "RealPotential",
    "PhaseSpacePotential",
    "RelativeState",
    "phase_distance",
    "n_max_for",
    "u_general",
    "u_contact",
    "u_contact_table",
    "uc_ue_contact",
    "u_hardcore",
    "u_hardcore_double_sum",
    "u_hardcore_table",
    "hardcore_first_order_energy",
    "uc_hardcore",
    "overlap_coherent",
    "overlap_squeezed",
    "squeeze_parameters",
    "hardcore_overlaps",
    "assemble_uc_ue",
    "read_tabulated_potential",
]

HARDCORE_VALIDITY = 0.3


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RealPotential:
    """Pair potential V(x) in the relative coordinate.

    Build with :meth:`contact`, :meth:`hardcore` or :meth:`custom`. Custom
    potentials need ``Vq`` (Fourier coefficient) or an even ``V`` with
    support inside [-x_half_width, x_half_width], from which V_q is
    obtained by quadrature.
    """

    kind: str
    eps: float = 0.0
    a: float = 0.0
    V: Optional[Callable] = field(default=None, compare=False)
    Vq: Optional[Callable] = field(default=None, compare=False)
    x_half_width: float = 20.0

    def __post_init__(self):
        if self.kind not in ("contact", "hardcore", "custom"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "contact" and not math.isfinite(self.eps):
            raise ValueError("contact strength must be finite")
        if self.kind == "hardcore" and not self.a > 0:
            raise ValueError("hardcore radius must be > 0")
        if self.kind == "custom" and self.V is None and self.Vq is None:
            raise ValueError("custom potential needs V or Vq")

    @classmethod
    def contact(cls, eps: float) -> "RealPotential":
        return cls("contact", eps=float(eps))

    @classmethod
    def hardcore(cls, a: float) -> "RealPotential":
        return cls("hardcore", a=float(a))

    @classmethod
    def custom(cls, V=None, Vq=None, x_half_width: float = 20.0) -> "RealPotential":
        return cls("custom", V=V, Vq=Vq, x_half_width=float(x_half_width))

    def fourier(self, q, tol: float = 1e-12):
        """V_q = (1/2pi) int V(x) cos(q x) dx (V is even)."""
        if self.kind == "contact":
            return np.full(np.shape(q), self.eps / (2.0 * math.pi))[()]
        if self.kind == "hardcore":
            raise ValueError("hardcore potential has no Fourier transform; use the closed form")
        if self.Vq is not None:
            return self.Vq(q)
        qs = np.atleast_1d(np.asarray(q, dtype=float))
        spec = QuadratureSpec(self.x_half_width, tol=tol)
        out = np.empty(qs.shape)
        for i, qq in enumerate(qs):
            val, _ = integrate(lambda x, qq=qq: self.V(x) * np.cos(qq * x), spec, initial_panels=16)
            out[i] = val / (2.0 * math.pi)
        return out.reshape(np.shape(q))[()] if np.ndim(q) == 0 else out


@dataclass(frozen=True)
class PhaseSpacePotential:
    """Table U_N = U(R_N) for N = 0..N_max with coherent-pair evaluators."""

    lam: float
    table: np.ndarray
    provenance: str
    kind: str = "custom"

    def __post_init__(self):
        if not np.all(np.isfinite(self.table)):
            raise ValueError("phase-space potential table has non-finite entries")

    @property
    def n_max(self) -> int:
        return self.table.size - 1

    def radii(self) -> np.ndarray:
        return phase_distance(np.arange(self.table.size), self.lam)

    def overlaps(self, R: float) -> np.ndarray:
        need = n_max_for(R, self.lam)
        if need > self.n_max:
            raise CutoffTooSmall(f"R={R} needs N up to {need}, table stops at {self.n_max}")
        if self.kind == "hardcore":
            return hardcore_overlaps(self.n_max, self.lam, R)
        return overlap_coherent(np.arange(self.table.size), self.lam, R)

    def uc_ue(self, R: float) -> tuple:
        """(U_c, U_e) for two coherent states a distance R apart."""
        return assemble_uc_ue(self.table, self.overlaps(R))


class RelativeState(NamedTuple):
    """Eigenstate Phi_N of the relative phase-space distance operator."""

    N: int
    lam: float

    @property
    def R(self) -> float:
        return float(phase_distance(self.N, self.lam))

    def wavefunction(self, dx):
        """Phi_N(dX): Hermite function with length scale sqrt(2 lambda)."""
        zeta = 1.0 / math.sqrt(2.0 * self.lam)
        y = zeta * np.asarray(dx, dtype=float)
        h = hermite_table(self.N, y)
        log_norm = 0.5 * (math.log(zeta) - 0.5 * math.log(math.pi)
                          - self.N * math.log(2.0) - math.lgamma(self.N + 1))
        return h[self.N] * np.exp(log_norm - 0.5 * y * y)


# ---------------------------------------------------------------------------
# Distances and truncation
# ---------------------------------------------------------------------------

def phase_distance(N, lam: float):
    """R_N = 2 sqrt(lam (N + 1/2))."""
    N = np.asarray(N)
    if np.any(N < 0):
        raise ValueError("N must be >= 0")
    out = 2.0 * np.sqrt(lam * (N + 0.5))
    return out[()] if out.ndim == 0 else out


def n_max_for(R: float, lam: float) -> int:
    """Poisson-tail truncation ceil(x) + 40 sqrt(max(1, x)) + 40 with x = R^2 / 4 lam."""
    x = R * R / (4.0 * lam)
    return int(math.ceil(x) + 40.0 * math.sqrt(max(1.0, x)) + 40)


# ---------------------------------------------------------------------------
# General potentials by quadrature
# ---------------------------------------------------------------------------

def u_general(pot: RealPotential, lam: float, n_max: int,
              quad: QuadratureSpec | None = None) -> PhaseSpacePotential:
    """U_N for N <= n_max by adaptive quadrature over q in [0, quad.half_width].

    The default cut-off q_max satisfies lambda q_max^2 = 4 n_max + 120, past
    the last turning point of exp(-y/2) L_N(y).
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if quad is None:
        quad = QuadratureSpec(half_width=math.sqrt((4.0 * n_max + 120.0) / lam), tol=1e-11)
    q_hi = quad.half_width
    spec = QuadratureSpec(half_width=0.5 * q_hi, tol=quad.tol, max_depth=quad.max_depth,
                          center=0.5 * q_hi)
    table = np.empty(n_max + 1)
    panels = max(8, 2 * int(math.sqrt(n_max + 1)) + 8)
    for n in range(n_max + 1):
        def f(q, n=n):
            y = lam * q * q
            lag = laguerre_table(n, 0, y)[n]
            return 2.0 * np.real(pot.fourier(q)) * np.exp(-0.5 * y) * lag
        table[n], _ = integrate(f, spec, initial_panels=panels)
    return PhaseSpacePotential(lam, table, "quadrature", pot.kind)


# ---------------------------------------------------------------------------
# Contact interaction
# ---------------------------------------------------------------------------

def u_contact(eps: float, lam: float, N: int) -> float:
    """U(R_N) for V = eps delta(x); zero for odd N, eps/sqrt(2 pi lam) at N = 0."""
    if N < 0:
        raise ValueError("N must be >= 0")
    if N % 2:
        return 0.0
    if N == 0:
        return eps / math.sqrt(2.0 * math.pi * lam)
    log_ratio = math.lgamma(0.5 * (N + 1)) - math.lgamma(0.5 * N)
    return eps * 2.0 / (N * math.pi * math.sqrt(2.0 * lam)) * math.exp(log_ratio)


def u_contact_table(eps: float, lam: float, n_max: int) -> PhaseSpacePotential:
    table = np.array([u_contact(eps, lam, n) for n in range(n_max + 1)])
    return PhaseSpacePotential(lam, table, "closed-form", "contact")


def uc_ue_contact(eps: float, lam: float, R):
    """Closed-form (U_c, U_e) = eps/sqrt(2 pi lam) e^{-x} I0(x) (twice), x = R^2/4lam."""
    R = np.asarray(R, dtype=float)
    if np.any(R < 0):
        raise ValueError("R must be >= 0")
    uc = eps / math.sqrt(2.0 * math.pi * lam) * bessel_i0e(R * R / (4.0 * lam))
    uc = uc[()] if np.ndim(uc) == 0 else uc
    return uc, uc


# ---------------------------------------------------------------------------
# Hardcore interaction
# ---------------------------------------------------------------------------

def _hardcore_warn(a: float, lam: float):
    if a > HARDCORE_VALIDITY * math.sqrt(lam):
        warnings.warn(
            f"hardcore radius a={a} exceeds {HARDCORE_VALIDITY} sqrt(lambda); "
            "the first-order (small core) result may be inaccurate",
            stacklevel=3,
        )


@lru_cache(maxsize=None)
def _hardcore_sum_exact(N: int) -> Fraction:
    """T / (N! 2^N) with T = sum_{k,l} (-1)^{k+l} (N!)^2 (N-k-l)! 4^{N-k-l} / (k! l! (N-2k)! (N-2l)!)."""
    fact = math.factorial
    nf = fact(N)
    half = N // 2
    c = [nf // (fact(k) * fact(N - 2 * k)) for k in range(half + 1)]
    total = 0
    for k in range(half + 1):
        for l in range(half + 1):
            term = c[k] * c[l] * fact(N - k - l) * 4 ** (N - k - l)
            total += -term if (k + l) % 2 else term
    return Fraction(total, nf * 2 ** N)


def u_hardcore_double_sum(a: float, lam: float, N: int) -> float:
    """U(R_N) from the double factorial sum, evaluated in exact rational arithmetic.

    Summing in floating point loses every digit to cancellation for N
    beyond about 25; exact integers avoid that at O(N^2) bignum cost.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    n_odd = N if N % 2 else N + 1
    return a * math.sqrt(2.0 * lam / math.pi) * float(_hardcore_sum_exact(n_odd))


def u_hardcore(a: float, lam: float, N: int) -> float:
    """U(R_N) for a hardcore pair of radius ``a``; U(R_2m) = U(R_2m+1).

    Uses the equivalent single-term form for odd N = 2m + 1,

        U = a sqrt(2 lam / pi) * 4 N^2 ((2m)! / m!)^2 / (2^N N!),

    which is (a / zeta) psi_N'(0)^2 for the normalised oscillator state
    psi_N of the relative motion (zeta = 1/sqrt(2 lam)) and carries no
    cancellation. :func:`u_hardcore_double_sum` gives the same numbers.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    _hardcore_warn(a, lam)
    return _u_hardcore_odd(a, lam, N if N % 2 else N + 1)


def _u_hardcore_odd(a: float, lam: float, n: int) -> float:
    m = (n - 1) // 2
    log_t = (math.log(4.0 * n * n) + 2.0 * (math.lgamma(2 * m + 1) - math.lgamma(m + 1))
             - n * math.log(2.0) - math.lgamma(n + 1))
    return a * math.sqrt(2.0 * lam / math.pi) * math.exp(log_t)


def u_hardcore_table(a: float, lam: float, n_max: int, variant: str = "exact") -> PhaseSpacePotential:
    """Hardcore table; ``variant="linear"`` uses U(R_N) = (2a/pi) R_N with R_2m := R_2m+1."""
    _hardcore_warn(a, lam)
    n = np.arange(n_max + 1)
    odd = np.where(n % 2, n, n + 1)
    if variant == "exact":
        table = np.array([_u_hardcore_odd(a, lam, int(k)) for k in odd])
    elif variant == "linear":
        table = 2.0 * a / math.pi * phase_distance(odd, lam)
    else:
        raise ValueError(f"unknown hardcore variant {variant!r}")
    return PhaseSpacePotential(lam, np.asarray(table, dtype=float), "closed-form", "hardcore")


def hardcore_first_order_energy(a: float, lam: float, N: int) -> float:
    """First-order energy of the odd relative state pushed outside the core.

    Equals lam (N + 1/2) + a^2 + U(R_N) for odd N: the oscillator level,
    the shift of the potential minimum, and the cross term
    2a int_0^inf x psi_N(x)^2 dx.
    """
    if N % 2 == 0:
        raise ValueError("first-order energy is defined for odd N")
    return lam * (N + 0.5) + a * a + _u_hardcore_odd(a, lam, N)


def hardcore_overlaps(n_max: int, lam: float, R: float) -> np.ndarray:
    """Pair weights for hardcore states: I_2m = I_2m+1 = Poisson weight of 2m+1.

    The even hardcore state sgn(dX) Phi_2m+1 is degenerate with Phi_2m+1
    and shares its weight, so the even/odd pairs cancel in U_e.
    """
    n = np.arange(n_max + 1)
    odd = np.where(n % 2, n, n + 1)
    return overlap_coherent(odd, lam, R)


def uc_hardcore(a: float, lam: float, R, m_max: int | None = None, variant: str = "exact"):
    """(U_c, U_e) = (2 sum_m U(R_2m+1) I_2m+1, 0) for coherent states a distance R apart."""
    _hardcore_warn(a, lam)
    Rs = np.atleast_1d(np.asarray(R, dtype=float))
    uc = np.empty(Rs.shape)
    for i, r in enumerate(Rs):
        mm = m_max if m_max is not None else n_max_for(r, lam) // 2 + 1
        odd = 2 * np.arange(mm + 1) + 1
        if variant == "exact":
            u = np.array([_u_hardcore_odd(a, lam, int(k)) for k in odd])
        elif variant == "linear":
            u = 2.0 * a / math.pi * phase_distance(odd, lam)
        else:
            raise ValueError(f"unknown hardcore variant {variant!r}")
        uc[i] = 2.0 * math.fsum(u * overlap_coherent(odd, lam, r))
    ue = np.zeros_like(uc)
    if np.ndim(R) == 0:
        return float(uc[0]), 0.0
    return uc, ue


# ---------------------------------------------------------------------------
# Overlaps
# ---------------------------------------------------------------------------

def overlap_coherent(N, lam: float, R: float):
    """Poisson weight I_N = x^N e^{-x} / N!, x = R^2 / 4 lam."""
    N = np.asarray(N)
    if np.any(N < 0) or R < 0:
        raise ValueError("N and R must be >= 0")
    x = R * R / (4.0 * lam)
    if x == 0.0:
        out = (N == 0).astype(float)
    else:
        lg = np.vectorize(math.lgamma)(N + 1.0)
        out = np.exp(N * math.log(x) - x - lg)
    return out[()] if out.ndim == 0 else out


def squeeze_parameters(beta: float, lam: float) -> tuple:
    """(v, u) for a pair-state Gaussian of inverse width ``beta``."""
    b = math.sqrt(lam) * beta
    return 0.5 * (b + 1.0 / b), 0.5 * (b - 1.0 / b)


def overlap_squeezed(N, gamma: float, v: float, u: float):
    """|<N| -gamma, -xi>|^2 for real displacement gamma and squeeze (v, u).

    ``v = cosh r`` and ``u = -e^{i theta} sinh r``. The Hermite factor is
    generated by the scaled recurrence for g_n = a^n H_n(z) / sqrt(n!),
    a^2 = tanh(r) / 2, with a running log-scale so large N stay finite.
    """
    if abs(v * v - abs(u) ** 2 - 1.0) > 1e-10 or v < 1.0:
        raise InvalidSqueeze(f"v^2 - |u|^2 = {v * v - abs(u) ** 2:.3e}, expected 1")
    Ns = np.atleast_1d(np.asarray(N))
    if np.any(Ns < 0):
        raise ValueError("N must be >= 0")
    n_top = int(Ns.max())
    r = math.acosh(v)
    if r < 1e-12:
        return _poisson_gamma(N, gamma)
    sinh_r = math.sinh(r)
    e_theta = -complex(u) / sinh_r
    th = np.angle(e_theta)
    ta = math.tanh(r)
    num = gamma * e_theta * sinh_r - gamma * math.cosh(r)  # gamma real
    den = np.sqrt(complex(np.exp(1j * (th + math.pi)) * math.sinh(2.0 * r)))
    a = math.sqrt(0.5 * ta)
    az = a * num / den
    a2 = a * a
    logs = np.empty(n_top + 1)
    g_prev, g_cur = 0.0 + 0.0j, 1.0 + 0.0j
    scale = 0.0
    logs[0] = 0.0
    for n in range(n_top):
        g_next = (2.0 * az * g_cur - 2.0 * a2 * math.sqrt(n) * g_prev) / math.sqrt(n + 1)
        g_prev, g_cur = g_cur, g_next
        mag = abs(g_cur)
        if mag > 1e100 or (0 < mag < 1e-100):
            s = math.log(mag)
            g_prev /= mag
            g_cur /= mag
            scale += s
        logs[n + 1] = (2.0 * (math.log(abs(g_cur)) + scale)) if g_cur != 0 else -np.inf
    expo = (-gamma * gamma + 0.5 * (gamma * gamma * e_theta + gamma * gamma * e_theta.conjugate()) * ta).real
    out = np.exp(logs[Ns] + expo - math.log(math.cosh(r)))
    return out[0] if np.ndim(N) == 0 else out


def _poisson_gamma(N, gamma: float):
    x = gamma * gamma
    N = np.asarray(N)
    if x == 0.0:
        out = (N == 0).astype(float)
    else:
        out = np.exp(N * math.log(x) - x - np.vectorize(math.lgamma)(N + 1.0))
    return out[()] if out.ndim == 0 else out


def assemble_uc_ue(table, overlaps) -> tuple:
    """U_c = sum U_N I_N and U_e = sum (-1)^N U_N I_N over aligned arrays."""
    table = np.asarray(table, dtype=float)
    overlaps = np.asarray(overlaps, dtype=float)
    if table.shape != overlaps.shape:
        raise ValueError("potential table and overlaps must be aligned in N")
    sign = np.where(np.arange(table.size) % 2, -1.0, 1.0)
    return math.fsum(table * overlaps), math.fsum(sign * table * overlaps)


# ---------------------------------------------------------------------------
# Tabulated input
# ---------------------------------------------------------------------------

def read_tabulated_potential(path) -> RealPotential:
    """Two-column CSV ``x,V`` (optional header) -> even custom potential.

    Rows may cover x >= 0 only; the table is mirrored. V_q is computed by
    trapezoidal integration on the tabulated points.
    """
    xs, vs = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{lineno}: expected two columns, got {len(row)}")
            try:
                x, v = float(row[0]), float(row[1])
            except ValueError:
                if lineno == 1:
                    continue
                raise ParseError(f"{path}:{lineno}: non-numeric entry {row!r}") from None
            xs.append(x)
            vs.append(v)
    if len(xs) < 3:
        raise ParseError(f"{path}: need at least three data rows")
    x = np.asarray(xs)
    v = np.asarray(vs)
    order = np.argsort(x)
    x, v = x[order], v[order]
    if np.any(np.diff(x) <= 0):
        raise ParseError(f"{path}: x values must be distinct")
    if x[0] >= 0:
        keep = x > 0 if x[0] == 0 else slice(None)
        x = np.concatenate([-x[keep][::-1], x])
        v = np.concatenate([v[keep][::-1], v])

    def vq(q):
        qs = np.atleast_1d(np.asarray(q, dtype=float))
        vals = np.trapezoid(v[None, :] * np.cos(qs[:, None] * x[None, :]), x, axis=1) / (2.0 * math.pi)
        return vals[0] if np.ndim(q) == 0 else vals

    def vx(y):
        return np.interp(y, x, v, left=0.0, right=0.0)

    return RealPotential.custom(V=vx, Vq=vq, x_half_width=float(max(abs(x[0]), abs(x[-1]))))
