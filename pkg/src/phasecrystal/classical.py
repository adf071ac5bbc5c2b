"""Classical many-body dynamics of interacting kicked oscillators.

Two descriptions are provided.

* The full kicked system (lab frame), integrated between kicks with an
  adaptive Dormand-Prince 5(4) scheme and kicked with the exact impulse
  p <- p + K tau sin x. It is sampled once per trap period (Poincare map).
* The averaged rotating-frame equations for q0 = 4,

      dX_i/dt = -(K/2) sin P_i + sum_j U'(R_ij) (P_i - P_j) / R_ij
      dP_i/dt =  (K/2) sin X_i - sum_j U'(R_ij) (X_i - X_j) / R_ij

  integrated with classic RK4, together with their linearisation about
  lattice sites and the stability estimate for a chain of atoms.

Between kicks the lab-frame flow is integrated in co-rotating variables
X = x cos t - p sin t, P = x sin t + p cos t. That is a time-dependent
canonical change of variables, so the trajectory is the same as for
x' = p, p' = -x - dV/dx, but the free harmonic rotation is absorbed
exactly and the step size is set by the interaction alone. With V = 0 the
samples are then fixed to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import njit, pick
from .errors import CollisionSingularity, StepRejected
from .lattice import ModelParams

__all__ = [
    "ManyBodyState",
    "ClassicalPotentialSpec",
    "Trajectory",
    "CrystalReport",
    "R_MIN",
    "DEFAULT_DT",
    "poincare_evolve",
    "rwa_evolve",
    "rwa_energy",
    "rwa_forces",
    "linear_solution",
    "chain_state",
    "three_body_state",
    "crystal_run",
    "crystal_thresholds",
    "edge_amplitude",
    "SURVIVAL_RADIUS",
]

R_MIN = 1e-3
DEFAULT_DT = 2.0 * math.pi / 200.0
SURVIVAL_RADIUS = (math.sqrt(2.0) - 1.0) * math.pi

_KINDS = ("contact-smoothed", "hardcore-powerlaw", "rwa-contact", "rwa-hardcore", "none")
_LAB_KINDS = ("contact-smoothed", "hardcore-powerlaw", "none")
_RWA_KINDS = ("rwa-contact", "rwa-hardcore", "none")


@dataclass
class ManyBodyState:
    """Positions of all atoms in one frame.

    ``q`` and ``p`` hold (X_i, P_i) in the rotating frame or (x_i, p_i) in
    the lab frame, as named by ``frame``.
    """

    q: np.ndarray
    p: np.ndarray
    frame: str = "rotating"
    t: float = 0.0

    def __post_init__(self):
        self.q = np.array(self.q, dtype=float).ravel()
        self.p = np.array(self.p, dtype=float).ravel()
        if self.frame not in ("rotating", "lab"):
            raise ValueError(f"frame must be 'rotating' or 'lab', got {self.frame!r}")
        if self.q.shape != self.p.shape:
            raise ValueError("q and p must have the same length")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise ValueError("state contains non-finite coordinates")

    @classmethod
    def from_z(cls, z, frame: str = "rotating", t: float = 0.0) -> "ManyBodyState":
        z = np.asarray(z, dtype=complex).ravel()
        return cls(z.real, z.imag, frame, t)

    @property
    def z(self) -> np.ndarray:
        return self.q + 1j * self.p

    @property
    def n_atoms(self) -> int:
        return self.q.size

    def as_frame(self, frame: str) -> "ManyBodyState":
        """Convert between lab and rotating coordinates at the stored time."""
        if frame == self.frame:
            return ManyBodyState(self.q.copy(), self.p.copy(), frame, self.t)
        c, s = math.cos(self.t), math.sin(self.t)
        if frame == "rotating":
            q = self.q * c - self.p * s
            p = self.q * s + self.p * c
        else:
            q = self.q * c + self.p * s
            p = -self.q * s + self.p * c
        return ManyBodyState(q, p, frame, self.t)


@dataclass(frozen=True)
class ClassicalPotentialSpec:
    """Pair interaction for the classical integrators.

    Lab-frame kinds act on x_i - x_j:

    * ``contact-smoothed``: V = (eps/pi) sigma / (x^2 + sigma^2)
    * ``hardcore-powerlaw``: V = (2a/x)^n

    Rotating-frame kinds act on R_ij = |Z_i - Z_j| through the averaged
    potentials U = eps/(pi R) and U = 2aR/pi.
    """

    kind: str
    eps: float = 0.0
    a: float = 0.0
    sigma: float = 0.1
    n: int = 20

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {_KINDS}")
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if int(self.n) != self.n or self.n < 4 or self.n % 2:
            raise ValueError("power-law exponent n must be an even integer >= 4")
        if self.kind in ("hardcore-powerlaw", "rwa-hardcore") and not self.a > 0:
            raise ValueError("hardcore radius a must be > 0")

    @property
    def is_lab(self) -> bool:
        return self.kind in _LAB_KINDS

    @property
    def is_rwa(self) -> bool:
        return self.kind in _RWA_KINDS

    @property
    def is_contact(self) -> bool:
        return self.kind in ("contact-smoothed", "rwa-contact")

    @property
    def is_hardcore(self) -> bool:
        return self.kind in ("hardcore-powerlaw", "rwa-hardcore")

    def averaged(self) -> "ClassicalPotentialSpec":
        """The rotating-frame counterpart of a lab-frame potential."""
        if self.is_rwa:
            return self
        if self.kind == "contact-smoothed":
            return ClassicalPotentialSpec("rwa-contact", eps=self.eps)
        return ClassicalPotentialSpec("rwa-hardcore", a=self.a)

    def lab(self) -> "ClassicalPotentialSpec":
        """The smoothed lab-frame counterpart of a rotating-frame potential."""
        if self.is_lab:
            return self
        if self.kind == "rwa-contact":
            return ClassicalPotentialSpec("contact-smoothed", eps=self.eps, sigma=self.sigma)
        return ClassicalPotentialSpec("hardcore-powerlaw", a=self.a, n=self.n)

    def u(self, R):
        R = np.asarray(R, dtype=float)
        if self.kind == "rwa-contact":
            return self.eps / (math.pi * R)
        if self.kind == "rwa-hardcore":
            return 2.0 * self.a * R / math.pi
        if self.kind == "none":
            return np.zeros_like(R)
        raise ValueError("u(R) is defined for rotating-frame kinds only")

    def du(self, R):
        R = np.asarray(R, dtype=float)
        if self.kind == "rwa-contact":
            return -self.eps / (math.pi * R * R)
        if self.kind == "rwa-hardcore":
            return np.full_like(R, 2.0 * self.a / math.pi)
        if self.kind == "none":
            return np.zeros_like(R)
        raise ValueError("dU/dR is defined for rotating-frame kinds only")

    def v(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "contact-smoothed":
            return self.eps / math.pi * self.sigma / (x * x + self.sigma ** 2)
        if self.kind == "hardcore-powerlaw":
            return (2.0 * self.a / x) ** self.n
        if self.kind == "none":
            return np.zeros_like(x)
        raise ValueError("V(x) is defined for lab-frame kinds only")

    def _lab_pars(self) -> np.ndarray:
        if self.kind == "contact-smoothed":
            return np.array([1.0, self.eps / math.pi, self.sigma, self.sigma])
        if self.kind == "hardcore-powerlaw":
            return np.array([2.0, 2.0 * self.a, float(self.n), 2.0 * self.a])
        return np.zeros(4)

    def _rwa_pars(self) -> np.ndarray:
        if self.kind == "rwa-contact":
            return np.array([1.0, self.eps / math.pi, 0.0, 0.0])
        if self.kind == "rwa-hardcore":
            return np.array([2.0, 2.0 * self.a / math.pi, 0.0, 0.0])
        return np.zeros(4)


@dataclass
class Trajectory:
    """Sampled positions; row k of ``X``/``P`` is taken at ``t[k]``."""

    t: np.ndarray
    X: np.ndarray
    P: np.ndarray
    frame: str
    meta: dict = field(default_factory=dict)

    @property
    def z(self) -> np.ndarray:
        return self.X + 1j * self.P

    @property
    def final(self) -> ManyBodyState:
        return ManyBodyState(self.X[-1], self.P[-1], "rotating", float(self.t[-1]))

    def rows(self, label: str = "t"):
        """Yield (time or period, atom, X, P) records in CSV order."""
        for k in range(self.t.size):
            stamp = self.t[k] if label == "t" else k
            for i in range(self.X.shape[1]):
                yield stamp, i, self.X[k, i], self.P[k, i]


# ---------------------------------------------------------------------------
# Lab-frame (Poincare) integration


@njit
def _vprime_nb(x, pars):
    kind = pars[0]
    if kind == 1.0:
        d = x * x + pars[2] * pars[2]
        return -2.0 * pars[1] * pars[2] * x / (d * d)
    if kind == 2.0:
        if x == 0.0:
            return math.inf
        n = pars[2]
        return -n * (pars[1] / x) ** n / x
    return 0.0


@njit
def _lab_rhs_nb(t, y, pars, out):
    n = y.size // 2
    c = math.cos(t)
    s = math.sin(t)
    for i in range(n):
        out[i] = 0.0
    if pars[0] != 0.0:
        for i in range(n):
            xi = y[i] * c + y[n + i] * s
            for j in range(i + 1, n):
                xj = y[j] * c + y[n + j] * s
                f = _vprime_nb(xi - xj, pars)
                out[i] += f
                out[j] -= f
    for i in range(n):
        f = out[i]
        out[i] = s * f
        out[n + i] = -c * f


def _lab_rhs_np(t, y, pars, out):
    n = y.size // 2
    c, s = math.cos(t), math.sin(t)
    if pars[0] == 0.0:
        out[:] = 0.0
        return
    x = y[:n] * c + y[n:] * s
    d = x[:, None] - x[None, :]
    np.fill_diagonal(d, 1.0)
    if pars[0] == 1.0:
        den = d * d + pars[2] ** 2
        fp = -2.0 * pars[1] * pars[2] * d / (den * den)
    else:
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            fp = -pars[2] * (pars[1] / d) ** pars[2] / d
    np.fill_diagonal(fp, 0.0)
    f = fp.sum(axis=1)
    out[:n] = s * f
    out[n:] = -c * f


_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


def _make_poincare(rhs, jit):
    """Build the kick/flow loop around a right-hand side ``rhs``."""

    def segment(y, t0, t1, h, h_max, pars, rtol, atol, max_steps, work):
        # Dormand-Prince 5(4) with FSAL; returns (status, last accepted h, steps).
        k1, k2, k3, k4, k5, k6, k7, yt, yn = (work[0], work[1], work[2], work[3], work[4],
                                              work[5], work[6], work[7], work[8])
        n = y.size
        t = t0
        span = t1 - t0
        h_min = 1e-13 * span
        rhs(t, y, pars, k1)
        steps = 0
        while t < t1:
            if steps >= max_steps:
                return 1, h, steps
            last = False
            if h > h_max:
                h = h_max
            if t + h >= t1:
                h = t1 - t
                last = True
            for i in range(n):
                yt[i] = y[i] + h * _A21 * k1[i]
            rhs(t + _C2 * h, yt, pars, k2)
            for i in range(n):
                yt[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
            rhs(t + _C3 * h, yt, pars, k3)
            for i in range(n):
                yt[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
            rhs(t + _C4 * h, yt, pars, k4)
            for i in range(n):
                yt[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
            rhs(t + _C5 * h, yt, pars, k5)
            for i in range(n):
                yt[i] = y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i]
                                    + _A64 * k4[i] + _A65 * k5[i])
            rhs(t + h, yt, pars, k6)
            for i in range(n):
                yn[i] = y[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i]
                                    + _B5 * k5[i] + _B6 * k6[i])
            rhs(t + h, yn, pars, k7)
            err = 0.0
            for i in range(n):
                e = h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i]
                         + _E6 * k6[i] + _E7 * k7[i])
                sc = atol + rtol * max(abs(y[i]), abs(yn[i]))
                err += (e / sc) ** 2
            err = math.sqrt(err / n)
            steps += 1
            if err <= 1.0:
                t = t1 if last else t + h
                for i in range(n):
                    y[i] = yn[i]
                    k1[i] = k7[i]
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                if not last:
                    h = h * fac
            else:
                if not math.isfinite(err):
                    h = 0.1 * h
                else:
                    h = h * max(0.1, 0.9 * err ** -0.2)
                if h < h_min:
                    return 2, h, steps
        return 0, h, steps

    def run(y, K, tau, q0, n_periods, pars, rtol, atol, max_steps, out_x, out_p):
        n = y.size // 2
        work = np.empty((9, y.size))
        h = tau / 16.0
        total = 0
        for m in range(n_periods + 1):
            for r in range(q0):
                t = (m * q0 + r) * tau
                c = math.cos(t)
                s = math.sin(t)
                for i in range(n):
                    xi = y[i] * c + y[n + i] * s
                    dp = K * tau * math.sin(xi)
                    y[i] -= dp * s
                    y[n + i] += dp * c
                if r == 0:
                    for i in range(n):
                        out_x[m, i] = y[i]
                        out_p[m, i] = y[n + i]
                    if m == n_periods:
                        return 0, m, total
                # Cap the step so no pair can cross the interaction range
                # unseen; the lab relative speed is bounded by R_ij.
                h_max = tau
                if pars[3] > 0.0:
                    v = 0.0
                    for i in range(n):
                        for j in range(i + 1, n):
                            v = max(v, math.hypot(y[i] - y[j], y[n + i] - y[n + j]))
                    if v > 0.0:
                        h_max = min(tau, 0.5 * pars[3] / v)
                status, h, steps = segment(y, t, t + tau, h, h_max, pars, rtol, atol,
                                           max_steps, work)
                total += steps
                if status != 0:
                    return status, m, total
        return 0, n_periods, total

    if jit:
        segment = njit(segment)
        run = njit(run)
    return run


_poincare_nb = _make_poincare(_lab_rhs_nb, True)
_poincare_np = _make_poincare(_lab_rhs_np, False)
_poincare = pick(_poincare_nb, _poincare_np)


def poincare_evolve(state: ManyBodyState, params: ModelParams, pot: ClassicalPotentialSpec,
                    n_periods: int, rtol: float = 1e-10, atol: float = 1e-12,
                    max_steps: int = 200_000) -> Trajectory:
    """Stroboscopic map of the full kicked many-body system.

    ``state`` is taken at t = 0 just before the kick at that instant.
    Sample m is recorded at t = 2 pi m immediately after the kick there,
    where lab and rotating coordinates coincide. ``max_steps`` bounds the
    adaptive steps per kick interval; exceeding it, or an underflowing step,
    raises :class:`StepRejected`.
    """
    if not pot.is_lab:
        raise ValueError(f"poincare_evolve needs a lab-frame potential, got {pot.kind!r}")
    if state.t != 0.0:
        raise ValueError("poincare_evolve starts from t = 0")
    if n_periods < 0:
        raise ValueError("n_periods must be >= 0")
    rot = state.as_frame("rotating")
    y = np.concatenate([rot.q, rot.p])
    n = rot.n_atoms
    out_x = np.zeros((n_periods + 1, n))
    out_p = np.zeros((n_periods + 1, n))
    status, m, steps = _poincare(y, float(params.K), float(params.tau), int(params.q0),
                                 int(n_periods), pot._lab_pars(), float(rtol), float(atol),
                                 int(max_steps), out_x, out_p)
    if status != 0:
        why = "step budget exhausted" if status == 1 else "step size underflow"
        raise StepRejected(f"adaptive integration failed in period {m} ({why}); "
                           "likely a near collision, tighten or relax tolerances")
    t = 2.0 * math.pi * np.arange(n_periods + 1)
    return Trajectory(t, out_x, out_p, "lab", meta={"steps": int(steps), "rtol": rtol,
                                                      "atol": atol})


# ---------------------------------------------------------------------------
# Rotating-frame (RWA) integration


@njit
def _rwa_rhs_nb(y, half_k, pars, rmin, out):
    n = y.size // 2
    for i in range(n):
        out[i] = -half_k * math.sin(y[n + i])
        out[n + i] = half_k * math.sin(y[i])
    if pars[0] == 0.0:
        return 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = y[i] - y[j]
            dp = y[n + i] - y[n + j]
            r = math.sqrt(dx * dx + dp * dp)
            if r < rmin:
                return 1
            if pars[0] == 1.0:
                g = -pars[1] / (r * r * r)
            else:
                g = pars[1] / r
            out[i] += g * dp
            out[j] -= g * dp
            out[n + i] -= g * dx
            out[n + j] += g * dx
    return 0


def _rwa_rhs_np(y, half_k, pars, rmin, out):
    n = y.size // 2
    X, P = y[:n], y[n:]
    out[:n] = -half_k * np.sin(P)
    out[n:] = half_k * np.sin(X)
    if pars[0] == 0.0:
        return 0
    dx = X[:, None] - X[None, :]
    dp = P[:, None] - P[None, :]
    r = np.hypot(dx, dp)
    np.fill_diagonal(r, np.inf)
    if r.min() < rmin:
        return 1
    g = -pars[1] / r ** 3 if pars[0] == 1.0 else pars[1] / r
    # Row sums in fixed index order keep the reduction deterministic.
    out[:n] += (g * dp).sum(axis=1)
    out[n:] -= (g * dx).sum(axis=1)
    return 0


def _make_rk4(rhs, jit):
    def run(y, half_k, dt, n_steps, every, pars, rmin, out_x, out_p):
        n = y.size // 2
        m = y.size
        k1 = np.empty(m)
        k2 = np.empty(m)
        k3 = np.empty(m)
        k4 = np.empty(m)
        yt = np.empty(m)
        for i in range(n):
            out_x[0, i] = y[i]
            out_p[0, i] = y[n + i]
        rec = 1
        for step in range(n_steps):
            if rhs(y, half_k, pars, rmin, k1):
                return step
            for i in range(m):
                yt[i] = y[i] + 0.5 * dt * k1[i]
            if rhs(yt, half_k, pars, rmin, k2):
                return step
            for i in range(m):
                yt[i] = y[i] + 0.5 * dt * k2[i]
            if rhs(yt, half_k, pars, rmin, k3):
                return step
            for i in range(m):
                yt[i] = y[i] + dt * k3[i]
            if rhs(yt, half_k, pars, rmin, k4):
                return step
            for i in range(m):
                y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if (step + 1) % every == 0:
                for i in range(n):
                    out_x[rec, i] = y[i]
                    out_p[rec, i] = y[n + i]
                rec += 1
        return -1

    return njit(run) if jit else run


_rk4_nb = _make_rk4(_rwa_rhs_nb, True)
_rk4_np = _make_rk4(_rwa_rhs_np, False)
_rk4 = pick(_rk4_nb, _rk4_np)


def _check_rwa(params: ModelParams, pot: ClassicalPotentialSpec):
    if params.q0 != 4:
        raise ValueError("the rotating-frame equations are implemented for the square lattice q0 = 4")
    if not pot.is_rwa:
        raise ValueError(f"rwa_evolve needs a rotating-frame potential, got {pot.kind!r}")


def rwa_evolve(state: ManyBodyState, params: ModelParams, pot: ClassicalPotentialSpec,
               T: float, dt: float = DEFAULT_DT, record_every: float | None = None,
               r_min: float = R_MIN) -> Trajectory:
    """Integrate the averaged equations of motion up to time ``T``.

    Samples are stored every ``record_every`` time units (default: every
    2 pi, matching the stroboscopic map), which must be a multiple of ``dt``
    up to rounding. A contact pair closer than ``r_min`` aborts with
    :class:`CollisionSingularity`.
    """
    _check_rwa(params, pot)
    if state.frame != "rotating":
        state = state.as_frame("rotating")
    if not dt > 0 or not T >= 0:
        raise ValueError("need dt > 0 and T >= 0")
    rec = 2.0 * math.pi if record_every is None else float(record_every)
    every = max(1, int(round(rec / dt)))
    dt = rec / every
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be a whole number of dt steps")
    n_rec = n_steps // every + 1
    n = state.n_atoms
    y = np.concatenate([state.q, state.p])
    out_x = np.zeros((n_rec, n))
    out_p = np.zeros((n_rec, n))
    # The contact singularity is the only one; hardcore forces stay finite.
    rmin = float(r_min) if pot.is_contact else 0.0
    bad = _rk4(y, 0.5 * float(params.K), float(dt), n_steps, every, pot._rwa_pars(), rmin,
               out_x, out_p)
    if bad >= 0:
        raise CollisionSingularity(f"pair distance fell below R_min={r_min:g} at t={state.t + bad * dt:.6g}")
    t = state.t + dt * every * np.arange(n_rec)
    return Trajectory(t, out_x, out_p, "rotating", meta={"dt": dt})


def rwa_forces(state: ManyBodyState, params: ModelParams, pot: ClassicalPotentialSpec) -> np.ndarray:
    """Right-hand side (dX/dt, dP/dt) as a complex array dZ/dt."""
    _check_rwa(params, pot)
    y = np.concatenate([state.q, state.p])
    out = np.empty_like(y)
    if _rwa_rhs_np(y, 0.5 * params.K, pot._rwa_pars(), 0.0, out):
        raise CollisionSingularity("coincident atoms")
    n = state.n_atoms
    return out[:n] + 1j * out[n:]


def rwa_energy(z, params: ModelParams, pot: ClassicalPotentialSpec) -> np.ndarray:
    """Total averaged energy; ``z`` may carry leading time axes."""
    z = np.asarray(z, dtype=complex)
    single = 0.5 * params.K * (np.cos(z.real) + np.cos(z.imag)).sum(axis=-1)
    n = z.shape[-1]
    iu, ju = np.triu_indices(n, 1)
    R = np.abs(z[..., iu] - z[..., ju])
    return single + pot.averaged().u(R).sum(axis=-1)


def linear_solution(initials, params: ModelParams, pot: ClassicalPotentialSpec, t) -> np.ndarray:
    """Linearised motion about sites of the 2 pi square lattice.

    Z_i(t) = Z_i(0) + (2/K)(exp(iKt/2) - 1) sum_j U'(R_ij) e_ji, with
    e_ji the unit vector from atom i to atom j at t = 0. Returns shape
    (len(t), n_atoms).
    """
    z0 = np.asarray(initials, dtype=complex).ravel()
    t = np.atleast_1d(np.asarray(t, dtype=float))
    pot = pot.averaged()
    d = z0[None, :] - z0[:, None]
    R = np.abs(d)
    np.fill_diagonal(R, 1.0)
    e = d / R
    g = pot.du(R) * e
    np.fill_diagonal(g, 0.0)
    drive = g.sum(axis=1)
    osc = (2.0 / params.K) * (np.exp(0.5j * params.K * t) - 1.0)
    return z0[None, :] + osc[:, None] * drive[None, :]


def three_body_state() -> ManyBodyState:
    """Atoms at 2 pi i, -2 pi - 2 pi i and 2 pi - 2 pi i."""
    tp = 2.0 * math.pi
    return ManyBodyState.from_z([1j * tp, -tp - 1j * tp, tp - 1j * tp])


def chain_state(n_atoms: int) -> ManyBodyState:
    """Atoms on consecutive lattice sites X = 2 pi j, P = 0, centred on 0."""
    if n_atoms < 2:
        raise ValueError("a chain needs at least two atoms")
    j = np.arange(n_atoms) - (n_atoms - 1) / 2.0
    return ManyBodyState(2.0 * math.pi * j, np.zeros(n_atoms))


# ---------------------------------------------------------------------------
# Dynamical crystals


@dataclass
class CrystalReport:
    """Outcome of a chain run.

    ``max_excursion`` is max_t |Z_i(t) - Z_i(0)|. The motion of a bound atom
    is a closed loop through its starting site, so the oscillation radius
    compared with the survival threshold is half of that.
    """

    n_atoms: int
    kind: str
    K: float
    strength: float
    periods: int
    max_excursion: list
    amplitude: list
    edge_amplitude: float
    predicted_edge_amplitude: float
    threshold: float
    threshold_name: str
    survived: bool
    survival_radius: float = SURVIVAL_RADIUS

    def to_dict(self) -> dict:
        return {
            "n_atoms": self.n_atoms,
            "kind": self.kind,
            "K": self.K,
            "strength": self.strength,
            "periods": self.periods,
            "max_excursion": list(self.max_excursion),
            "amplitude": list(self.amplitude),
            "edge_amplitude": self.edge_amplitude,
            "predicted_edge_amplitude": self.predicted_edge_amplitude,
            self.threshold_name: self.threshold,
            "survival_radius": self.survival_radius,
            "survived": self.survived,
        }


def crystal_thresholds(params: ModelParams, pot: ClassicalPotentialSpec) -> float:
    """Critical eps (contact) or critical atom number (hardcore)."""
    k = abs(params.K)
    if pot.is_contact:
        return 12.0 * (math.sqrt(2.0) - 1.0) * math.pi ** 2 * k
    if pot.is_hardcore:
        return (math.sqrt(2.0) - 1.0) * math.pi ** 2 * k / (4.0 * pot.a)
    raise ValueError("thresholds exist for contact and hardcore potentials only")


def edge_amplitude(params: ModelParams, pot: ClassicalPotentialSpec, n_atoms: int | None = None) -> float:
    """Linearised oscillation radius of the end atom of a long chain.

    Contact: eps/(12 pi |K|), the infinite-chain sum. Hardcore:
    4a(N-1)/(pi |K|), linear in the atom number.
    """
    k = abs(params.K)
    if pot.is_contact:
        return pot.eps / (12.0 * math.pi * k)
    if pot.is_hardcore:
        if n_atoms is None:
            raise ValueError("hardcore edge amplitude depends on n_atoms")
        return 4.0 * pot.a * (n_atoms - 1) / (math.pi * k)
    raise ValueError("edge amplitude exists for contact and hardcore potentials only")


def crystal_run(n_atoms: int, params: ModelParams, pot: ClassicalPotentialSpec,
                n_periods: int = 400, dt: float = DEFAULT_DT) -> CrystalReport:
    """Evolve a chain on adjacent sites and test the survival criterion."""
    if n_atoms < 2:
        raise ValueError("crystal_run needs at least two atoms")
    pot = pot.averaged()
    state = chain_state(n_atoms)
    traj = rwa_evolve(state, params, pot, T=2.0 * math.pi * n_periods, dt=dt)
    exc = np.abs(traj.z - traj.z[0]).max(axis=0)
    amp = 0.5 * exc
    edge = float(max(amp[0], amp[-1]))
    strength = pot.eps if pot.is_contact else pot.a
    is_contact = pot.is_contact
    return CrystalReport(
        n_atoms=n_atoms,
        kind=pot.kind,
        K=params.K,
        strength=strength,
        periods=n_periods,
        max_excursion=exc.tolist(),
        amplitude=amp.tolist(),
        edge_amplitude=edge,
        predicted_edge_amplitude=edge_amplitude(params, pot, n_atoms),
        threshold=crystal_thresholds(params, pot),
        threshold_name="eps_c" if is_contact else "N_c",
        survived=bool(edge < SURVIVAL_RADIUS),
    )
