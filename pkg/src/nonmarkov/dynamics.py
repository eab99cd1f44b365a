"""Amplitude damping of a qubit coupled to a Lorentzian zero-temperature bath.

Time is measured in units of 1/gamma0. The damping probability p(t) and the
decay rate gamma(t) are evaluated in closed form; the master equation
integrator is only used as an independent cross-check of those forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import (
    DensityOperator,
    LinalgError,
    PureState,
    dagger,
    ket,
    min_eigenvalue,
    tensor,
)

POLE = math.inf
"""Marker returned by :func:`gamma_of_t` where the decay rate diverges."""

P_CLAMP_TOL = 1e-12
POLE_TOL = 1e-12
KRAUS_TOL = 1e-10
CP_FLOOR = -1e-9

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()
_EXCITED = np.array([[0, 0], [0, 1]], dtype=complex)


class DynamicsError(ValueError):
    pass


class PoleError(DynamicsError):
    """A pole of the decay rate lies inside an integration step."""


@dataclass(frozen=True)
class BathSpec:
    """Lorentzian reservoir J(w) = gamma0 lam^2 / (2 pi ((w0 - w)^2 + lam^2)).

    ``omega0`` has no role in the closed forms and is kept for bookkeeping.
    """

    lambda_ratio: float
    gamma0: float = 1.0
    omega0: float = 1.0

    def __post_init__(self):
        if not (self.lambda_ratio > 0 and math.isfinite(self.lambda_ratio)):
            raise DynamicsError(f"lambda_ratio must be a positive number, got {self.lambda_ratio}")
        if not (self.gamma0 > 0 and math.isfinite(self.gamma0)):
            raise DynamicsError(f"gamma0 must be positive, got {self.gamma0}")

    @property
    def lam(self) -> float:
        return self.lambda_ratio * self.gamma0

    @property
    def d_squared(self) -> float:
        return self.lam**2 - 2.0 * self.gamma0 * self.lam

    @property
    def abs_d(self) -> float:
        return math.sqrt(abs(self.d_squared))

    @property
    def oscillatory(self) -> bool:
        return self.lambda_ratio < 2.0

    @property
    def tau_bath(self) -> float:
        return 1.0 / self.lam

    @property
    def tau_relax(self) -> float:
        return 1.0 / self.gamma0


def _times(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DynamicsError("time must be finite and non-negative")
    return t


def _scalar_or_array(x: np.ndarray, like):
    return float(x) if np.ndim(like) == 0 else x


def coherence_factor(bath: BathSpec, t) -> np.ndarray:
    """Signed amplitude G(t) with p(t) = 1 - G(t)^2.

    G(t) = exp(-lam t/2) [cosh(d t/2) + (lam/d) sinh(d t/2)]; for lam < 2 gamma0
    the trigonometric form with |d| is used.
    """
    t = _times(t)
    lam = bath.lam
    if bath.d_squared < 0:
        w = bath.abs_d
        x = 0.5 * w * t
        return np.exp(-0.5 * lam * t) * (np.cos(x) + (lam / w) * np.sin(x))
    d = bath.abs_d
    decay_fast = np.exp(-0.5 * (d + lam) * t)
    # exp(-lam t/2) sinh(d t/2) / d, stable down to d = 0
    sinh_term = decay_fast * (0.5 * t if d == 0 else np.expm1(d * t) / (2.0 * d))
    cosh_term = 0.5 * (np.exp(0.5 * (d - lam) * t) + decay_fast)
    return cosh_term + lam * sinh_term


def _pole_bracket(bath: BathSpec, t: np.ndarray) -> np.ndarray:
    # cos(|d|t/2) + (lam/|d|) sin(|d|t/2); vanishes exactly at the poles
    w = bath.abs_d
    x = 0.5 * w * t
    return np.cos(x) + (bath.lam / w) * np.sin(x)


def p_of_t(bath: BathSpec, t):
    """Damping probability p(t) in [0, 1]."""
    t_arr = _times(t)
    p = 1.0 - coherence_factor(bath, t_arr) ** 2
    p = np.where((p < 0) & (p > -P_CLAMP_TOL), 0.0, p)
    p = np.where((p > 1) & (p < 1 + P_CLAMP_TOL), 1.0, p)
    return _scalar_or_array(p, t)


def gamma_of_t(bath: BathSpec, t):
    """Decay rate gamma(t), in the same units as ``bath.gamma0``.

    Where the denominator vanishes the value is :data:`POLE`.
    """
    t_arr = _times(t)
    lam, g0 = bath.lam, bath.gamma0
    if bath.d_squared < 0:
        w = bath.abs_d
        x = 0.5 * w * t_arr
        bracket = _pole_bracket(bath, t_arr)
        pole = np.abs(bracket) < POLE_TOL
        den = np.where(pole, 1.0, w * bracket)
        gamma = np.where(pole, POLE, 2.0 * g0 * lam * np.sin(x) / den)
    else:
        d = bath.abs_d
        # numerator and denominator scaled by 2 exp(-d t/2)
        u = 0.5 * t_arr * 2.0 if d == 0 else -np.expm1(-d * t_arr) / d
        gamma = 2.0 * g0 * lam * u / (1.0 + np.exp(-d * t_arr) + lam * u)
    return _scalar_or_array(gamma, t)


def pole_times(bath: BathSpec, t_end: float, scan: int = 4096) -> list[float]:
    """Times in (0, t_end] where gamma(t) diverges, located by bisection."""
    if not bath.oscillatory or t_end <= 0:
        return []
    grid = np.linspace(0.0, t_end, scan + 1)
    vals = _pole_bracket(bath, grid)
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        lo, hi = float(grid[i]), float(grid[i + 1])
        flo = float(_pole_bracket(bath, lo))
        if flo == 0.0:
            root = lo
        else:
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                fmid = float(_pole_bracket(bath, mid))
                if fmid == 0.0 or hi - lo <= 4 * np.finfo(float).eps * max(1.0, hi):
                    break
                if (fmid > 0) == (flo > 0):
                    lo, flo = mid, fmid
                else:
                    hi = mid
            root = 0.5 * (lo + hi)
        if root > 0 and (not roots or root - roots[-1] > 1e-9):
            roots.append(root)
    return roots


def _check_p(p) -> float:
    p = float(p)
    if not (0.0 <= p <= 1.0):
        raise DynamicsError(f"damping probability {p} outside [0, 1]")
    return p


def kraus_at(p: float) -> tuple[np.ndarray, np.ndarray]:
    p = _check_p(p)
    m1 = np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - p)]], dtype=complex)
    m2 = np.array([[0.0, math.sqrt(p)], [0.0, 0.0]], dtype=complex)
    return m1, m2


def apply_kraus(kraus, rho: np.ndarray) -> np.ndarray:
    return sum(k @ rho @ dagger(k) for k in kraus)


def dilation_at(p: float) -> np.ndarray:
    """Unitary on A (x) E realising amplitude damping when E starts in |0>.

    Rotation by arcsin(sqrt(p)) in the {|10>, |01>} plane, identity on |00>
    and |11>.
    """
    p = _check_p(p)
    c, s = math.sqrt(1.0 - p), math.sqrt(p)
    u = np.eye(4, dtype=complex)
    # basis order |AE>: 00, 01, 10, 11
    u[2, 2] = c
    u[1, 2] = s
    u[2, 1] = -s
    u[1, 1] = c
    return u


def dilation_batch(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise DynamicsError("damping probability outside [0, 1]")
    c, s = np.sqrt(1.0 - p), np.sqrt(p)
    u = np.broadcast_to(np.eye(4, dtype=complex), p.shape + (4, 4)).copy()
    u[..., 2, 2] = c
    u[..., 1, 2] = s
    u[..., 2, 1] = -s
    u[..., 1, 1] = c
    return u


def evolve_amplitudes(psi: np.ndarray, p) -> np.ndarray:
    """Apply I_S (x) U_AE(p) to S(x)A(x)E amplitude vectors.

    ``p`` may be an array; the result then carries its shape as leading axes.
    """
    u = dilation_batch(p)
    full = np.einsum("ij,...kl->...ikjl", np.eye(2), u).reshape(np.shape(p) + (8, 8))
    return full @ np.asarray(psi, dtype=complex)


def evolve_tripartite(initial: PureState, p: float) -> PureState:
    """Evolve an S(x)A(x)E state with E in its ground state."""
    if initial.dims != (2, 2, 2):
        raise DynamicsError(f"expected dims (2, 2, 2), got {initial.dims}")
    amps = initial.amplitudes.reshape(2, 2, 2)
    if np.max(np.abs(amps[:, :, 1])) > 1e-12:
        raise DynamicsError("environment is not in its ground state |0>")
    return PureState((2, 2, 2), evolve_amplitudes(initial.amplitudes, _check_p(p)))


def lindblad_rhs(gamma: float, rho: np.ndarray) -> np.ndarray:
    jump = SIGMA_MINUS @ rho @ SIGMA_PLUS
    anti = _EXCITED @ rho + rho @ _EXCITED
    return gamma * (jump - 0.5 * anti)


def _rk4(bath: BathSpec, rho: np.ndarray, t0: float, t1: float, n: int) -> np.ndarray:
    h = (t1 - t0) / n
    for k in range(n):
        t = t0 + k * h
        g = gamma_of_t(bath, [t, t + 0.5 * h, t + h])
        if not np.all(np.isfinite(g)):
            raise PoleError(f"decay rate pole inside step [{t}, {t + h}]")
        k1 = lindblad_rhs(g[0], rho)
        k2 = lindblad_rhs(g[1], rho + 0.5 * h * k1)
        k3 = lindblad_rhs(g[1], rho + 0.5 * h * k2)
        k4 = lindblad_rhs(g[2], rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return rho


def transfer(rho: np.ndarray, p1: float, p2: float) -> np.ndarray:
    """Propagate a qubit state from channel parameter p1 to p2 (p1 < 1)."""
    k = (1.0 - p2) / (1.0 - p1)
    out = np.empty_like(rho)
    out[1, 1] = k * rho[1, 1]
    out[0, 0] = rho[0, 0] + (1.0 - k) * rho[1, 1]
    out[0, 1] = math.sqrt(k) * rho[0, 1]
    out[1, 0] = math.sqrt(k) * rho[1, 0]
    return out


def integrate_master_equation(
    bath: BathSpec,
    rho0: DensityOperator,
    t_end: float,
    steps: int,
    skip_poles: bool = True,
    skip_width: float | None = None,
) -> DensityOperator:
    """Fourth-order Runge-Kutta solution of the time-local master equation.

    Between poles of gamma(t) the equation is stepped with RK4 at step size
    ``t_end / steps``. A window of half-width ``skip_width`` around each pole
    is bridged with the closed-form map between the two channel parameters.
    """
    if rho0.dims != (2,):
        raise DynamicsError(f"master equation acts on a single qubit, got dims {rho0.dims}")
    if steps < 100:
        raise DynamicsError("need at least 100 steps")
    if t_end < 0:
        raise DynamicsError("t_end must be non-negative")
    rho = rho0.matrix.copy()
    if t_end == 0:
        return DensityOperator((2,), rho)
    h = t_end / steps
    poles = pole_times(bath, t_end)
    if poles and not skip_poles:
        raise PoleError(f"decay rate pole at t = {poles[0]:.6g} inside the integration span")
    width = 8.0 * h if skip_width is None else skip_width

    t = 0.0
    for tp in poles:
        a, b = max(t, tp - width), min(t_end, tp + width)
        if a > t:
            rho = _rk4(bath, rho, t, a, max(1, math.ceil((a - t) / h - 1e-9)))
        # bridge the singular point with the exact map Lambda_{b,a}
        rho = transfer(rho, p_of_t(bath, a), p_of_t(bath, b))
        t = b
    if t_end > t:
        rho = _rk4(bath, rho, t, t_end, max(1, math.ceil((t_end - t) / h - 1e-9)))
    rho = 0.5 * (rho + dagger(rho))
    return DensityOperator((2,), rho)


@dataclass(frozen=True)
class ChannelPoint:
    t: float
    p: float
    gamma: float
    kraus: tuple[np.ndarray, np.ndarray]
    dilation: np.ndarray

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise DynamicsError(f"p = {self.p} outside [0, 1]")
        m1, m2 = self.kraus
        completeness = dagger(m1) @ m1 + dagger(m2) @ m2
        if np.max(np.abs(completeness - np.eye(2))) > KRAUS_TOL:
            raise DynamicsError("Kraus operators are not complete")
        u = self.dilation
        if np.max(np.abs(dagger(u) @ u - np.eye(4))) > KRAUS_TOL:
            raise DynamicsError("dilation is not unitary")


def channel_at(bath: BathSpec, t: float) -> ChannelPoint:
    p = p_of_t(bath, t)
    return ChannelPoint(t=float(t), p=p, gamma=gamma_of_t(bath, t), kraus=kraus_at(p), dilation=dilation_at(p))


def choi_matrix(action, dim: int = 2) -> np.ndarray:
    """Choi matrix sum_ij |i><j| (x) action(|i><j|); trace ``dim`` for TP maps."""
    out = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            eij = np.outer(ket(i, dim), ket(j, dim))
            out += tensor(eij, action(eij))
    return out


def damping_action(p: float):
    """Linear map of the amplitude-damping family, defined for any real p <= 1.

    For p < 0 the map is not CP and has no real Kraus pair, so it is written
    directly on matrix elements.
    """
    if p > 1.0:
        raise DynamicsError(f"p = {p} > 1 does not define a damping map")
    keep = math.sqrt(1.0 - p)

    def action(rho: np.ndarray) -> np.ndarray:
        return np.array(
            [[rho[0, 0] + p * rho[1, 1], keep * rho[0, 1]], [keep * rho[1, 0], (1.0 - p) * rho[1, 1]]],
            dtype=complex,
        )

    return action


@dataclass(frozen=True)
class IntermediateMap:
    t1: float
    t2: float
    p21: float
    choi: np.ndarray

    @property
    def min_choi_eigenvalue(self) -> float:
        return min_eigenvalue(self.choi)

    @property
    def is_cp(self) -> bool:
        return self.min_choi_eigenvalue >= CP_FLOOR


def composition_parameter(p1, p2):
    """p21 such that Lambda(p2) = Lambda(p21) o Lambda(p1)."""
    return 1.0 - (1.0 - np.asarray(p2)) / (1.0 - np.asarray(p1))


def intermediate_map(bath: BathSpec, t1: float, t2: float) -> IntermediateMap:
    if not (0.0 <= t1 < t2):
        raise DynamicsError(f"need 0 <= t1 < t2, got t1={t1}, t2={t2}")
    p1, p2 = p_of_t(bath, t1), p_of_t(bath, t2)
    if p1 >= 1.0:
        raise DynamicsError(f"p(t1) = 1 at t1 = {t1}; intermediate map undefined")
    p21 = float(composition_parameter(p1, p2))
    return IntermediateMap(t1=float(t1), t2=float(t2), p21=p21, choi=choi_matrix(damping_action(p21)))


__all__ = [
    "POLE",
    "BathSpec",
    "ChannelPoint",
    "DynamicsError",
    "IntermediateMap",
    "LinalgError",
    "PoleError",
    "apply_kraus",
    "channel_at",
    "choi_matrix",
    "coherence_factor",
    "composition_parameter",
    "damping_action",
    "dilation_at",
    "evolve_amplitudes",
    "evolve_tripartite",
    "gamma_of_t",
    "integrate_master_equation",
    "intermediate_map",
    "kraus_at",
    "p_of_t",
    "pole_times",
    "transfer",
]
