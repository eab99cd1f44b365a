"""Entanglement-based non-Markovianity measure and its optimisation.

The measure sums every increase of E_SA(t) along a trajectory and maximises
over pure initial states of S(x)A. Pure S(x)A states are generated as
purifications of an apparatus state with Bloch vector (r, theta, phi); the
value depends only on r, which is what :func:`measure` scans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dynamics import BathSpec, evolve_amplitudes, gamma_of_t, p_of_t
from .info import KW_TOL, InfoPoint, accessible_info_kw_array
from .linalg import PureState, hermitian_eig, ket

RISE_TOL = 1e-10
DEFAULT_STEPS = 3000
DEFAULT_R_GRID = tuple(round(0.05 * k, 2) for k in range(21))

_PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


class MeasureError(ValueError):
    pass


def default_t_max(bath: BathSpec) -> float:
    return 30.0 if bath.oscillatory else 10.0


@dataclass(frozen=True)
class InitialStateSpec:
    """Apparatus state (I + r.sigma)/2 with r = r (sin t cos f, sin t sin f, cos t)."""

    r: float
    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.r <= 1.0):
            raise MeasureError(f"Bloch radius {self.r} outside [0, 1]")
        if not (0.0 <= self.theta <= math.pi) or not (0.0 <= self.phi < 2.0 * math.pi):
            raise MeasureError(f"angles out of range: theta={self.theta}, phi={self.phi}")

    def bloch_vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return self.r * np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])

    def apparatus_state(self) -> np.ndarray:
        return 0.5 * (np.eye(2) + np.einsum("k,kij->ij", self.bloch_vector(), _PAULI))


def purify(spec: InitialStateSpec) -> PureState:
    """Two-qubit pure state on S(x)A whose A marginal is the apparatus state."""
    q, vecs = hermitian_eig(spec.apparatus_state())
    q = np.clip(q, 0.0, None)
    amps = sum(math.sqrt(q[i]) * np.kron(ket(i), vecs[:, i]) for i in range(2))
    return PureState((2, 2), amps / np.linalg.norm(amps))


@dataclass(frozen=True)
class TimeSeries:
    ts: np.ndarray
    p: np.ndarray
    gamma: np.ndarray
    s_s: np.ndarray
    e_sa: np.ndarray
    j_se: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float)
        if ts.ndim != 1 or ts.size < 2:
            raise MeasureError("time grid needs at least two points")
        dt = np.diff(ts)
        if np.any(dt <= 0) or np.max(np.abs(dt - dt.mean())) > 1e-12 * max(1.0, abs(ts[-1])):
            raise MeasureError("time grid must be strictly increasing and uniform")
        for name in ("p", "gamma", "s_s", "e_sa", "j_se"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != ts.shape:
                raise MeasureError(f"column {name} has shape {arr.shape}, expected {ts.shape}")
            object.__setattr__(self, name, arr)
        for name in ("s_s", "e_sa", "j_se"):
            arr = getattr(self, name)
            if np.any(arr < -KW_TOL) or np.any(arr > 1.0 + KW_TOL):
                raise MeasureError(f"{name} leaves [0, 1]")
        if np.max(np.abs(self.e_sa + self.j_se - self.s_s)) > KW_TOL:
            raise MeasureError("E_SA + J_SE does not match S(rho_S)")
        object.__setattr__(self, "ts", ts)

    def __len__(self) -> int:
        return self.ts.size

    @property
    def points(self) -> list[InfoPoint]:
        return [InfoPoint(t, s, e, j) for t, s, e, j in zip(self.ts, self.s_s, self.e_sa, self.j_se)]


def initial_sae(spec: InitialStateSpec) -> np.ndarray:
    return np.kron(purify(spec).amplitudes, ket(0))


def trajectory(bath: BathSpec, spec: InitialStateSpec, t_max: float, steps: int) -> TimeSeries:
    """Sample p, gamma, S(rho_S), E_SA and J_SE on ``steps + 1`` uniform times."""
    if steps < 200:
        raise MeasureError("trajectory needs at least 200 steps")
    if not t_max > 0:
        raise MeasureError("t_max must be positive")
    ts = np.linspace(0.0, t_max, steps + 1)
    p = p_of_t(bath, ts)
    psi = evolve_amplitudes(initial_sae(spec), p)
    s_s, e_sa, j_se = accessible_info_kw_array(psi)
    return TimeSeries(ts=ts, p=p, gamma=gamma_of_t(bath, ts), s_s=s_s, e_sa=e_sa, j_se=j_se)


@dataclass(frozen=True)
class MeasureResult:
    value: float
    intervals: tuple[tuple[float, float], ...]
    argmax_r: float | None = None
    by_r: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        if self.value < 0:
            raise MeasureError("measure cannot be negative")
        if (self.value == 0) != (len(self.intervals) == 0):
            raise MeasureError("measure is zero exactly when no growth interval exists")


def growth_runs(values: Sequence[float], tol: float = RISE_TOL) -> list[tuple[int, int]]:
    """Maximal index runs (start, end) over which each step rises by more than ``tol``."""
    v = np.asarray(values, dtype=float)
    rising = np.diff(v) > tol
    runs = []
    start = None
    for i, up in enumerate(rising):
        if up and start is None:
            start = i
        elif not up and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(v) - 1))
    return runs


def measure_from_values(ts: Sequence[float], e_sa: Sequence[float], tol: float = RISE_TOL) -> MeasureResult:
    """Telescoping sum of E_SA over its growth runs."""
    e = np.asarray(e_sa, dtype=float)
    ts = np.asarray(ts, dtype=float)
    if e.size < 3 or ts.shape != e.shape:
        raise MeasureError("need at least three matching samples")
    runs = growth_runs(e, tol)
    value = float(sum(e[j] - e[i] for i, j in runs))
    return MeasureResult(value=value, intervals=tuple((float(ts[i]), float(ts[j])) for i, j in runs))


def measure_from_series(series: TimeSeries) -> MeasureResult:
    return measure_from_values(series.ts, series.e_sa)


def measure(
    bath: BathSpec,
    t_max: float | None = None,
    steps: int = DEFAULT_STEPS,
    r_grid: Iterable[float] = DEFAULT_R_GRID,
) -> MeasureResult:
    """Maximise the measure over apparatus Bloch radii (theta = phi = 0).

    Ties go to the smaller radius.
    """
    radii = sorted(set(float(r) for r in r_grid))
    if not radii:
        raise MeasureError("r_grid is empty")
    if radii[0] < 0 or radii[-1] > 1:
        raise MeasureError("radii must lie in [0, 1]")
    t_max = default_t_max(bath) if t_max is None else t_max
    best = None
    best_r = None
    table = []
    for r in radii:
        res = measure_from_series(trajectory(bath, InitialStateSpec(r), t_max, steps))
        table.append((r, res.value))
        if best is None or res.value > best.value:
            best, best_r = res, r
    return MeasureResult(value=best.value, intervals=best.intervals, argmax_r=best_r, by_r=tuple(table))


def measure_converged(
    bath: BathSpec,
    r: float = 0.0,
    t_max: float | None = None,
    dt: float = 0.01,
    tol: float = 1e-6,
    max_doublings: int = 6,
) -> tuple[MeasureResult, float]:
    """Extend the horizon at fixed step size until the measure changes by < ``tol``.

    Returns the last result and the horizon it was computed on.
    """
    t_max = default_t_max(bath) if t_max is None else t_max
    spec = InitialStateSpec(r)

    def at(horizon):
        steps = max(200, int(round(horizon / dt)))
        return measure_from_series(trajectory(bath, spec, horizon, steps))

    prev = at(t_max)
    for _ in range(max_doublings):
        t_max *= 2.0
        cur = at(t_max)
        if abs(cur.value - prev.value) < tol:
            return cur, t_max
        prev = cur
    raise MeasureError(f"measure did not converge within horizon {t_max}")


def angle_invariance_check(
    bath: BathSpec,
    r: float,
    samples: int = 16,
    t_max: float | None = None,
    steps: int = DEFAULT_STEPS,
    seed: int = 0,
) -> float:
    """Spread (max - min) of the measure over random apparatus Bloch angles at radius r."""
    if samples < 8:
        raise MeasureError("need at least 8 angle samples")
    t_max = default_t_max(bath) if t_max is None else t_max
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(samples):
        theta = float(np.arccos(rng.uniform(-1.0, 1.0)))
        phi = float(rng.uniform(0.0, 2.0 * math.pi))
        spec = InitialStateSpec(r, theta, phi)
        values.append(measure_from_series(trajectory(bath, spec, t_max, steps)).value)
    return float(max(values) - min(values))
