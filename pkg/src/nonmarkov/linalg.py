"""Small dense complex linear algebra.

Matrices are plain ``numpy`` arrays. Most functions accept a stack of
matrices with arbitrary leading batch axes, so whole trajectories can be
processed in one call.

Subsystem ordering is fixed throughout the package: index 0 is the system
S, 1 the apparatus A and 2 the environment E.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

S, A, E = 0, 1, 2

MAX_DIM = 64
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_FLOOR = -1e-9
NORM_TOL = 1e-10

_EIG_INPUT_TOL = 1e-8
_MAX_SWEEPS = 60


class LinalgError(ValueError):
    pass


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of the operands, left to right."""
    if not ops:
        raise LinalgError("tensor needs at least one operand")
    out = np.asarray(ops[0])
    for op in ops[1:]:
        op = np.asarray(op)
        rows = out.shape[0] * op.shape[0]
        cols = (out.shape[1] if out.ndim > 1 else 1) * (op.shape[1] if op.ndim > 1 else 1)
        if rows > MAX_DIM or cols > MAX_DIM:
            raise LinalgError(f"tensor product of size {rows}x{cols} exceeds {MAX_DIM}x{MAX_DIM}")
        out = np.kron(out, op)
    if not np.all(np.isfinite(out)):
        raise LinalgError("non-finite entries in tensor product")
    return out


def ket(index: int, dim: int = 2) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec)
    return vec[..., :, None] * vec[..., None, :].conj()


def dagger(m: np.ndarray) -> np.ndarray:
    return np.swapaxes(np.asarray(m), -1, -2).conj()


def ptrace(mat: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace of a (possibly batched) operator, keeping ``keep`` factors.

    ``keep`` is taken in ascending order; the result lives on those factors in
    their original order.
    """
    dims = tuple(int(d) for d in dims)
    keep = sorted(set(int(k) for k in keep))
    n = len(dims)
    if not keep or keep[0] < 0 or keep[-1] >= n:
        raise LinalgError(f"invalid subsystem set {keep} for dims {dims}")
    mat = np.asarray(mat)
    total = int(np.prod(dims))
    if mat.shape[-2:] != (total, total):
        raise LinalgError(f"operator shape {mat.shape[-2:]} does not match dims {dims}")
    batch = mat.shape[:-2]
    nb = len(batch)
    t = mat.reshape(batch + dims + dims)
    # einsum subscripts: batch axes, then row factors, then column factors
    letters = iter("abcdefghijklmnopqrstuvwxyz")
    b_idx = [next(letters) for _ in range(nb)]
    row = [next(letters) for _ in range(n)]
    col = [row[i] if i not in keep else next(letters) for i in range(n)]
    out = b_idx + [row[i] for i in keep] + [col[i] for i in keep]
    expr = "".join(b_idx + row + col) + "->" + "".join(out)
    kd = int(np.prod([dims[i] for i in keep]))
    return np.einsum(expr, t).reshape(batch + (kd, kd))


def _check_hermitian(m: np.ndarray, tol: float) -> None:
    dev = np.max(np.abs(m - dagger(m))) if m.size else 0.0
    if not dev <= tol:
        raise LinalgError(f"matrix is not Hermitian (max |A - A^H| = {dev:.3e})")


def hermitian_eig(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of Hermitian matrices by cyclic Jacobi rotations.

    Works on a single ``(n, n)`` matrix or a stack ``(..., n, n)``; every
    matrix in a stack gets its own rotation angles, the sweep order is shared.

    Returns
    -------
    eigenvalues : ndarray, shape (..., n)
        Real, sorted in descending order.
    eigenvectors : ndarray, shape (..., n, n)
        Column ``k`` belongs to eigenvalue ``k``.
    """
    a = np.array(m, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise LinalgError(f"expected square matrices, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise LinalgError("non-finite matrix entries")
    _check_hermitian(a, _EIG_INPUT_TOL)
    n = a.shape[-1]
    batch = a.shape[:-2]
    a = a.reshape((-1, n, n))
    a = 0.5 * (a + dagger(a))
    # exact power-of-two normalisation to O(1) entries so thresholds are absolute
    _, expo = np.frexp(np.max(np.maximum(np.abs(a.real), np.abs(a.imag)), axis=(1, 2), initial=0.0))
    a = np.ldexp(a.real, -expo[:, None, None]) + 1j * np.ldexp(a.imag, -expo[:, None, None])
    v = np.broadcast_to(np.eye(n, dtype=complex), a.shape).copy()
    pairs = [(p, q) for p in range(n - 1) for q in range(p + 1, n)]
    # off-diagonal entries below n * eps * ||A||_F are at rounding level (the
    # backward error of a rotation sweep). Near degenerate pairs, rounding can
    # recycle residue of that size indefinitely, so a sweep that fails to
    # shrink an already tiny off-diagonal part also counts as converged.
    thresh = n * np.finfo(float).eps * np.maximum(np.linalg.norm(a, axis=(1, 2)), np.finfo(float).tiny)
    prev = np.full(a.shape[0], np.inf)

    for _ in range(_MAX_SWEEPS):
        off = np.abs(a)
        off[:, range(n), range(n)] = 0.0
        cur = off.max(axis=(1, 2), initial=0.0)
        if np.all((cur <= thresh) | ((cur <= 64.0 * thresh) & (cur >= prev))):
            break
        prev = cur
        for p, q in pairs:
            apq = a[:, p, q]
            mag = np.abs(apq)
            active = mag > thresh
            if not np.any(active):
                continue
            phase = np.where(active, apq / np.where(active, mag, 1.0), 1.0)
            safe = np.where(active, mag, 1.0)
            tau = (a[:, q, q].real - a[:, p, p].real) / (2.0 * safe)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            # G = diag(1, conj(ph)) @ [[c, s], [-s, c]] on (p, q): the phase makes
            # the pivot real, the real rotation then annihilates it.
            g_pp = c
            g_pq = s
            g_qp = -s * np.conj(phase)
            g_qq = c * np.conj(phase)
            # columns: A <- A G
            col_p = a[:, :, p].copy()
            col_q = a[:, :, q].copy()
            a[:, :, p] = col_p * g_pp[:, None] + col_q * g_qp[:, None]
            a[:, :, q] = col_p * g_pq[:, None] + col_q * g_qq[:, None]
            # rows: A <- G^H A
            row_p = a[:, p, :].copy()
            row_q = a[:, q, :].copy()
            a[:, p, :] = np.conj(g_pp)[:, None] * row_p + np.conj(g_qp)[:, None] * row_q
            a[:, q, :] = np.conj(g_pq)[:, None] * row_p + np.conj(g_qq)[:, None] * row_q
            a[:, p, q] = 0.0
            a[:, q, p] = 0.0
            vp = v[:, :, p].copy()
            vq = v[:, :, q].copy()
            v[:, :, p] = vp * g_pp[:, None] + vq * g_qp[:, None]
            v[:, :, q] = vp * g_pq[:, None] + vq * g_qq[:, None]
    else:
        raise LinalgError("Jacobi iteration did not converge")

    w = np.ldexp(np.real(np.diagonal(a, axis1=1, axis2=2)), expo[:, None])
    order = np.argsort(-w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return w.reshape(batch + (n,)), v.reshape(batch + (n, n))


def eigvalsh(m: np.ndarray) -> np.ndarray:
    return hermitian_eig(m)[0]


def min_eigenvalue(m: np.ndarray) -> np.ndarray | float:
    w = hermitian_eig(m)[0][..., -1]
    return float(w) if np.ndim(w) == 0 else w


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Square root of PSD matrices; eigenvalues below round-off are zeroed."""
    w, v = hermitian_eig(m)
    n = w.shape[-1]
    cut = 16 * n * np.finfo(float).eps * np.maximum(w[..., :1], 0.0)
    w = np.where(w > cut, w, 0.0)
    return (v * np.sqrt(w)[..., None, :]) @ dagger(v)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(eigvalsh(np.asarray(a) - np.asarray(b)))))


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, unit-trace, positive semidefinite operator on ``dims``."""

    dims: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 2 for d in dims):
            raise LinalgError(f"subsystem dimensions must be >= 2, got {dims}")
        m = np.asarray(self.matrix, dtype=complex)
        total = int(np.prod(dims))
        if m.shape != (total, total):
            raise LinalgError(f"matrix shape {m.shape} does not match dims {dims}")
        if not np.all(np.isfinite(m)):
            raise LinalgError("non-finite matrix entries")
        _check_hermitian(m, HERMITIAN_TOL)
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise LinalgError(f"trace {tr!r} is not 1")
        lo = min_eigenvalue(m)
        if lo < PSD_FLOOR:
            raise LinalgError(f"operator is not PSD (min eigenvalue {lo:.3e})")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class PureState:
    """Unit-norm state vector on the tensor product ``dims``."""

    dims: tuple[int, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 2 for d in dims):
            raise LinalgError(f"subsystem dimensions must be >= 2, got {dims}")
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != int(np.prod(dims)):
            raise LinalgError(f"{amps.size} amplitudes do not match dims {dims}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise LinalgError(f"state norm {norm!r} is not 1")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    def density(self) -> DensityOperator:
        return DensityOperator(self.dims, projector(self.amplitudes))


def partial_trace(rho: DensityOperator, keep: Sequence[int]) -> DensityOperator:
    """Reduce ``rho`` to the subsystems listed in ``keep``."""
    keep = sorted(set(int(k) for k in keep))
    if not keep or keep[0] < 0 or keep[-1] >= len(rho.dims):
        raise LinalgError(f"invalid subsystem set {keep} for dims {rho.dims}")
    return DensityOperator(tuple(rho.dims[i] for i in keep), ptrace(rho.matrix, rho.dims, keep))
