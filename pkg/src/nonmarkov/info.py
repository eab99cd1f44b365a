"""Entropies, two-qubit entanglement of formation and accessible information.

All entropies are in bits. Functions taking a :class:`DensityOperator` or
:class:`PureState` have array twins (suffix ``_array``) that work on stacks
of matrices or state vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .linalg import (
    PSD_FLOOR,
    DensityOperator,
    LinalgError,
    PureState,
    dagger,
    hermitian_eig,
    projector,
    ptrace,
)

KW_TOL = 1e-9
POVM_TOL = 1e-9

_YY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))
_PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


class InfoError(ValueError):
    pass


def _xlog2x(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    safe = np.where(x > 0, x, 1.0)
    return np.where(x > 0, x * np.log2(safe), 0.0)


def binary_entropy(x):
    x = np.asarray(x, dtype=float)
    h = 0.0 - _xlog2x(x) - _xlog2x(1.0 - x)
    return float(h) if h.ndim == 0 else h


def entropy_from_eigenvalues(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if np.any(w < PSD_FLOOR):
        raise InfoError(f"eigenvalue {w.min():.3e} below the PSD floor")
    w = np.clip(w, 0.0, None)
    return -np.sum(_xlog2x(w), axis=-1)


def entropy_array(rho: np.ndarray) -> np.ndarray:
    return entropy_from_eigenvalues(hermitian_eig(rho)[0])


def von_neumann_entropy(rho: DensityOperator) -> float:
    """S(rho) = -Tr rho log2 rho, with 0 log 0 = 0."""
    return float(entropy_array(rho.matrix))


def _check_two_qubit(rho: DensityOperator) -> None:
    if rho.dims != (2, 2):
        raise InfoError(f"expected a two-qubit operator, got dims {rho.dims}")


def concurrence_array(rho: np.ndarray) -> np.ndarray:
    """Wootters concurrence of a stack of two-qubit density matrices.

    With rho = sum_i |v_i><v_i| (v_i = sqrt(q_i) e_i), Wootters' lambda_i are
    the singular values of tau_ij = v_i^T (Y(x)Y) v_j. They are read off as the
    positive eigenvalues of the Hermitian matrix [[0, tau], [tau^H, 0]], which
    avoids taking square roots of tiny eigenvalues.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[-2:] != (4, 4):
        raise InfoError(f"expected 4x4 matrices, got {rho.shape[-2:]}")
    q, e = hermitian_eig(rho)
    cut = 64 * np.finfo(float).eps * np.maximum(q[..., :1], 0.0)
    q = np.where(q > cut, q, 0.0)
    # drop eigen-directions that are null for every matrix in the stack
    rank = int(np.max(np.count_nonzero(q.reshape(-1, 4), axis=1), initial=0))
    if rank == 0:
        return np.zeros(rho.shape[:-2])
    v = e[..., :, :rank] * np.sqrt(q[..., None, :rank])
    tau = np.swapaxes(v, -1, -2) @ _YY @ v
    block = np.zeros(rho.shape[:-2] + (2 * rank, 2 * rank), dtype=complex)
    block[..., :rank, rank:] = tau
    block[..., rank:, :rank] = dagger(tau)
    sv = hermitian_eig(block)[0][..., :rank]
    lam = np.zeros(rho.shape[:-2] + (4,))
    lam[..., :rank] = np.clip(sv, 0.0, None)
    c = lam[..., 0] - lam[..., 1] - lam[..., 2] - lam[..., 3]
    return np.clip(c, 0.0, 1.0)


def concurrence(rho: DensityOperator) -> float:
    _check_two_qubit(rho)
    return float(concurrence_array(rho.matrix))


def eof_from_concurrence(c):
    c = np.clip(np.asarray(c, dtype=float), 0.0, 1.0)
    return binary_entropy(0.5 * (1.0 + np.sqrt(1.0 - c * c)))


def eof_array(rho: np.ndarray) -> np.ndarray:
    return np.asarray(eof_from_concurrence(concurrence_array(rho)))


def eof(rho: DensityOperator) -> float:
    """Entanglement of formation of two qubits, in ebits."""
    _check_two_qubit(rho)
    return float(eof_array(rho.matrix))


def accessible_info_kw_array(psi: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(S(rho_S), E(rho_SA), J_SE) for a stack of pure S(x)A(x)E state vectors."""
    psi = np.asarray(psi, dtype=complex)
    rho = projector(psi)
    rho_sa = ptrace(rho, (2, 2, 2), (0, 1))
    rho_s = ptrace(rho_sa, (2, 2), (0,))
    s_s = entropy_array(rho_s)
    e_sa = eof_array(rho_sa)
    return s_s, e_sa, s_s - e_sa


def accessible_info_kw(sae: PureState) -> float:
    """Accessible information J_SE from the Koashi-Winter identity S(rho_S) - E(rho_SA)."""
    if sae.dims != (2, 2, 2):
        raise InfoError(f"expected a three-qubit pure state, got dims {sae.dims}")
    return float(accessible_info_kw_array(sae.amplitudes)[2])


@dataclass(frozen=True)
class Povm:
    """Measurement on a qubit: PSD elements summing to the identity."""

    elements: tuple[np.ndarray, ...]

    def __post_init__(self):
        els = tuple(np.asarray(el, dtype=complex) for el in self.elements)
        if not els:
            raise InfoError("a POVM needs at least one element")
        for el in els:
            if el.shape != (2, 2):
                raise InfoError(f"POVM element has shape {el.shape}, expected (2, 2)")
            if np.max(np.abs(el - dagger(el))) > 1e-10 or hermitian_eig(el)[0][-1] < -1e-10:
                raise InfoError("POVM element is not PSD")
        if np.max(np.abs(sum(els) - np.eye(2))) > POVM_TOL:
            raise InfoError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", els)

    @classmethod
    def projective(cls, theta: float, phi: float) -> "Povm":
        n = (np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta))
        up = 0.5 * (np.eye(2) + np.einsum("k,kij->ij", n, _PAULI))
        return cls((up, np.eye(2) - up))


def _qubit_entropy(m: np.ndarray) -> np.ndarray:
    # entropy of normalised 2x2 PSD matrices from trace and determinant
    tr = np.real(np.trace(m, axis1=-2, axis2=-1))
    det = np.real(m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0])
    safe = np.where(tr > 0, tr, 1.0)
    disc = np.sqrt(np.clip(1.0 - 4.0 * det / safe**2, 0.0, 1.0))
    return binary_entropy(0.5 * (1.0 + disc))


def _conditional_blocks(rho_se: np.ndarray, elements: np.ndarray) -> np.ndarray:
    # unnormalised S states Tr_E[(I (x) Pi) rho_SE] for a stack of E elements
    t = rho_se.reshape(2, 2, 2, 2)
    return np.einsum("aebf,...fe->...ab", t, elements)


def measurement_information(rho_se: DensityOperator, povm: Povm) -> float:
    """S(rho_S) - sum_i p_i S(rho_S|i) for a measurement on the second qubit."""
    _check_two_qubit(rho_se)
    blocks = _conditional_blocks(rho_se.matrix, np.array(povm.elements))
    probs = np.real(np.trace(blocks, axis1=-2, axis2=-1))
    rho_s = ptrace(rho_se.matrix, (2, 2), (0,))
    cond = np.where(probs > 1e-15, probs * _qubit_entropy(blocks), 0.0)
    return float(_qubit_entropy(rho_s) - np.sum(cond))


def accessible_info_bruteforce(rho_se: DensityOperator, grid: int = 64) -> float:
    """Lower bound on J_SE by direct search over projective measurements on E.

    Rank-one projectors (I + n.sigma)/2 are scanned on a ``grid`` x ``grid``
    mesh of Bloch angles, then the best point is polished with Nelder-Mead.
    """
    _check_two_qubit(rho_se)
    if grid < 64:
        raise InfoError("grid must have at least 64 points per angle")
    rho = rho_se.matrix
    s_s = _qubit_entropy(ptrace(rho, (2, 2), (0,)))

    def info(theta, phi):
        theta, phi = np.asarray(theta, dtype=float), np.asarray(phi, dtype=float)
        n = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)
        up = 0.5 * (np.eye(2) + np.einsum("...k,kij->...ij", n, _PAULI))
        total = s_s
        for el in (up, np.eye(2) - up):
            blk = _conditional_blocks(rho, el)
            pr = np.real(np.trace(blk, axis1=-2, axis2=-1))
            total = total - np.where(pr > 1e-15, pr * _qubit_entropy(blk), 0.0)
        return total

    thetas = np.linspace(0.0, np.pi, grid)
    phis = np.linspace(0.0, 2.0 * np.pi, grid, endpoint=False)
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    vals = info(tt, pp)
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    best = float(vals[i, j])
    res = minimize(
        lambda x: -float(info(x[0], x[1])),
        x0=np.array([thetas[i], phis[j]]),
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000},
    )
    return max(best, -float(res.fun))


@dataclass(frozen=True)
class InfoPoint:
    t: float
    s_s: float
    e_sa: float
    j_se: float

    def __post_init__(self):
        for name in ("s_s", "e_sa", "j_se"):
            val = getattr(self, name)
            if not (-KW_TOL <= val <= 1.0 + KW_TOL):
                raise InfoError(f"{name} = {val} outside [0, 1]")
        if abs(self.e_sa + self.j_se - self.s_s) > KW_TOL:
            raise InfoError("E_SA + J_SE differs from S(rho_S)")


def info_point(t: float, sae: PureState) -> InfoPoint:
    s_s, e_sa, j_se = accessible_info_kw_array(sae.amplitudes)
    return InfoPoint(t=float(t), s_s=float(s_s), e_sa=float(e_sa), j_se=float(j_se))


__all__: Sequence[str] = [
    "InfoError",
    "InfoPoint",
    "LinalgError",
    "Povm",
    "accessible_info_bruteforce",
    "accessible_info_kw",
    "accessible_info_kw_array",
    "binary_entropy",
    "concurrence",
    "concurrence_array",
    "entropy_array",
    "eof",
    "eof_array",
    "eof_from_concurrence",
    "info_point",
    "measurement_information",
    "von_neumann_entropy",
]
