"""Gramians of a TPDS: exact (per-block Stein equations) and empirical.

The controllability Gramian solves ``W - A * W * A^T = B * B^T``.  In the
Fourier domain this splits into ``s`` independent equations
``W_j - A_j W_j A_j^H = B_j B_j^H``; only ``s // 2 + 1`` of them are
solved, the rest follow by conjugation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import IndefiniteGramian, SolverStagnation, ValidationError
from .spectral import FourierBlocks, block_map, from_fourier, to_fourier
from .system import Tpds, adjoint, require_stable
from .tensor3 import Tensor3

STEIN_RTOL = 1e-11
PSD_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class Gramian:
    W: Tensor3
    kind: str        # "controllability" | "observability"
    origin: str      # "lyapunov" | "empirical"


@dataclass(frozen=True, eq=False)
class GramianFactor:
    """``W = Z * Z^T`` with ``Z`` of shape ``n x p x s``."""

    Z: Tensor3

    @property
    def rank(self) -> int:
        return self.Z.m


@dataclass(frozen=True, eq=False)
class SnapshotTensor:
    """Impulse-response snapshots laid out channel-major.

    Column ``j * (horizon + 1) + t`` holds ``A^t`` applied to input
    channel ``j``.
    """

    X: Tensor3
    horizon: int
    channels: int


# -- Stein solver ---------------------------------------------------------


def stein_residual(A: np.ndarray, X: np.ndarray, Q: np.ndarray) -> float:
    """Normwise backward error of ``X - A X A^H = Q``."""
    R = X - A @ X @ np.conj(A.T) - Q
    denom = np.linalg.norm(Q) + np.linalg.norm(A) ** 2 * np.linalg.norm(X)
    return float(np.linalg.norm(R) / denom) if denom > 0 else 0.0


def _stein_schur(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    # Schur form A = Z T Z^H turns the equation into X - T X T^H = Z^H Q Z,
    # solved one column at a time from the right.
    T, Z = sla.schur(A.astype(np.complex128), output="complex")
    Qt = np.conj(Z.T) @ Q @ Z
    n = T.shape[0]
    X = np.zeros((n, n), dtype=np.complex128)
    TX = np.zeros((n, n), dtype=np.complex128)
    Tc = np.conj(T)
    for j in range(n - 1, -1, -1):
        rhs = Qt[:, j] + TX[:, j + 1:] @ Tc[j, j + 1:]
        M = T * (-Tc[j, j])
        M[np.diag_indices(n)] += 1.0
        x = sla.solve_triangular(M, rhs, check_finite=False)
        X[:, j] = x
        TX[:, j] = T @ x
    return Z @ X @ np.conj(Z.T)


def _stein_smith(A: np.ndarray, Q: np.ndarray, max_iter: int = 64) -> np.ndarray | None:
    """Smith doubling; ``None`` if the series has not converged."""
    X = Q.astype(np.complex128)
    Ak = A.astype(np.complex128)
    for _ in range(max_iter):
        inc = Ak @ X @ np.conj(Ak.T)
        X = X + inc
        if np.linalg.norm(inc) <= 1e-17 * np.linalg.norm(X):
            return X
        if not np.isfinite(X).all():
            return None
        Ak = Ak @ Ak
    return None


def solve_stein(A: np.ndarray, Q: np.ndarray, rtol: float = STEIN_RTOL) -> np.ndarray:
    """Solve ``X - A X A^H = Q`` (discrete Lyapunov / Stein equation).

    Schur back-substitution first; if its backward error exceeds ``rtol``
    the Smith doubling iteration is tried.  Raises
    :class:`SolverStagnation` if neither reaches ``rtol``.
    """
    real = not np.iscomplexobj(A) and not np.iscomplexobj(Q)
    try:
        X = _stein_schur(A, Q)
        res = stein_residual(A, X, Q)
    except (np.linalg.LinAlgError, ValueError):
        X, res = None, np.inf
    if not res <= rtol:
        X2 = _stein_smith(A, Q)
        if X2 is not None:
            res2 = stein_residual(A, X2, Q)
            if res2 < res:
                X, res = X2, res2
        if not res <= rtol:
            raise SolverStagnation(None, float(res))
    X = (X + np.conj(X.T)) / 2
    return X.real if real else X


# -- exact Gramians -------------------------------------------------------


def gramian_blocks(Ah: FourierBlocks, Fh: FourierBlocks, kind: str) -> FourierBlocks:
    """Per-block Gramians from the Fourier blocks of ``A`` and ``B`` (or ``C``)."""
    if kind == "controllability":
        return block_map(lambda a, b: solve_stein(a, b @ np.conj(b.T)), Ah, Fh)
    if kind == "observability":
        return block_map(lambda a, c: solve_stein(np.conj(a.T), np.conj(c.T) @ c), Ah, Fh)
    raise ValidationError(f"unknown Gramian kind {kind!r}")


def lyapunov_gramian(sys: Tpds, kind: str = "controllability") -> Gramian:
    """Exact Gramian from the T-Lyapunov (Stein) equation."""
    require_stable(sys)
    Ah, Bh, Ch = sys.fourier
    W = gramian_blocks(Ah, Bh if kind == "controllability" else Ch, kind)
    return Gramian(_symmetrize(from_fourier(W)), kind, "lyapunov")


def _symmetrize(W: Tensor3) -> Tensor3:
    return (W + W.T) * 0.5


# -- empirical Gramians ---------------------------------------------------


def snapshot_blocks(Ah: FourierBlocks, Bh: FourierBlocks, horizon: int) -> np.ndarray:
    """Fourier blocks of the channel-major snapshot tensor, ``(s, n, m(T+1))``."""
    s, n, m = Bh.blocks.shape
    out = np.empty((s, n, m, horizon + 1), dtype=np.complex128)
    x = Bh.blocks
    for t in range(horizon + 1):
        out[:, :, :, t] = x
        if t < horizon:
            x = Ah.blocks @ x
    return out.reshape(s, n, m * (horizon + 1))


def impulse_snapshots(sys: Tpds, horizon: int) -> SnapshotTensor:
    """``[B_j, A*B_j, ..., A^T*B_j]`` for every input channel ``j``, channel-major."""
    if horizon < 0:
        raise ValidationError("horizon must be >= 0")
    Ah, Bh, _ = sys.fourier
    X = from_fourier(FourierBlocks(snapshot_blocks(Ah, Bh, horizon)))
    return SnapshotTensor(X, horizon, sys.m)


def empirical_gramian(snapshots: SnapshotTensor, kind: str = "controllability") -> Gramian:
    """``W = X * X^T``."""
    X = snapshots.X
    F = to_fourier(X)
    return Gramian(_symmetrize(from_fourier(F @ F.H)), kind, "empirical")


def adjoint_snapshots(sys: Tpds, horizon: int) -> SnapshotTensor:
    return impulse_snapshots(adjoint(sys), horizon)


# -- factorization --------------------------------------------------------


def _psd_eig(W: np.ndarray, scale: float):
    w, U = np.linalg.eigh((W + np.conj(W.T)) / 2)
    order = np.argsort(w)[::-1]
    w, U = w[order], U[:, order]
    if w.size and w[-1] < -PSD_SLACK * scale:
        raise IndefiniteGramian(float(w[-1]), scale)
    return np.clip(w, 0.0, None), U


def factor_blocks(W: FourierBlocks, rank_tol: float = 1e-10) -> tuple[FourierBlocks, np.ndarray]:
    """Blockwise ``W_j = Z_j Z_j^H`` via Hermitian eigendecompositions.

    Returns the factor blocks and the ``(s, n)`` eigenvalues (descending).
    Tuples whose norm is at most ``rank_tol`` times the largest are dropped.
    """
    scale = float(max(np.linalg.norm(b, 2) for b in W.blocks)) if W.s else 0.0
    def eig(X):
        w, U = _psd_eig(X, scale)
        return U, w

    U, lam = block_map(eig, W)
    lam = lam.real
    norms = np.sqrt(np.mean(lam ** 2, axis=0))
    top = norms.max(initial=0.0)
    p = int(np.count_nonzero(norms > rank_tol * top)) if top > 0 else 0
    p = max(p, 1)
    Z = U.blocks[:, :, :p] * np.sqrt(lam[:, None, :p])
    return FourierBlocks(Z), lam


def factor(W: Gramian, rank_tol: float = 1e-10) -> GramianFactor:
    """Square-root factor ``Z = U * S^{1/2}`` of a T-symmetric PSD Gramian."""
    Zb, _ = factor_blocks(to_fourier(W.W), rank_tol)
    return GramianFactor(from_fourier(Zb))


# -- controllability / observability --------------------------------------


def _all_positive(W: Tensor3, tol: float) -> bool:
    lam = block_map(lambda X: np.linalg.eigvalsh((X + np.conj(X.T)) / 2), to_fourier(W)).real
    top = float(np.max(lam, initial=0.0))
    return top > 0 and bool(np.all(lam > tol * top))


def is_controllable(sys: Tpds, tol: float = 1e-10) -> bool:
    return _all_positive(lyapunov_gramian(sys, "controllability").W, tol)


def is_observable(sys: Tpds, tol: float = 1e-10) -> bool:
    return _all_positive(lyapunov_gramian(sys, "observability").W, tol)
