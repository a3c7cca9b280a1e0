"""T-SVD, T-EVD, truncation and F-diagonal square roots.

Singular tuples are index aligned: tuple ``j`` collects the ``j``-th
singular value of every Fourier block.  Because each block's values are
sorted in descending order, the tuple norms are automatically
nonincreasing, so keeping the leading ``r`` indices is the same as
keeping the ``r`` tuples of largest Frobenius norm, and the truncated
factors stay T-orthogonal.

Each block's left singular vectors are normalized so that their
largest-magnitude entry is real and positive.  Mirrored blocks are
conjugated copies, never recomputed.

The factorization is ``A = U * S * V^T`` with a right factor ``V`` distinct
from ``U``; a form ``U * S * U^T`` only arises for T-symmetric input, as in
:func:`t_evd`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, DimensionMismatch, NearZeroSingularValue, ValidationError
from .spectral import FourierBlocks, block_map, from_fourier, to_fourier
from .tensor3 import Tensor3, is_t_symmetric


@dataclass(frozen=True, eq=False)
class SingularSpectrum:
    """Per-block singular values ``sigma[i, j]`` (block ``i``, index ``j``)."""

    sigma: np.ndarray

    @property
    def s(self) -> int:
        return self.sigma.shape[0]

    @property
    def p(self) -> int:
        return self.sigma.shape[1]

    @property
    def tuple_norms(self) -> np.ndarray:
        return np.sqrt(np.mean(self.sigma ** 2, axis=0))

    def truncated(self, r: int) -> "SingularSpectrum":
        return SingularSpectrum(self.sigma[:, :r])


@dataclass(frozen=True, eq=False)
class TsvdFactors:
    U: Tensor3
    S: Tensor3
    V: Tensor3
    spectrum: SingularSpectrum

    @property
    def p(self) -> int:
        return self.spectrum.p

    def reconstruct(self) -> Tensor3:
        return self.U @ self.S @ self.V.T


@dataclass(frozen=True, eq=False)
class EigentupleSet:
    """Per-block eigenvalues ``values[i, j]``, sorted by decreasing magnitude."""

    values: np.ndarray

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.values), initial=0.0))


def _normalize_phase(U: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # rotate each singular pair so the largest entry of u is real positive
    idx = np.argmax(np.abs(U), axis=0)
    lead = U[idx, np.arange(U.shape[1])]
    mag = np.abs(lead)
    phase = np.where(mag > 0, lead / np.where(mag > 0, mag, 1.0), 1.0)
    corr = np.conj(phase)
    return U * corr, V * corr


def _svd_block(X: np.ndarray, full: bool = False):
    try:
        U, sv, Vh = np.linalg.svd(X, full_matrices=full)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(None, str(exc)) from exc
    V = np.conj(Vh.T)
    k = sv.size
    Uk, Vk = _normalize_phase(U[:, :k], V[:, :k])
    U = np.concatenate([Uk, U[:, k:]], axis=1) if full else Uk
    V = np.concatenate([Vk, V[:, k:]], axis=1) if full else Vk
    return U, sv, V


def svd_blocks(F: FourierBlocks, full: bool = False):
    """Blockwise SVD ``F_j = U_j diag(sigma_j) V_j^H``.

    Returns ``(U, sigma, V)`` with ``U`` and ``V`` as :class:`FourierBlocks`
    and ``sigma`` a real ``(s, min(n, m))`` array.
    """
    U, sig, V = block_map(lambda X: _svd_block(X, full), F)
    return U, np.ascontiguousarray(sig.real), V


def _fdiag_blocks(sigma: np.ndarray, shape: tuple[int, int]) -> FourierBlocks:
    s, p = sigma.shape
    out = np.zeros((s,) + shape, dtype=np.complex128)
    idx = np.arange(p)
    out[:, idx, idx] = sigma
    return FourierBlocks(out)


def t_svd(A: Tensor3, mode: str = "economy") -> TsvdFactors:
    """T-SVD ``A = U * S * V^T``.

    ``mode="economy"`` gives ``U: n x p x s``, ``S: p x p x s`` and
    ``V: m x p x s`` with ``p = min(n, m)``; ``mode="full"`` gives square
    ``U`` and ``V`` and a rectangular F-diagonal ``S``.
    """
    if mode not in ("economy", "full"):
        raise ValidationError(f"unknown T-SVD mode {mode!r}")
    full = mode == "full"
    U, sigma, V = svd_blocks(to_fourier(A), full=full)
    p = sigma.shape[1]
    shape = (A.n, A.m) if full else (p, p)
    S = _fdiag_blocks(sigma, shape)
    return TsvdFactors(from_fourier(U), from_fourier(S), from_fourier(V), SingularSpectrum(sigma))


def truncate(F: TsvdFactors, r: int) -> TsvdFactors:
    """Keep singular tuples ``0 .. r-1`` (index aligned across blocks)."""
    p = F.p
    if not 1 <= r <= p:
        raise ValidationError(f"truncation rank must be in [1, {p}], got {r}")
    return TsvdFactors(
        Tensor3(F.U.data[:, :r, :]),
        Tensor3(F.S.data[:r, :r, :]),
        Tensor3(F.V.data[:, :r, :]),
        F.spectrum.truncated(r),
    )


def t_evd(A: Tensor3) -> EigentupleSet:
    """Per-block eigenvalues of a square tensor.

    T-symmetric input uses the Hermitian solver, so its eigentuples are
    real; eigenvector tensors are not formed.
    """
    if A.n != A.m:
        raise DimensionMismatch(f"T-EVD needs square slices, got {A.shape}")
    hermitian = is_t_symmetric(A, rtol=1e-12)

    def eig(X):
        if hermitian:
            w = np.linalg.eigvalsh((X + np.conj(X.T)) / 2).astype(np.complex128)
        else:
            w = np.linalg.eigvals(X)
        return w[np.argsort(-np.abs(w), kind="stable")]

    vals = block_map(eig, to_fourier(A))
    if hermitian:
        vals = vals.real.astype(np.complex128)
    return EigentupleSet(vals)


def _fdiag_entries(S: Tensor3) -> np.ndarray:
    F = to_fourier(S)
    p = min(S.n, S.m)
    d = F.blocks[:, np.arange(p), np.arange(p)]
    off = F.blocks.copy()
    off[:, np.arange(p), np.arange(p)] = 0
    scale = max(float(np.max(np.abs(d), initial=0.0)), np.finfo(float).tiny)
    if np.max(np.abs(off), initial=0.0) > 1e-10 * scale:
        raise ValidationError("tensor is not F-diagonal")
    if np.max(np.abs(d.imag), initial=0.0) > 1e-10 * scale or np.min(d.real, initial=0.0) < -1e-10 * scale:
        raise ValidationError("F-diagonal entries must be real and nonnegative")
    return np.clip(d.real, 0.0, None)


def fdiag_sqrt(S: Tensor3) -> Tensor3:
    """Blockwise square root of a nonnegative F-diagonal tensor."""
    d = _fdiag_entries(S)
    return from_fourier(_fdiag_blocks(np.sqrt(d), (S.n, S.m)))


def inv_sqrt_entries(d: np.ndarray, floor: float | None = None, strict: bool = True) -> np.ndarray:
    """``1/sqrt(d)`` for an ``(s, p)`` array of nonnegative entries.

    ``floor`` defaults to ``1e-12`` times the largest entry.  Entries below
    it raise :class:`NearZeroSingularValue` (``strict``) or are raised to
    the floor.
    """
    d = np.asarray(d, dtype=float)
    if floor is None:
        floor = float(np.max(d, initial=0.0)) * 1e-12
    low = d < floor
    if np.any(low):
        if strict:
            i, j = np.argwhere(low)[0]
            raise NearZeroSingularValue(int(j), float(d[i, j]), floor)
        d = np.where(low, floor, d)
    if np.any(d <= 0):
        i, j = np.argwhere(d <= 0)[0]
        raise NearZeroSingularValue(int(j), float(d[i, j]), floor)
    return 1.0 / np.sqrt(d)


def fdiag_inv_sqrt(S: Tensor3, floor: float | None = None, strict: bool = True) -> Tensor3:
    """Blockwise inverse square root of a nonnegative F-diagonal tensor."""
    if S.n != S.m:
        raise DimensionMismatch("inverse square root needs square slices")
    d = _fdiag_entries(S)
    return from_fourier(_fdiag_blocks(inv_sqrt_entries(d, floor, strict), (S.n, S.n)))
