"""Dense third-order tensors and the T-product algebra.

A :class:`Tensor3` of shape ``(n, m, s)`` holds ``s`` frontal slices of
size ``n x m``.  Flat storage (file I/O, :meth:`Tensor3.to_vector`) is
slice-major and column-major inside each slice, which is NumPy's Fortran
order for an ``(n, m, s)`` array.

Everything here that involves the block-circulant matrix is the
materialized, definition-level path.  It is kept public because it is the
oracle the Fourier path in :mod:`tprod_mor.spectral` is tested against.

The factorization written in some texts as ``A = U * S * U^T`` with a
separate right factor ``V`` is read here as ``A = U * S * V^T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteValue, ValidationError


class Tensor3:
    """Immutable dense real tensor of shape ``(n, m, s)``.

    Parameters
    ----------
    data
        Array-like with three dimensions.  A 2-D input is promoted to a
        single frontal slice (``s = 1``).
    copy
        Copy the input.  When ``False`` the caller promises not to mutate
        the buffer afterwards.
    """

    __slots__ = ("_data",)
    __array_priority__ = 100

    def __init__(self, data, copy: bool = True):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        # one canonical memory layout keeps results independent of how the
        # input was built (FFT and BLAS rounding depend on strides)
        if copy or not arr.flags.f_contiguous:
            arr = np.array(arr, order="F")
        else:
            arr = arr.view()
        if arr.ndim != 3:
            raise DimensionMismatch(f"expected a 3-D array, got ndim={arr.ndim}")
        if min(arr.shape) < 1:
            raise DimensionMismatch(f"all dimensions must be positive, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteValue("tensor contains NaN or Inf")
        arr.flags.writeable = False
        self._data = arr

    # -- construction -----------------------------------------------------

    @classmethod
    def zeros(cls, n: int, m: int, s: int) -> "Tensor3":
        return cls(np.zeros((n, m, s)), copy=False)

    @classmethod
    def from_vector(cls, vec, n: int, m: int, s: int) -> "Tensor3":
        """Build from flat storage (slice-major, column-major per slice)."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != n * m * s:
            raise DimensionMismatch(f"need {n * m * s} values, got {vec.size}")
        return cls(vec.reshape((n, m, s), order="F"))

    @classmethod
    def from_slices(cls, slices) -> "Tensor3":
        """Stack a sequence of equally sized matrices as frontal slices."""
        return cls(np.stack([np.asarray(x, dtype=np.float64) for x in slices], axis=2))

    # -- basic attributes -------------------------------------------------

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple[int, int, int]:
        return self._data.shape

    @property
    def n(self) -> int:
        return self._data.shape[0]

    @property
    def m(self) -> int:
        return self._data.shape[1]

    @property
    def s(self) -> int:
        return self._data.shape[2]

    def frontal(self, k: int) -> np.ndarray:
        """Frontal slice ``k`` (0-based)."""
        return self._data[:, :, k]

    def to_vector(self) -> np.ndarray:
        return self._data.ravel(order="F")

    def norm(self) -> float:
        return float(np.linalg.norm(self._data.ravel()))

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._data
        return self._data.astype(dtype)

    def __repr__(self) -> str:
        return f"Tensor3(shape={self.shape})"

    # -- algebra ----------------------------------------------------------

    @property
    def T(self) -> "Tensor3":
        return ttranspose(self)

    def __matmul__(self, other: "Tensor3") -> "Tensor3":
        if not isinstance(other, Tensor3):
            return NotImplemented
        return tprod(self, other)

    def __add__(self, other: "Tensor3") -> "Tensor3":
        if not isinstance(other, Tensor3):
            return NotImplemented
        _same_shape(self, other)
        return Tensor3(self._data + other._data, copy=False)

    def __sub__(self, other: "Tensor3") -> "Tensor3":
        if not isinstance(other, Tensor3):
            return NotImplemented
        _same_shape(self, other)
        return Tensor3(self._data - other._data, copy=False)

    def __neg__(self) -> "Tensor3":
        return Tensor3(-self._data, copy=False)

    def __mul__(self, alpha) -> "Tensor3":
        if not np.isscalar(alpha):
            return NotImplemented
        return Tensor3(self._data * float(alpha), copy=False)

    __rmul__ = __mul__

    def allclose(self, other: "Tensor3", rtol: float = 1e-10, atol: float = 0.0) -> bool:
        return self.shape == other.shape and bool(
            np.allclose(self._data, other._data, rtol=rtol, atol=atol))


def _same_shape(a: Tensor3, b: Tensor3) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape mismatch: {a.shape} vs {b.shape}")


@dataclass(frozen=True)
class BlockCirculantMatrix:
    """``xi(A)``: the ``ns x ms`` block-circulant matrix of ``A``."""

    base: Tensor3
    matrix: np.ndarray


@dataclass(frozen=True)
class UnfoldedMatrix:
    """``mu(B)``: frontal slices of an ``m x h x s`` tensor stacked vertically."""

    dims: tuple[int, int, int]
    matrix: np.ndarray


def bcirc_array(arr: np.ndarray) -> np.ndarray:
    """Block-circulant matrix of an ``(n, m, s)`` array of any dtype.

    Block ``(i, j)`` is slice ``(i - j) mod s``.
    """
    n, m, s = arr.shape
    idx = (np.arange(s)[:, None] - np.arange(s)[None, :]) % s
    blocks = arr[:, :, idx]                      # (n, m, s_i, s_j)
    return blocks.transpose(2, 0, 3, 1).reshape(n * s, m * s)


def bcirc(A: Tensor3) -> BlockCirculantMatrix:
    """Materialize the block-circulant matrix ``xi(A)``."""
    return BlockCirculantMatrix(base=A, matrix=bcirc_array(A.data))


def unbcirc(M: np.ndarray, n: int, m: int, s: int) -> Tensor3:
    """Recover a tensor from its block-circulant matrix (first block column)."""
    M = np.asarray(M)
    if M.shape != (n * s, m * s):
        raise DimensionMismatch(f"expected {(n * s, m * s)}, got {M.shape}")
    return fold(M[:, :m], n, m, s)


def unfold(B: Tensor3) -> UnfoldedMatrix:
    """Stack the frontal slices of ``B`` vertically (``mu``)."""
    m, h, s = B.shape
    mat = B.data.transpose(2, 0, 1).reshape(s * m, h)
    return UnfoldedMatrix(dims=(m, h, s), matrix=mat)


def fold(M, n: int, h: int, s: int) -> Tensor3:
    """Inverse of :func:`unfold`; accepts an :class:`UnfoldedMatrix` or array."""
    mat = M.matrix if isinstance(M, UnfoldedMatrix) else np.asarray(M)
    if mat.shape != (n * s, h):
        raise DimensionMismatch(
            f"cannot fold a {mat.shape} matrix into {n}x{h}x{s}")
    return Tensor3(mat.reshape(s, n, h).transpose(1, 2, 0))


def _check_tprod_dims(A: Tensor3, B: Tensor3) -> None:
    if A.m != B.n or A.s != B.s:
        raise DimensionMismatch(
            f"cannot T-multiply {A.shape} by {B.shape}")


def tprod_bcirc(A: Tensor3, B: Tensor3) -> Tensor3:
    """T-product through the materialized block-circulant matrix.

    Costs ``O(n m h s^2)``; used as the reference for :func:`tprod`.
    """
    _check_tprod_dims(A, B)
    return fold(bcirc(A).matrix @ unfold(B).matrix, A.n, B.m, A.s)


def tprod(A: Tensor3, B: Tensor3) -> Tensor3:
    """T-product ``A * B`` computed blockwise in the Fourier domain."""
    from .spectral import from_fourier, to_fourier

    _check_tprod_dims(A, B)
    return from_fourier(to_fourier(A) @ to_fourier(B))


def ttranspose(A: Tensor3) -> Tensor3:
    """T-transpose: transpose every slice, reverse slices 2..s."""
    d = A.data.transpose(1, 0, 2)
    order = (-np.arange(A.s)) % A.s
    return Tensor3(d[:, :, order])


def tidentity(n: int, s: int) -> Tensor3:
    if n < 1 or s < 1:
        raise ValidationError("n and s must be positive")
    d = np.zeros((n, n, s))
    d[:, :, 0] = np.eye(n)
    return Tensor3(d, copy=False)


def tinv(A: Tensor3) -> Tensor3:
    """T-inverse, computed per Fourier block.

    Raises :class:`~tprod_mor.errors.SingularBlock` when a block's
    reciprocal condition number drops below ``1e-12``.
    """
    from .spectral import block_map, from_fourier, to_fourier
    from .errors import SingularBlock

    if A.n != A.m:
        raise DimensionMismatch(f"T-inverse needs square slices, got {A.shape}")

    def inv(X):
        rcond = 1.0 / np.linalg.cond(X)
        if not rcond >= 1e-12:
            raise SingularBlock(-1, float(rcond))
        return np.linalg.inv(X)

    try:
        return from_fourier(block_map(inv, to_fourier(A)))
    except SingularBlock as exc:
        raise SingularBlock(exc.block, exc.rcond) from None


def block_row(A: Tensor3, B: Tensor3) -> Tensor3:
    """``[A B]``: concatenate along the second mode."""
    if A.n != B.n or A.s != B.s:
        raise DimensionMismatch(f"cannot row-concatenate {A.shape} and {B.shape}")
    return Tensor3(np.concatenate([A.data, B.data], axis=1), copy=False)


def block_col(A: Tensor3, B: Tensor3) -> Tensor3:
    """``[A; B]``: concatenate along the first mode."""
    if A.m != B.m or A.s != B.s:
        raise DimensionMismatch(f"cannot column-concatenate {A.shape} and {B.shape}")
    return Tensor3(np.concatenate([A.data, B.data], axis=0), copy=False)


def is_t_symmetric(A: Tensor3, rtol: float = 1e-9) -> bool:
    if A.n != A.m:
        return False
    return (A - A.T).norm() <= rtol * max(A.norm(), np.finfo(float).tiny)
