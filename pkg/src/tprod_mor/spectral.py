"""Mode-3 DFT: every T-operation as ``s`` independent complex matrix operations.

Convention: unnormalized forward transform, ``1/s`` on the inverse (the
NumPy FFT convention).  For a real tensor the blocks come in conjugate
pairs, ``blocks[s - j] == conj(blocks[j])``, and blocks ``0`` and ``s/2``
(for even ``s``) are real.  :func:`block_map` relies on that pairing to
evaluate only the first ``s // 2 + 1`` blocks.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConvergenceFailure, DimensionMismatch, NonRealResult, TprodMorError
from .tensor3 import Tensor3

THREADS_ENV = "TPROD_MOR_THREADS"


@dataclass(frozen=True, eq=False)
class FourierBlocks:
    """The ``s`` diagonal blocks of the Fourier-transformed ``xi(A)``.

    ``blocks`` has shape ``(s, n, m)`` so that NumPy's batched linear
    algebra runs over all blocks at once.
    """

    blocks: np.ndarray

    def __post_init__(self):
        if self.blocks.ndim != 3:
            raise DimensionMismatch("blocks must be an (s, n, m) array")

    @property
    def s(self) -> int:
        return self.blocks.shape[0]

    @property
    def n(self) -> int:
        return self.blocks.shape[1]

    @property
    def m(self) -> int:
        return self.blocks.shape[2]

    def __len__(self) -> int:
        return self.s

    def __getitem__(self, j: int) -> np.ndarray:
        return self.blocks[j]

    def __matmul__(self, other: "FourierBlocks") -> "FourierBlocks":
        if not isinstance(other, FourierBlocks):
            return NotImplemented
        if self.m != other.n or self.s != other.s:
            raise DimensionMismatch(
                f"cannot multiply blocks {self.blocks.shape} by {other.blocks.shape}")
        return FourierBlocks(self.blocks @ other.blocks)

    def __add__(self, other: "FourierBlocks") -> "FourierBlocks":
        return FourierBlocks(self.blocks + other.blocks)

    def __sub__(self, other: "FourierBlocks") -> "FourierBlocks":
        return FourierBlocks(self.blocks - other.blocks)

    @property
    def H(self) -> "FourierBlocks":
        """Blockwise conjugate transpose, i.e. the image of the T-transpose."""
        return FourierBlocks(np.conj(self.blocks.transpose(0, 2, 1)))

    def pairing_error(self) -> float:
        """Largest deviation from ``blocks[s-j] == conj(blocks[j])``."""
        mirror = np.conj(self.blocks[(-np.arange(self.s)) % self.s])
        return float(np.max(np.abs(self.blocks - mirror), initial=0.0))


def to_fourier(A: Tensor3) -> FourierBlocks:
    """Forward DFT along the third mode."""
    s = A.s
    half = np.fft.rfft(A.data, axis=2)           # (n, m, s//2 + 1)
    full = np.empty(A.shape, dtype=np.complex128)
    full[:, :, : half.shape[2]] = half
    tail = np.arange(half.shape[2], s)
    full[:, :, tail] = np.conj(half[:, :, s - tail])
    return FourierBlocks(np.ascontiguousarray(full.transpose(2, 0, 1)))


def from_fourier(F: FourierBlocks, rtol: float = 1e-8) -> Tensor3:
    """Inverse DFT back to a real tensor.

    The imaginary residual is discarded if it is at most ``rtol`` times
    the largest block entry; otherwise :class:`NonRealResult` is raised.
    """
    spatial = np.fft.ifft(F.blocks, axis=0)
    scale = float(np.max(np.abs(F.blocks), initial=0.0))
    resid = float(np.max(np.abs(spatial.imag), initial=0.0))
    if resid > rtol * scale:
        raise NonRealResult(resid, scale)
    return Tensor3(spatial.real.transpose(1, 2, 0))


def from_fourier_complex(blocks: np.ndarray) -> np.ndarray:
    """Inverse DFT of ``(s, n, m)`` blocks without assuming pairing.

    Returns an ``(n, m, s)`` complex array; used where the spatial object
    is genuinely complex (a transfer function at complex ``z``).
    """
    return np.fft.ifft(blocks, axis=0).transpose(1, 2, 0)


def _workers() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _as_real_if_exact(X: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(X) and not np.any(X.imag):
        return X.real
    return X


def block_map(f: Callable, *Fs: FourierBlocks, mirror: bool = True, workers: int | None = None):
    """Apply ``f`` to corresponding blocks of one or more inputs.

    ``f`` receives one matrix per input and returns a matrix or a tuple of
    matrices; the result is a :class:`FourierBlocks` or a tuple of them.
    With ``mirror=True`` only blocks ``0 .. s//2`` are evaluated and the
    rest are filled in by conjugation, which requires
    ``f(conj(X)) == conj(f(X))``.  The self-paired blocks are passed as
    real arrays when their imaginary part is exactly zero.

    Errors raised by ``f`` are re-raised with their ``block`` attribute set.
    """
    if not Fs:
        raise ValueError("block_map needs at least one input")
    s = Fs[0].s
    if any(F.s != s for F in Fs):
        raise DimensionMismatch("inputs have different tube counts")
    todo = list(range(s // 2 + 1)) if mirror else list(range(s))
    self_paired = {0, s // 2} if s % 2 == 0 else {0}

    def run(j):
        args = [F.blocks[j] for F in Fs]
        if mirror and j in self_paired:
            args = [_as_real_if_exact(a) for a in args]
        try:
            return f(*args)
        except TprodMorError as exc:
            if exc.block is None or exc.block == -1:
                exc.block = j
            raise
        except np.linalg.LinAlgError as exc:
            raise ConvergenceFailure(j, str(exc)) from exc

    nworkers = _workers() if workers is None else max(1, workers)
    if nworkers > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            outs = list(pool.map(run, todo))
    else:
        outs = [run(j) for j in todo]

    single = not isinstance(outs[0], tuple)
    if single:
        outs = [(o,) for o in outs]
    results = []
    for k in range(len(outs[0])):
        first = np.asarray(outs[0][k])
        dtype = np.result_type(first.dtype, np.complex128)
        stack = np.empty((s,) + first.shape, dtype=dtype)
        for j, o in zip(todo, outs):
            stack[j] = o[k]
        if mirror:
            for j in range(len(todo), s):
                stack[j] = np.conj(stack[s - j])
        results.append(FourierBlocks(stack) if stack.ndim == 3 else stack)
    return results[0] if single else tuple(results)
