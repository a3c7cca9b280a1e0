"""T-product dynamical systems and their dense (unfolded) counterparts.

A :class:`Tpds` evolves as ``X(t+1) = A * X(t) + B * U(t)``,
``Y(t) = C * X(t)``.  All evaluation happens on the Fourier blocks; the
block-circulant unfolding is only materialized by :meth:`Tpds.unfolded`.

H-infinity norms are computed on a uniform grid over ``(-pi, pi]``
(default 512 points) followed by one golden-section refinement around the
grid maximum.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .errors import DimensionMismatch, PoleProximity, UnstableSystem
from .spectral import FourierBlocks, from_fourier, from_fourier_complex, to_fourier
from .tensor3 import Tensor3, bcirc_array, tidentity
from .tsvd import t_evd

DEFAULT_GRID = 512
STABILITY_MARGIN = 1e-10


@dataclass(frozen=True, eq=False)
class Tpds:
    """System triple ``(A, B, C)`` with shapes ``n x n x s``, ``n x m x s``, ``l x n x s``."""

    A: Tensor3
    B: Tensor3
    C: Tensor3

    def __post_init__(self):
        A, B, C = self.A, self.B, self.C
        if A.n != A.m:
            raise DimensionMismatch(f"state tensor must be square, got {A.shape}")
        if B.n != A.n or C.m != A.n:
            raise DimensionMismatch(
                f"inconsistent shapes A{A.shape} B{B.shape} C{C.shape}")
        if not (A.s == B.s == C.s):
            raise DimensionMismatch("tube counts of A, B, C differ")

    @property
    def n(self) -> int:
        return self.A.n

    @property
    def m(self) -> int:
        return self.B.m

    @property
    def l(self) -> int:
        return self.C.n

    @property
    def s(self) -> int:
        return self.A.s

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return self.n, self.m, self.l, self.s

    @cached_property
    def fourier(self) -> tuple[FourierBlocks, FourierBlocks, FourierBlocks]:
        return to_fourier(self.A), to_fourier(self.B), to_fourier(self.C)

    def unfolded(self) -> "LinearSystem":
        """The equivalent linear system ``(xi(A), xi(B), xi(C))``."""
        return LinearSystem(bcirc_array(self.A.data), bcirc_array(self.B.data),
                            bcirc_array(self.C.data))

    @property
    def parameter_count(self) -> int:
        return self.A.data.size + self.B.data.size + self.C.data.size


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Dense discrete-time system ``x+ = A x + B u``, ``y = C x``.

    Produced by the unfolded baselines; it has no T-product structure left.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.B.shape[0] != n or self.C.shape[1] != n:
            raise DimensionMismatch(
                f"inconsistent shapes A{self.A.shape} B{self.B.shape} C{self.C.shape}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def l(self) -> int:
        return self.C.shape[0]

    @property
    def parameter_count(self) -> int:
        return self.A.size + self.B.size + self.C.size


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: list[Tensor3]
    outputs: list[Tensor3]

    @property
    def h(self) -> int:
        return self.states[0].m


@dataclass(frozen=True, eq=False)
class MarkovSequence:
    """Impulse-response tensors ``Z[j] = C * A^j * B``."""

    Z: list[Tensor3]

    def __post_init__(self):
        if not self.Z:
            raise DimensionMismatch("empty Markov sequence")
        shape = self.Z[0].shape
        if any(z.shape != shape for z in self.Z):
            raise DimensionMismatch("Markov parameters have different shapes")

    def __len__(self) -> int:
        return len(self.Z)

    def __getitem__(self, j):
        return self.Z[j]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.Z[0].shape


@dataclass(frozen=True, eq=False)
class TransferSample:
    z: complex
    G: FourierBlocks

    def unfolded(self) -> np.ndarray:
        """``xi(G(z))`` as a dense complex matrix."""
        return bcirc_array(from_fourier_complex(self.G.blocks))


@dataclass(frozen=True)
class HinfResult:
    value: float
    omega: float
    grid: int
    refined: bool


def adjoint(sys: Tpds) -> Tpds:
    """Adjoint system ``(A^T, C^T, B^T)``."""
    return Tpds(sys.A.T, sys.C.T, sys.B.T)


def simulate(sys: Tpds, X0: Tensor3, inputs: list[Tensor3]) -> Trajectory:
    """Run the recursion for ``len(inputs)`` steps.

    Returns ``len(inputs) + 1`` states ``X(0..T)`` and their outputs.
    """
    if X0.n != sys.n or X0.s != sys.s:
        raise DimensionMismatch(f"initial state {X0.shape} does not fit n={sys.n}, s={sys.s}")
    h = X0.m
    for u in inputs:
        if u.shape != (sys.m, h, sys.s):
            raise DimensionMismatch(f"input {u.shape} does not fit ({sys.m}, {h}, {sys.s})")
    Ah, Bh, Ch = sys.fourier
    x = to_fourier(X0).blocks
    states = [x]
    for u in inputs:
        x = Ah.blocks @ x + Bh.blocks @ to_fourier(u).blocks
        states.append(x)
    X = np.stack(states)                                # (T+1, s, n, h)
    Y = Ch.blocks[None] @ X
    Xs = np.fft.ifft(X, axis=1).real.transpose(0, 2, 3, 1)
    Ys = np.fft.ifft(Y, axis=1).real.transpose(0, 2, 3, 1)
    return Trajectory([Tensor3(x) for x in Xs], [Tensor3(y) for y in Ys])


def markov_blocks(sys: Tpds, count: int) -> np.ndarray:
    """Fourier blocks of ``Z[0..count-1]`` as a ``(count, s, l, m)`` array."""
    Ah, Bh, Ch = sys.fourier
    out = np.empty((count, sys.s, sys.l, sys.m), dtype=np.complex128)
    x = Bh.blocks
    for j in range(count):
        out[j] = Ch.blocks @ x
        if j + 1 < count:
            x = Ah.blocks @ x
    return out


def markov(sys: Tpds, count: int) -> MarkovSequence:
    """Markov parameters ``Z[0..count-1]`` by repeated state propagation."""
    if count < 1:
        raise ValueError("count must be >= 1")
    blocks = markov_blocks(sys, count)
    return MarkovSequence([from_fourier(FourierBlocks(b)) for b in blocks])


def transfer(sys: Tpds, z: complex) -> TransferSample:
    """``G(z) = C * (zI - A)^{-1} * B`` on the Fourier blocks."""
    Ah, Bh, Ch = sys.fourier
    z = complex(z)
    out = np.empty((sys.s, sys.l, sys.m), dtype=np.complex128)
    eye = np.eye(sys.n)
    for j in range(sys.s):
        M = z * eye - Ah.blocks[j]
        rcond = 1.0 / np.linalg.cond(M)
        if not rcond >= 1e-12:
            raise PoleProximity(j, float(rcond))
        out[j] = Ch.blocks[j] @ np.linalg.solve(M, Bh.blocks[j])
    return TransferSample(z, FourierBlocks(out))


def spectral_radius(sys) -> float:
    if isinstance(sys, LinearSystem):
        if sys.n == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(sys.A))))
    return t_evd(sys.A).spectral_radius


def is_stable(sys) -> bool:
    return spectral_radius(sys) < 1.0 - STABILITY_MARGIN


def require_stable(sys) -> None:
    rho = spectral_radius(sys)
    if not rho < 1.0 - STABILITY_MARGIN:
        raise UnstableSystem(rho)


class FrequencyResponse:
    """Evaluates ``C (e^{iw} I - A)^{-1} B`` repeatedly via complex Schur forms.

    For a :class:`Tpds` the value is the ``(s, l, m)`` stack of Fourier
    blocks; for a :class:`LinearSystem` it is a single ``(l, m)`` matrix.
    """

    def __init__(self, sys):
        self.structured = isinstance(sys, Tpds)
        if self.structured:
            Ah, Bh, Ch = sys.fourier
            A, B, C = Ah.blocks, Bh.blocks, Ch.blocks
        else:
            A, B, C = sys.A[None], sys.B[None], sys.C[None]
        self.s = A.shape[0]
        self.n = A.shape[1]
        self.out_shape = (C.shape[1], B.shape[2])
        self._T, self._CZ, self._ZB = [], [], []
        for j in range(self.s):
            if self.n == 0:
                self._T.append(np.zeros((0, 0), complex))
                self._CZ.append(C[j].astype(complex))
                self._ZB.append(B[j].astype(complex))
                continue
            T, Z = sla.schur(A[j].astype(np.complex128), output="complex")
            self._T.append(T)
            self._CZ.append(C[j] @ Z)
            self._ZB.append(np.conj(Z.T) @ B[j])

    def blocks(self, omega: float) -> np.ndarray:
        z = np.exp(1j * omega)
        out = np.empty((self.s,) + self.out_shape, dtype=np.complex128)
        for j in range(self.s):
            if self.n == 0:
                out[j] = 0.0
                continue
            M = -self._T[j]
            M[np.diag_indices_from(M)] += z
            out[j] = self._CZ[j] @ sla.solve_triangular(M, self._ZB[j], check_finite=False)
        return out

    def dense(self, omega: float) -> np.ndarray:
        """The response as one dense matrix (``xi(G)`` for a TPDS)."""
        b = self.blocks(omega)
        if self.structured:
            return bcirc_array(from_fourier_complex(b))
        return b[0]

    def gain(self, omega: float) -> float:
        """Largest singular value of the response."""
        return float(max(np.linalg.norm(b, 2) for b in self.blocks(omega)))


def frequency_grid(count: int = DEFAULT_GRID) -> np.ndarray:
    """``count`` uniformly spaced points in ``(-pi, pi]``."""
    return -np.pi + 2 * np.pi * np.arange(1, count + 1) / count


def maximize_on_circle(f, grid: int = DEFAULT_GRID, refine: bool = True) -> HinfResult:
    """Grid search of ``f`` over ``(-pi, pi]`` plus a local bounded polish."""
    omegas = frequency_grid(grid)
    vals = np.array([f(w) for w in omegas])
    i = int(np.argmax(vals))
    best, wbest = float(vals[i]), float(omegas[i])
    if not refine or grid < 3:
        return HinfResult(best, wbest, grid, False)
    step = 2 * np.pi / grid
    left, right = vals[(i - 1) % grid], vals[(i + 1) % grid]
    if not (vals[i] > left and vals[i] > right):
        return HinfResult(best, wbest, grid, False)
    # bounded search: re-evaluating the bracket ends can break the strict
    # ordering a bracketing method needs when the gain sits at roundoff level
    res = minimize_scalar(lambda w: -f(w), bounds=(wbest - step, wbest + step),
                          method="bounded", options={"xatol": 1e-10})
    if -res.fun > best:
        best, wbest = float(-res.fun), float(res.x)
    return HinfResult(best, wbest, grid, True)


def hinf(sys, grid: int = DEFAULT_GRID, refine: bool = True, check: bool = True) -> HinfResult:
    """H-infinity norm with metadata (maximizing frequency, grid size)."""
    if check:
        require_stable(sys)
    resp = FrequencyResponse(sys)
    return maximize_on_circle(resp.gain, grid, refine)


def hinf_norm(sys, grid: int = DEFAULT_GRID, refine: bool = True) -> float:
    """``max_w sigma_max(G(e^{iw}))``; for a TPDS, the max over Fourier blocks."""
    return hinf(sys, grid, refine).value


def zero_system(like: Tpds) -> Tpds:
    """A 1-state TPDS with ``B = C = 0`` and the same input/output shapes."""
    s = like.s
    return Tpds(Tensor3.zeros(1, 1, s), Tensor3.zeros(1, like.m, s), Tensor3.zeros(like.l, 1, s))


def scaled_identity_system(n: int, s: int, a: float = 0.0) -> Tpds:
    """``A = a I``, ``B = C = I``; handy for tests and examples."""
    eye = tidentity(n, s)
    return Tpds(eye * a, eye, eye)
