"""Model order reduction: T-BT, T-BPOD, T-ERA and their unfolded baselines.

The T-methods work on the Fourier blocks from start to finish and apply
one inverse transform to the reduced tensors.  The baselines run the
classical matrix algorithms on ``(xi(A), xi(B), xi(C))`` and return a
:class:`~tprod_mor.system.LinearSystem`, which cannot be folded back into
a TPDS.

Truncation counts: a T-method truncating ``k`` singular tuples removes
``k`` values from every Fourier block.  A baseline removes ``k * s``
singular values under the ``"value"`` convention (default) or ``k`` under
the ``"tuple"`` convention.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .errors import (
    InsufficientSnapshots,
    NearZeroSingularValue,
    UnstableSystem,
    ValidationError,
)
from .gramians import factor_blocks, gramian_blocks, snapshot_blocks
from .spectral import FourierBlocks, from_fourier, to_fourier
from .system import (
    DEFAULT_GRID,
    FrequencyResponse,
    LinearSystem,
    MarkovSequence,
    Tpds,
    maximize_on_circle,
    require_stable,
)
from .tensor3 import Tensor3, bcirc_array
from .tsvd import SingularSpectrum, inv_sqrt_entries, svd_blocks

log = logging.getLogger(__name__)

METHODS = ("T-BT", "BT", "T-BPOD", "BPOD", "T-ERA", "ERA")


@dataclass(frozen=True)
class ReductionConfig:
    """Settings shared by all reduction methods.

    k
        Number of singular tuples to truncate.
    T, L
        Input and output horizons for T-BPOD / T-ERA (and baselines).
    convention
        Baseline truncation count: ``"value"`` removes ``k*s`` singular
        values, ``"tuple"`` removes ``k``.
    rank_tol
        Relative cut applied when factoring Gramians.  The default keeps
        the full ``n`` columns so the Hankel tensor is ``n x n x s``.
    floor_rel
        Kept singular values below ``floor_rel * max`` count as zero.
    near_zero
        ``"truncate"`` drops such tuples (recorded in
        ``Reduction.extra_truncated``); ``"raise"`` fails instead.
    """

    k: int = 0
    T: int = 20
    L: int = 20
    convention: str = "value"
    rank_tol: float = 0.0
    floor_rel: float = 1e-12
    near_zero: str = "truncate"

    def __post_init__(self):
        if self.k < 0:
            raise ValidationError("k must be >= 0")
        if self.T < 0 or self.L < 0:
            raise ValidationError("horizons must be >= 0")
        if self.convention not in ("value", "tuple"):
            raise ValidationError(f"unknown convention {self.convention!r}")
        if self.near_zero not in ("truncate", "raise"):
            raise ValidationError(f"unknown near_zero policy {self.near_zero!r}")

    def baseline_k(self, s: int) -> int:
        return self.k * s if self.convention == "value" else self.k


@dataclass(frozen=True, eq=False)
class Reduction:
    method: str
    reduced: Tpds | LinearSystem
    P: Tensor3 | np.ndarray | None
    Q: Tensor3 | np.ndarray | None
    spectrum: SingularSpectrum
    k: int
    truncated: int
    bound: float
    wall_time: float
    extra_truncated: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def tpds_structure(self) -> bool:
        return isinstance(self.reduced, Tpds)

    @property
    def order(self) -> int:
        return self.reduced.n

    @property
    def parameter_count(self) -> int:
        return self.reduced.parameter_count


@dataclass(frozen=True, eq=False)
class HankelTensor:
    """Generalized Hankel tensor; ``shifted`` is the one-step-ahead companion."""

    H: Tensor3
    shifted: Tensor3 | None = None


# -- shared pieces --------------------------------------------------------


def error_bound(spectrum: SingularSpectrum, k: int) -> float:
    """``2 max_i sum`` of the ``k`` smallest singular values of block ``i``."""
    p = spectrum.p
    if not 0 <= k < p:
        raise ValidationError(f"k must be in [0, {p}), got {k}")
    if k == 0:
        return 0.0
    return float(2.0 * np.max(np.sum(spectrum.sigma[:, p - k:], axis=1)))


def _choose_rank(sigma: np.ndarray, k: int, cfg: ReductionConfig) -> tuple[int, int]:
    """Rank to keep after truncating ``k`` indices, and the extra indices dropped."""
    p = sigma.shape[1]
    if not 0 <= k < p:
        raise ValidationError(f"cannot truncate {k} of {p} singular tuples")
    r = p - k
    floor = cfg.floor_rel * float(np.max(sigma, initial=0.0))
    ok = np.all(sigma >= floor, axis=0) & np.all(sigma > 0, axis=0)
    if ok[:r].all():
        return r, 0
    bad = int(np.argmin(ok[:r]))
    if cfg.near_zero == "raise" or bad == 0:
        i = int(np.argmin(sigma[:, bad]))
        raise NearZeroSingularValue(bad, float(sigma[i, bad]), floor)
    return bad, r - bad


def _scale_cols(X: np.ndarray, d: np.ndarray) -> np.ndarray:
    return X * d[..., None, :]


def _finish_tpds(method, sys_blocks, P, Q, spectrum, k, r, extra, t0, meta=None) -> Reduction:
    Ah, Bh, Ch = sys_blocks
    PH = FourierBlocks(P)
    QH = FourierBlocks(np.conj(Q.transpose(0, 2, 1)))
    reduced = Tpds(from_fourier(QH @ Ah @ PH), from_fourier(QH @ Bh), from_fourier(Ch @ PH))
    wall = time.perf_counter() - t0
    return Reduction(method, reduced, from_fourier(PH), from_fourier(FourierBlocks(Q)), spectrum,
                     k, spectrum.p - r, error_bound(spectrum, spectrum.p - r), wall, extra,
                     meta or {})


def _balanced_projection(H: FourierBlocks, left: np.ndarray, right: np.ndarray, cfg: ReductionConfig):
    """Truncated T-SVD of ``H`` and the transforms ``P = right V S^-1/2``, ``Q = left U S^-1/2``."""
    U, sigma, V = svd_blocks(H)
    r, extra = _choose_rank(sigma, cfg.k, cfg)
    sinv = inv_sqrt_entries(sigma[:, :r], floor=0.0, strict=False)
    P = _scale_cols(right @ V.blocks[:, :, :r], sinv)
    Q = _scale_cols(left @ U.blocks[:, :, :r], sinv)
    return P, Q, SingularSpectrum(sigma), r, extra


# -- T-methods ------------------------------------------------------------


def t_bt(sys: Tpds, cfg: ReductionConfig = ReductionConfig()) -> Reduction:
    """T-balanced truncation from exact Gramians."""
    t0 = time.perf_counter()
    require_stable(sys)
    Ah, Bh, Ch = sys.fourier
    Wc = gramian_blocks(Ah, Bh, "controllability")
    Wo = gramian_blocks(Ah, Ch, "observability")
    Zc, _ = factor_blocks(Wc, cfg.rank_tol)
    Zo, _ = factor_blocks(Wo, cfg.rank_tol)
    P, Q, spec, r, extra = _balanced_projection(Zo.H @ Zc, Zo.blocks, Zc.blocks, cfg)
    return _finish_tpds("T-BT", (Ah, Bh, Ch), P, Q, spec, cfg.k, r, extra, t0)


def t_bpod(sys: Tpds, cfg: ReductionConfig = ReductionConfig()) -> Reduction:
    """T-balanced POD from forward and adjoint impulse snapshots."""
    t0 = time.perf_counter()
    Ah, Bh, Ch = sys.fourier
    X = snapshot_blocks(Ah, Bh, cfg.T)
    Y = snapshot_blocks(Ah.H, Ch.H, cfg.L)
    H = FourierBlocks(np.conj(Y.transpose(0, 2, 1)) @ X)
    P, Q, spec, r, extra = _balanced_projection(H, Y, X, cfg)
    return _finish_tpds("T-BPOD", (Ah, Bh, Ch), P, Q, spec, cfg.k, r, extra, t0)


def _markov_fourier(markov) -> np.ndarray:
    if isinstance(markov, MarkovSequence):
        return np.stack([to_fourier(z).blocks for z in markov.Z])
    return np.asarray(markov)


def _hankel_from_blocks(Zb: np.ndarray, T: int, L: int, shift: int = 0) -> np.ndarray:
    # Zb: (N, s, l, m) -> (s, l(L+1), m(T+1)) with block (i, j) = Z[i + j + shift]
    idx = np.arange(L + 1)[:, None] + np.arange(T + 1)[None, :] + shift
    g = Zb[idx]                                   # (L+1, T+1, s, l, m)
    Lp, Tp, s, l, m = g.shape
    return g.transpose(2, 0, 3, 1, 4).reshape(s, Lp * l, Tp * m)


def hankel_tensor(markov: MarkovSequence, T: int, L: int) -> HankelTensor:
    """Spatial generalized Hankel tensors ``H`` and ``H_hat`` from Markov data."""
    if not _check_markov(markov, T, L):
        raise InsufficientSnapshots(f"H_hat needs {T + L + 2} Markov parameters, got {len(markov)}")
    Zs = np.stack([z.data.transpose(2, 0, 1) for z in markov.Z])     # (N, s, l, m)
    H = _hankel_from_blocks(Zs, T, L).transpose(1, 2, 0)
    Hs = _hankel_from_blocks(Zs, T, L, 1).transpose(1, 2, 0)
    return HankelTensor(Tensor3(H), Tensor3(Hs))


def _check_markov(markov, T: int, L: int) -> bool:
    """True if the shifted Hankel can be formed (``T + L + 2`` parameters).

    With exactly ``T + L + 1`` parameters the state matrix is estimated from
    the shift structure of ``H`` itself; fewer is an error.
    """
    if len(markov) >= T + L + 2:
        return True
    if len(markov) == T + L + 1:
        log.info("%d Markov parameters: estimating A from the shifted observability factor",
                 len(markov))
        return False
    raise InsufficientSnapshots(f"need at least {T + L + 1} Markov parameters, got {len(markov)}")


def _shift_estimate(O: np.ndarray, l: int) -> np.ndarray:
    """Least-squares ``A`` with ``O[:-l] A = O[l:]`` for ``O = U S^{1/2}`` (stacked)."""
    return np.linalg.pinv(O[..., :-l, :]) @ O[..., l:, :]


def t_era(markov: MarkovSequence, cfg: ReductionConfig = ReductionConfig()) -> Reduction:
    """T-eigensystem realization from Markov parameters only."""
    t0 = time.perf_counter()
    shifted = _check_markov(markov, cfg.T, cfg.L)
    l, m, s = markov.shape
    Zb = _markov_fourier(markov)[: cfg.T + cfg.L + 2]
    H = _hankel_from_blocks(Zb, cfg.T, cfg.L)
    U, sigma, V = svd_blocks(FourierBlocks(H))
    r, extra = _choose_rank(sigma, cfg.k, cfg)
    sinv = inv_sqrt_entries(sigma[:, :r], floor=0.0, strict=False)
    Ur = _scale_cols(U.blocks[:, :, :r], sinv)                       # U S^-1/2
    Vr = _scale_cols(V.blocks[:, :, :r], sinv)                       # V S^-1/2
    UrH = np.conj(Ur.transpose(0, 2, 1))
    if shifted:
        Hs = _hankel_from_blocks(Zb, cfg.T, cfg.L, 1)
        Ab = UrH @ Hs @ Vr
    else:
        Ab = _shift_estimate(_scale_cols(U.blocks[:, :, :r], np.sqrt(sigma[:, :r])), l)
    A = from_fourier(FourierBlocks(Ab))
    B = from_fourier(FourierBlocks(UrH @ H[:, :, :m]))
    C = from_fourier(FourierBlocks(H[:, :l, :] @ Vr))
    spec = SingularSpectrum(sigma)
    p = spec.p
    wall = time.perf_counter() - t0
    return Reduction("T-ERA", Tpds(A, B, C), None, None, spec, cfg.k, p - r,
                     error_bound(spec, p - r), wall, extra)


# -- unfolded baselines ---------------------------------------------------


def _dense_factor(W: np.ndarray, rank_tol: float) -> np.ndarray:
    w, U = np.linalg.eigh((W + W.T) / 2)
    w, U = w[::-1], U[:, ::-1]
    scale = max(abs(w[0]), np.finfo(float).tiny)
    if w[-1] < -1e-9 * scale:
        from .errors import IndefiniteGramian
        raise IndefiniteGramian(float(w[-1]), float(scale))
    w = np.clip(w, 0.0, None)
    p = max(int(np.count_nonzero(w > rank_tol * w[0])), 1)
    return U[:, :p] * np.sqrt(w[:p])


def _dense_svd_truncate(H: np.ndarray, kk: int, cfg: ReductionConfig):
    U, sv, Vh = np.linalg.svd(H, full_matrices=False)
    r, extra = _choose_rank(sv[None, :], kk, cfg)
    sinv = 1.0 / np.sqrt(sv[:r])
    return U[:, :r] * sinv, Vh[:r].T * sinv, SingularSpectrum(sv[None, :]), r, extra


def _finish_dense(method, lin: LinearSystem, Zc, Zo, cfg, kk, t0, s) -> Reduction:
    H = Zo.T @ Zc
    Us, Vs, spec, r, extra = _dense_svd_truncate(H, kk, cfg)
    P = Zc @ Vs
    Q = Zo @ Us
    red = LinearSystem(Q.T @ lin.A @ P, Q.T @ lin.B, lin.C @ P)
    wall = time.perf_counter() - t0
    return Reduction(method, red, P, Q, spec, cfg.k, spec.p - r, error_bound(spec, spec.p - r),
                     wall, extra, {"baseline_truncation": kk, "s": s})


def bt_unfolded(sys: Tpds, cfg: ReductionConfig = ReductionConfig()) -> Reduction:
    """Classical balanced truncation of the unfolded system.

    Gramian square roots come from symmetric eigendecompositions rather
    than Cholesky, which tolerates numerically rank-deficient Gramians.
    """
    t0 = time.perf_counter()
    lin = sys.unfolded()
    rho = float(np.max(np.abs(np.linalg.eigvals(lin.A))))
    if not rho < 1 - 1e-10:
        raise UnstableSystem(rho)
    Wc = sla.solve_discrete_lyapunov(lin.A, lin.B @ lin.B.T)
    Wo = sla.solve_discrete_lyapunov(lin.A.T, lin.C.T @ lin.C)
    Zc = _dense_factor(Wc, cfg.rank_tol)
    Zo = _dense_factor(Wo, cfg.rank_tol)
    return _finish_dense("BT", lin, Zc, Zo, cfg, cfg.baseline_k(sys.s), t0, sys.s)


def dense_snapshots(A: np.ndarray, B: np.ndarray, horizon: int) -> np.ndarray:
    """``[b_j, A b_j, ..., A^T b_j]`` for each column ``j``, channel-major."""
    n, m = B.shape
    out = np.empty((n, m, horizon + 1))
    x = B
    for t in range(horizon + 1):
        out[:, :, t] = x
        if t < horizon:
            x = A @ x
    return out.reshape(n, m * (horizon + 1))


def bpod_unfolded(sys: Tpds, cfg: ReductionConfig = ReductionConfig()) -> Reduction:
    """Classical BPOD on the unfolded system."""
    t0 = time.perf_counter()
    lin = sys.unfolded()
    X = dense_snapshots(lin.A, lin.B, cfg.T)
    Y = dense_snapshots(lin.A.T, lin.C.T, cfg.L)
    return _finish_dense("BPOD", lin, X, Y, cfg, cfg.baseline_k(sys.s), t0, sys.s)


def dense_markov(lin: LinearSystem, count: int) -> list[np.ndarray]:
    out, x = [], lin.B
    for j in range(count):
        out.append(lin.C @ x)
        if j + 1 < count:
            x = lin.A @ x
    return out


def era_unfolded(markov, cfg: ReductionConfig = ReductionConfig(), s: int | None = None) -> Reduction:
    """Classical ERA on unfolded Markov parameters.

    ``markov`` is a :class:`MarkovSequence` (each tensor is unfolded to
    ``xi(Z_j)``) or a list of dense matrices, in which case ``s`` gives the
    tube count used by the truncation convention.
    """
    t0 = time.perf_counter()
    shifted = _check_markov(markov, cfg.T, cfg.L)
    if isinstance(markov, MarkovSequence):
        s = markov.shape[2]
        mats = [bcirc_array(z.data) for z in markov.Z]
    else:
        if s is None:
            raise ValidationError("s is required for dense Markov input")
        mats = [np.asarray(z) for z in markov]
    N = cfg.T + cfg.L + 2
    Zd = np.stack(mats[:N])[:, None]                                 # (N, 1, p, q)
    p, q = Zd.shape[2:]
    H = _hankel_from_blocks(Zd, cfg.T, cfg.L)[0]
    kk = cfg.baseline_k(s)
    Us, Vs, spec, r, extra = _dense_svd_truncate(H, kk, cfg)
    if shifted:
        A = Us.T @ _hankel_from_blocks(Zd, cfg.T, cfg.L, 1)[0] @ Vs
    else:
        A = _shift_estimate(Us * spec.sigma[0, :r], p)              # U S^-1/2 S = U S^1/2
    red = LinearSystem(A, Us.T @ H[:, :q], H[:p, :] @ Vs)
    wall = time.perf_counter() - t0
    return Reduction("ERA", red, None, None, spec, cfg.k, spec.p - r, error_bound(spec, spec.p - r),
                     wall, extra, {"baseline_truncation": kk, "s": s})


# -- accounting and accuracy ----------------------------------------------


def parameter_count(method: str, dims: dict, k: int, convention: str = "value") -> int:
    """Closed-form size of the reduced model.

    ``dims`` carries ``n, m, l, s`` and, for the POD/ERA methods, ``T, L``.
    """
    m, l, s = dims["m"], dims["l"], dims["s"]
    kk = k * s if convention == "value" else k
    if method == "T-BT":
        r = dims["n"] - k
        count = lambda r: r * r * s + r * m * s + r * l * s  # noqa: E731
    elif method == "BT":
        r = dims["n"] * s - kk
        count = lambda r: r * r + r * m * s + r * l * s  # noqa: E731
    elif method in ("T-BPOD", "T-ERA"):
        r = min(l * (dims["L"] + 1), m * (dims["T"] + 1)) - k
        count = lambda r: r * r * s + r * m * s + r * l * s  # noqa: E731
    elif method in ("BPOD", "ERA"):
        r = min(l * (dims["L"] + 1), m * (dims["T"] + 1)) * s - kk
        count = lambda r: r * r + r * m * s + r * l * s  # noqa: E731
    else:
        raise ValidationError(f"unknown method {method!r}")
    if k < 0 or r < 1:
        raise ValidationError(f"truncation k={k} leaves no state for {method}")
    return int(count(r))


def _difference_gain(full_resp: FrequencyResponse, red_resp: FrequencyResponse):
    if full_resp.structured and red_resp.structured:
        def gain(w):
            d = full_resp.blocks(w) - red_resp.blocks(w)
            return float(max(np.linalg.norm(b, 2) for b in d))
    else:
        def gain(w):
            return float(np.linalg.norm(full_resp.dense(w) - red_resp.dense(w), 2))
    return gain


def relative_error(full, red, grid: int = DEFAULT_GRID, refine: bool = True,
                   full_response: FrequencyResponse | None = None,
                   full_norm: float | None = None) -> float:
    """``||G - G_red||_inf / ||G||_inf`` on a shared frequency grid.

    ``red`` is a :class:`Reduction` or a system.  Pass ``full_response``
    and ``full_norm`` to reuse work across many reductions of one system.
    """
    reduced = red.reduced if isinstance(red, Reduction) else red
    require_stable(full)
    require_stable(reduced)
    fresp = full_response or FrequencyResponse(full)
    norm = full_norm if full_norm is not None else maximize_on_circle(fresp.gain, grid, refine).value
    if norm == 0:
        raise ValidationError("full system has zero transfer function")
    diff = maximize_on_circle(_difference_gain(fresp, FrequencyResponse(reduced)), grid, refine)
    return diff.value / norm


def transfer_difference(sys1, sys2, grid: int = DEFAULT_GRID) -> float:
    """Grid maximum of ``||G1 - G2||`` relative to ``||G1||`` (no stability check)."""
    r1, r2 = FrequencyResponse(sys1), FrequencyResponse(sys2)
    num = maximize_on_circle(_difference_gain(r1, r2), grid, refine=False).value
    den = maximize_on_circle(r1.gain, grid, refine=False).value
    return num / den


def compare_bpod_era(sys: Tpds, cfg: ReductionConfig = ReductionConfig(), grid: int = DEFAULT_GRID) -> dict:
    """Diagnostic: how far apart the T-BPOD and T-ERA reduced models are.

    No equivalence is asserted; the two need not coincide for TPDSs.
    """
    from .system import markov

    a = t_bpod(sys, cfg)
    b = t_era(markov(sys, cfg.T + cfg.L + 2), cfg)
    return {
        "transfer_difference": transfer_difference(a.reduced, b.reduced, grid),
        "order_bpod": a.order,
        "order_era": b.order,
        "sigma_difference": float(np.max(np.abs(a.spectrum.sigma - b.spectrum.sigma))),
    }


def with_k(cfg: ReductionConfig, k: int) -> ReductionConfig:
    return replace(cfg, k=k)
