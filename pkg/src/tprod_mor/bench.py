"""Benchmark harness: random stable systems, truncation sweeps, image study.

Timings use ``time.perf_counter`` and report the median over the
configured repetitions.  Relative errors are evaluated once per row (they
do not depend on the repetition) against a frequency response of the full
system that is shared by every row.
"""

from __future__ import annotations

import logging
import statistics
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import mor
from .errors import ConfigError, InsufficientSnapshots, TprodMorError, ValidationError
from .spectral import FourierBlocks, from_fourier, to_fourier
from .system import (
    DEFAULT_GRID,
    FrequencyResponse,
    MarkovSequence,
    Tpds,
    markov,
    maximize_on_circle,
)
from .tensor3 import Tensor3, bcirc_array

log = logging.getLogger(__name__)

BYTES_PER_SCALAR = 8
PRNG_FAMILIES = ("PCG64", "Philox", "SFC64")


@dataclass(frozen=True)
class ExperimentConfig:
    """Protocol for a truncation sweep.

    ``prng`` names the NumPy bit generator seeded with ``seed``.  ``A`` is
    drawn first, then ``B``, then ``C``, each filled in storage order
    (slice-major, column-major within a slice).
    """

    n: int = 100
    m: int = 5
    l: int = 5
    s: int = 9
    rho: float = 0.9
    seed: int = 0
    ks: tuple[int, ...] = (55, 60, 65, 70, 75, 80, 85, 90)
    T: int = 20
    L: int = 20
    methods: tuple[str, ...] = ("T-BT", "BT")
    repetitions: int = 3
    convention: str = "value"
    grid: int = DEFAULT_GRID
    prng: str = "PCG64"

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ConfigError(f"rho must lie in (0, 1), got {self.rho}")
        if min(self.n, self.m, self.l, self.s) < 1:
            raise ConfigError("dimensions must be positive")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        bad = [m for m in self.methods if m not in mor.METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}")
        if self.convention not in ("value", "tuple"):
            raise ConfigError(f"unknown convention {self.convention!r}")
        if self.prng not in PRNG_FAMILIES:
            raise ConfigError(f"unknown prng {self.prng!r}")
        object.__setattr__(self, "ks", tuple(int(k) for k in self.ks))
        object.__setattr__(self, "methods", tuple(self.methods))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    def reduction(self, k: int) -> mor.ReductionConfig:
        return mor.ReductionConfig(k=k, T=self.T, L=self.L, convention=self.convention)


@dataclass(frozen=True)
class ReportRow:
    method: str
    k: int
    time_s: float
    params: int
    bytes: int
    rel_err: float
    bound: float
    status: str = "ok"

    @property
    def failed(self) -> bool:
        return self.status != "ok"


def _rng(cfg: ExperimentConfig) -> np.random.Generator:
    return np.random.Generator(getattr(np.random, cfg.prng)(cfg.seed))


def _draw(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(int(np.prod(shape))).reshape(shape, order="F")


def random_stable_tpds(cfg: ExperimentConfig) -> Tpds:
    """Gaussian ``A, B, C`` with ``A`` rescaled so its largest block radius is ``rho``."""
    rng = _rng(cfg)
    A = _draw(rng, (cfg.n, cfg.n, cfg.s))
    B = _draw(rng, (cfg.n, cfg.m, cfg.s))
    C = _draw(rng, (cfg.l, cfg.n, cfg.s))
    Ah = to_fourier(Tensor3(A))
    radius = max(float(np.max(np.abs(np.linalg.eigvals(b)))) for b in Ah.blocks)
    A = from_fourier(FourierBlocks(Ah.blocks * (cfg.rho / radius)))
    return Tpds(A, Tensor3(B), Tensor3(C))


def _reduce(method: str, sys: Tpds, rcfg: mor.ReductionConfig) -> mor.Reduction:
    """One timed run; Markov data generation counts toward the ERA methods."""
    if method == "T-BT":
        return mor.t_bt(sys, rcfg)
    if method == "BT":
        return mor.bt_unfolded(sys, rcfg)
    if method == "T-BPOD":
        return mor.t_bpod(sys, rcfg)
    if method == "BPOD":
        return mor.bpod_unfolded(sys, rcfg)
    if method == "T-ERA":
        return mor.t_era(markov(sys, rcfg.T + rcfg.L + 2), rcfg)
    if method == "ERA":
        Z = mor.dense_markov(sys.unfolded(), rcfg.T + rcfg.L + 2)
        return mor.era_unfolded(Z, rcfg, s=sys.s)
    raise ValidationError(f"unknown method {method!r}")


def _failed_row(method: str, k: int, exc: Exception) -> ReportRow:
    nan = float("nan")
    return ReportRow(method, k, nan, -1, -1, nan, nan, f"failed: {type(exc).__name__}: {exc}")


def run_sweep(cfg: ExperimentConfig, sys: Tpds | None = None) -> list[ReportRow]:
    """Every method at every ``k``; a failing row is recorded, not raised."""
    if sys is None:
        sys = random_stable_tpds(cfg)
    fresp = FrequencyResponse(sys)
    norm = maximize_on_circle(fresp.gain, cfg.grid).value
    rows = []
    for k in cfg.ks:
        rcfg = cfg.reduction(k)
        for method in cfg.methods:
            try:
                times, red = [], None
                for _ in range(cfg.repetitions):
                    t0 = time.perf_counter()
                    red = _reduce(method, sys, rcfg)
                    times.append(time.perf_counter() - t0)
                err = mor.relative_error(sys, red, cfg.grid, full_response=fresp, full_norm=norm)
                p = red.parameter_count
                rows.append(ReportRow(method, k, statistics.median(times), p,
                                      p * BYTES_PER_SCALAR, err, red.bound))
            except TprodMorError as exc:
                log.warning("row %s k=%d failed: %s", method, k, exc)
                rows.append(_failed_row(method, k, exc))
            log.info("%s k=%d done", method, k)
    return rows


# -- image case study -----------------------------------------------------


def synthetic_frames(count: int = 21, height: int = 5, width: int = 5, channels: int = 3,
                     order: int = 8, rho: float = 0.85, seed: int = 0,
                     quantize: bool = True) -> MarkovSequence:
    """Darkening RGB frames generated as Markov parameters of a hidden TPDS.

    All tensors are nonnegative, so every frame is a valid image; the
    block radius is ``rho`` and the first frame peaks at 1.  With
    ``quantize`` the frames are rounded to 8-bit levels, which makes the
    generalized Hankel matrices full rank.

    The default of 21 frames exactly fills the Hankel tensor for
    ``T = L = 10``; T-ERA then estimates the state matrix from the shift
    structure of that Hankel tensor (a 22nd frame enables the shifted one).
    """
    rng = np.random.default_rng(seed)
    # A lives in the first frontal slice only, so every Fourier block of A
    # equals that slice and all color frequencies decay at the same rate
    A = np.zeros((order, order, channels))
    A[:, :, 0] = rng.random((order, order))
    B = rng.random((order, width, channels))
    C = rng.random((height, order, channels))
    radius = max(float(np.max(np.abs(np.linalg.eigvals(b)))) for b in to_fourier(Tensor3(A)).blocks)
    sys = Tpds(Tensor3(A * (rho / radius)), Tensor3(B), Tensor3(C))
    Z = markov(sys, count).Z
    scale = float(Z[0].data.max())
    frames = []
    for z in Z:
        d = np.clip(z.data / scale, 0.0, 1.0)
        if quantize:
            d = np.round(d * 255.0) / 255.0
        frames.append(Tensor3(d))
    return MarkovSequence(frames)


@dataclass(frozen=True, eq=False)
class ImageCaseReport:
    """Rows (``rel_err`` = worst frame error over the reconstructed frames)
    and the per-frame relative errors keyed by ``(method, k)``."""

    rows: list[ReportRow]
    frame_errors: dict = field(default_factory=dict)
    frames_checked: int = 10


def _frame_errors(red: mor.Reduction, frames: MarkovSequence, count: int) -> np.ndarray:
    if red.tpds_structure:
        Zr = [z.data for z in markov(red.reduced, count).Z]
        Zf = [z.data for z in frames.Z[:count]]
    else:
        Zr = mor.dense_markov(red.reduced, count)
        Zf = [bcirc_array(z.data) for z in frames.Z[:count]]
    out = np.empty(count)
    for j, (a, b) in enumerate(zip(Zr, Zf)):
        nb = np.linalg.norm(b)
        out[j] = np.linalg.norm(a - b) / nb if nb > 0 else np.linalg.norm(a)
    return out


def image_case_study(frames: MarkovSequence, T: int = 10, L: int = 10,
                     ks=(0, 10, 20, 30, 40, 50), convention: str = "value",
                     methods=("T-ERA", "ERA"), frames_checked: int = 10) -> ImageCaseReport:
    """T-ERA and ERA on a frame sequence treated as Markov parameters."""
    if len(frames) < T + L + 1:
        raise InsufficientSnapshots(f"need at least {T + L + 1} frames, got {len(frames)}")
    rows, errs = [], {}
    s = frames.shape[2]
    for k in ks:
        rcfg = mor.ReductionConfig(k=k, T=T, L=L, convention=convention)
        for method in methods:
            try:
                t0 = time.perf_counter()
                if method == "T-ERA":
                    red = mor.t_era(frames, rcfg)
                elif method == "ERA":
                    red = mor.era_unfolded(frames, rcfg)
                else:
                    raise ValidationError(f"image study supports T-ERA/ERA, not {method!r}")
                wall = time.perf_counter() - t0
                e = _frame_errors(red, frames, frames_checked)
                errs[(method, k)] = e
                p = red.parameter_count
                rows.append(ReportRow(method, k, wall, p, p * BYTES_PER_SCALAR,
                                      float(e.max()), red.bound))
            except TprodMorError as exc:
                rows.append(_failed_row(method, k, exc))
    log.debug("image study on %d frames with s=%d", len(frames), s)
    return ImageCaseReport(rows, errs, frames_checked)
