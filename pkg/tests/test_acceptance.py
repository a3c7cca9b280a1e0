"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -v tests/test_acceptance.py``; the verdict lines are
written past pytest's capture so they appear in the log.
"""

from __future__ import annotations

import time

import numpy as np
import pytest
import scipy.linalg as sla

from conftest import rel
import oracles
from tprod_mor import bench, io, mor
from tprod_mor.gramians import empirical_gramian, impulse_snapshots, lyapunov_gramian
from tprod_mor.spectral import from_fourier, to_fourier
from tprod_mor.system import hinf_norm, markov
from tprod_mor.tensor3 import Tensor3, bcirc, tprod

pytestmark = pytest.mark.acceptance


def verdict(capsys, number: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\nCRITERION {number:2d}: {'PASS' if ok else 'FAIL'} {detail}")


def _shape(rng, lo=1, hi=6):
    return (int(x) for x in rng.integers(lo, hi, size=4))


def test_c01_algebra(capsys):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = {"homomorphism": 0.0, "associativity": 0.0, "reversal": 0.0, "round trip": 0.0,
             "parseval": 0.0}
    for _ in range(200):
        n, m, q, s = _shape(rng)
        A = Tensor3(rng.standard_normal((n, m, s)))
        B = Tensor3(rng.standard_normal((m, q, s)))
        C = Tensor3(rng.standard_normal((q, 2, s)))
        AB = tprod(A, B)
        worst["homomorphism"] = max(worst["homomorphism"],
                                    rel(bcirc(AB).matrix, bcirc(A).matrix @ bcirc(B).matrix))
        worst["associativity"] = max(worst["associativity"],
                                     rel(tprod(AB, C).data, tprod(A, tprod(B, C)).data))
        worst["reversal"] = max(worst["reversal"], rel(AB.T.data, tprod(B.T, A.T).data))
        worst["round trip"] = max(worst["round trip"], rel(from_fourier(to_fourier(A)).data, A.data))
        lhs = A.norm() ** 2
        rhs = np.sum(np.abs(to_fourier(A).blocks) ** 2) / s
        worst["parseval"] = max(worst["parseval"], abs(lhs - rhs) / lhs)
    elapsed = time.perf_counter() - t0
    tol = {"homomorphism": 1e-10, "associativity": 1e-10, "reversal": 1e-12, "round trip": 1e-12,
           "parseval": 1e-10}
    ok = all(worst[k] <= tol[k] for k in tol) and elapsed < 30
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f"; {elapsed:.1f} s"
    verdict(capsys, 1, ok, detail)
    assert ok


def test_c02_s1_oracles(capsys):
    t0 = time.perf_counter()
    worst = {"T-BT": 0.0, "T-BPOD": 0.0, "T-ERA": 0.0}
    T = L = 8
    for seed in range(20):
        sys = bench.random_stable_tpds(bench.ExperimentConfig(n=10, m=2, l=2, s=1, rho=0.8, seed=seed))
        A, B, C = (X.data[:, :, 0] for X in (sys.A, sys.B, sys.C))
        Zd = oracles.markov_dense(A, B, C, T + L + 2)
        for k in (0, 3, 6):
            red = mor.t_bt(sys, mor.ReductionConfig(k=k))
            worst["T-BT"] = max(worst["T-BT"], oracles.tf_diff(oracles.bt(A, B, C, 10 - k)[:3],
                                                               _dense(red)))
            red = mor.t_bpod(sys, mor.ReductionConfig(k=k + 8, T=T, L=L))
            worst["T-BPOD"] = max(worst["T-BPOD"], oracles.tf_diff(oracles.bpod(A, B, C, 10 - k, T, L),
                                                                   _dense(red)))
            red = mor.t_era(markov(sys, T + L + 2), mor.ReductionConfig(k=k + 8, T=T, L=L))
            worst["T-ERA"] = max(worst["T-ERA"], oracles.tf_diff(oracles.era(Zd, 10 - k, T, L),
                                                                 _dense(red)))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-9 and elapsed < 60
    verdict(capsys, 2, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f"; {elapsed:.1f} s")
    assert ok


def _dense(red):
    R = red.reduced
    return R.A.data[:, :, 0], R.B.data[:, :, 0], R.C.data[:, :, 0]


def test_c03_lyapunov(capsys):
    res_worst, agree_worst = 0.0, 0.0
    cases = [(n, s) for n in range(1, 61) for s in range(1, 61) if n * s <= 60][::7]
    for i, (n, s) in enumerate(cases):
        sys = bench.random_stable_tpds(bench.ExperimentConfig(n=n, m=2, l=2, s=s, rho=0.9, seed=i))
        for kind in ("controllability", "observability"):
            W = lyapunov_gramian(sys, kind).W
            A = sys.A if kind == "controllability" else sys.A.T
            F = sys.B if kind == "controllability" else sys.C.T
            Q = tprod(F, F.T)
            res = (W - tprod(tprod(A, W), A.T) - Q).norm() / Q.norm()
            res_worst = max(res_worst, res)
            xa, xq = bcirc(A).matrix, bcirc(Q).matrix
            agree_worst = max(agree_worst, rel(bcirc(W).matrix, sla.solve_discrete_lyapunov(xa, xq)))
    ok = res_worst <= 1e-9 and agree_worst <= 1e-8
    verdict(capsys, 3, ok, f"{len(cases)} shapes, residual {res_worst:.1e}, "
                           f"materialized agreement {agree_worst:.1e}")
    assert ok


def test_c04_error_bound(capsys):
    t0 = time.perf_counter()
    slack, violations = np.inf, 0
    for seed in range(50):
        sys = bench.random_stable_tpds(bench.ExperimentConfig(n=30, m=3, l=3, s=5, seed=seed))
        norm = hinf_norm(sys)
        for k in (5, 10, 15, 20, 25):
            red = mor.t_bt(sys, mor.ReductionConfig(k=k))
            err = mor.relative_error(sys, red, full_norm=norm)
            gap = red.bound / norm + 1e-8 - err
            slack = min(slack, gap)
            violations += gap < 0
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 300
    verdict(capsys, 4, ok, f"250 reductions, {violations} violations, min slack {slack:.2e}; "
                           f"{elapsed:.1f} s")
    assert ok


def test_c05_exact_realization(capsys):
    worst, cases = 0.0, 0
    for seed, (n, m, l, s, T, L) in enumerate([(6, 2, 2, 3, 5, 5), (10, 3, 2, 4, 6, 6),
                                                (4, 1, 1, 5, 4, 4), (12, 2, 3, 2, 8, 6)]):
        assert n <= min(l * (L + 1), m * (T + 1))
        sys = bench.random_stable_tpds(bench.ExperimentConfig(n=n, m=m, l=l, s=s, seed=seed, rho=0.8))
        Z = markov(sys, T + L + 2)
        red = mor.t_era(Z, mor.ReductionConfig(T=T, L=L))
        Zr = markov(red.reduced, T + L + 2)
        worst = max(worst, max(rel(a.data, b.data) for a, b in zip(Zr.Z, Z.Z)))
        cases += 1
    ok = worst <= 1e-8
    verdict(capsys, 5, ok, f"{cases} systems, max Markov relative error {worst:.1e}")
    assert ok


COUNTS_T_ERA = {0: 10725, 10: 7425, 20: 4725, 30: 2625, 40: 1125, 50: 225}
COUNTS_ERA = {0: 32175, 10: 22275, 20: 14175, 30: 7875, 40: 3375, 50: 675}


def test_c06_image_setup_counts(capsys):
    dims = {"m": 5, "l": 5, "s": 3, "T": 10, "L": 10}
    t = {k: mor.parameter_count("T-ERA", dims, k) for k in COUNTS_T_ERA}
    e = {k: mor.parameter_count("ERA", dims, k, "value") for k in COUNTS_ERA}
    ok = t == COUNTS_T_ERA and e == COUNTS_ERA
    verdict(capsys, 6, ok, f"T-ERA {list(t.values())}, ERA {list(e.values())}")
    assert ok


def test_c07_sweep(capsys):
    cfg = bench.ExperimentConfig(methods=mor.METHODS)
    t0 = time.perf_counter()
    rows = bench.run_sweep(cfg)
    elapsed = time.perf_counter() - t0
    by = {(r.method, r.k): r for r in rows}
    failed = [f"{r.method}@{r.k}" for r in rows if r.failed]
    acc, mono, speed = [], [], []
    for t, b in (("T-BT", "BT"), ("T-BPOD", "BPOD"), ("T-ERA", "ERA")):
        for k in cfg.ks:
            rt, rb = by[(t, k)], by[(b, k)]
            if rt.rel_err > 10 * rb.rel_err:
                acc.append(f"{t}@{k}")
            if rt.time_s > 0.5 * rb.time_s:
                speed.append(f"{t}@{k} {rt.time_s:.3f}s vs {rb.time_s:.3f}s")
    for method in mor.METHODS:
        errs = [by[(method, k)].rel_err for k in cfg.ks]
        if any(b < a for a, b in zip(errs, errs[1:])):
            mono.append(method)
    ok = not (failed or acc or mono or speed) and elapsed < 600
    ratio = min(by[(b, k)].time_s / by[(t, k)].time_s for t, b in
                (("T-BT", "BT"), ("T-BPOD", "BPOD"), ("T-ERA", "ERA")) for k in cfg.ks)
    detail = (f"(a) factor-10 misses {acc or 'none'}; (b) non-monotone {mono or 'none'}; "
              f"(c) slow rows {speed or 'none'}, min speedup {ratio:.1f}x; "
              f"failed rows {failed or 'none'}; {elapsed:.0f} s")
    verdict(capsys, 7, ok, detail)
    with capsys.disabled():
        print(io.report_csv(rows), end="")
    assert ok


def test_c08_empirical_gramian(capsys):
    sys = bench.random_stable_tpds(bench.ExperimentConfig(n=20, m=2, l=2, s=3, rho=0.8, seed=0))
    Wl = lyapunov_gramian(sys).W
    We = empirical_gramian(impulse_snapshots(sys, 200)).W
    dev = (We - Wl).norm() / Wl.norm()
    ok = dev <= 1e-3
    verdict(capsys, 8, ok, f"relative deviation {dev:.2e}")
    assert ok


def test_c09_image_case(capsys, tmp_path):
    frames = bench.synthetic_frames(count=21)
    io.write_frames(tmp_path, frames)
    frames = io.read_frames(io.frame_paths(tmp_path))
    report = bench.image_case_study(frames, T=10, L=10)
    csv = io.parse_report(io.emit_report(report.rows, "csv", tmp_path / "r.csv"))
    k0 = report.frame_errors[("T-ERA", 0)]
    t = {r.k: r.params for r in csv if r.method == "T-ERA"}
    e = {r.k: r.params for r in csv if r.method == "ERA"}
    ok = (len(frames) == 21 and frames.shape == (5, 5, 3) and len(k0) == 10
          and k0.max() <= 1e-6 and t == COUNTS_T_ERA and e == COUNTS_ERA)
    verdict(capsys, 9, ok, f"21 frames, T-ERA k=0 max frame error {k0.max():.1e} over frames 0-9, "
                           f"CSV counts {'match' if t == COUNTS_T_ERA and e == COUNTS_ERA else 'differ'}")
    assert ok


def test_c10_serialization(capsys, tmp_path):
    rng = np.random.default_rng(1010)
    bad = 0
    for i in range(1000):
        n, m, s = (int(x) for x in rng.integers(1, 8, size=3))
        d = rng.standard_normal((n, m, s)) * 10.0 ** rng.integers(-300, 300)
        A = Tensor3(d)
        path = tmp_path / f"t{i % 4}.t3b"
        io.write_tensor(path, A)
        B = io.read_tensor(path)
        bad += B.shape != A.shape or B.data.tobytes() != A.data.tobytes()
    ok = bad == 0
    verdict(capsys, 10, ok, f"1000 tensors, {bad} mismatches")
    assert ok
