"""Command line interface.

Exit codes: 0 success, 1 invalid input or usage, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench, mor
from .errors import NumericalError, TprodMorError, ValidationError
from .io import emit_report, frame_paths, read_frames, read_tensor, write_frames, write_tensor
from .system import Tpds, markov

log = logging.getLogger("tprod_mor")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_system(directory) -> Tpds:
    d = Path(directory)
    return Tpds(*(read_tensor(d / f"{name}.t3b") for name in ("A", "B", "C")))


def _save_system(directory, sys: Tpds) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name in ("A", "B", "C"):
        write_tensor(d / f"{name}.t3b", getattr(sys, name))


def _emit(rows, args) -> None:
    text = emit_report(rows, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)


def _reduction_cfg(args) -> mor.ReductionConfig:
    return mor.ReductionConfig(k=args.k, T=args.T, L=args.L, convention=args.convention,
                               near_zero="raise" if args.strict else "truncate")


def _row(red: mor.Reduction, rel_err: float) -> bench.ReportRow:
    p = red.parameter_count
    return bench.ReportRow(red.method, red.k, red.wall_time, p, p * bench.BYTES_PER_SCALAR,
                           rel_err, red.bound)


def _frames(args):
    if args.synthetic:
        return bench.synthetic_frames(seed=args.seed)
    if args.frames is None:
        raise ValidationError("give --frames DIR or --synthetic")
    return read_frames(frame_paths(args.frames))


# -- subcommands ----------------------------------------------------------


def cmd_gen(args) -> int:
    cfg = bench.ExperimentConfig(n=args.n, m=args.m, l=args.l, s=args.s, rho=args.rho,
                                 seed=args.seed, prng=args.prng)
    _save_system(args.out, bench.random_stable_tpds(cfg))
    print(f"wrote A.t3b, B.t3b, C.t3b to {args.out}")
    return 0


def cmd_reduce(args) -> int:
    cfg = _reduction_cfg(args)
    rows = []
    if args.command == "tera" and (args.frames is not None or args.synthetic):
        frames = _frames(args)
        methods = ("T-ERA", "ERA") if args.baseline else ("T-ERA",)
        report = bench.image_case_study(frames, cfg.T, cfg.L, (cfg.k,), cfg.convention, methods)
        for r in report.rows:
            if r.failed:
                raise NumericalError(r.status)
        _emit(report.rows, args)
        return 0
    if args.sys is None:
        raise ValidationError("give --sys DIR")
    sys_ = _load_system(args.sys)
    pairs = {"tbt": ("T-BT", "BT"), "tbpod": ("T-BPOD", "BPOD"), "tera": ("T-ERA", "ERA")}
    methods = pairs[args.command] if args.baseline else pairs[args.command][:1]
    for method in methods:
        red = bench._reduce(method, sys_, cfg)
        rows.append(_row(red, mor.relative_error(sys_, red, args.grid)))
        if args.save_reduced and red.tpds_structure:
            _save_system(args.save_reduced, red.reduced)
    _emit(rows, args)
    return 0


def cmd_bench(args) -> int:
    from .io import load_config

    cfg = load_config(args.config) if args.config else bench.ExperimentConfig()
    rows = bench.run_sweep(cfg)
    _emit(rows, args)
    return 2 if all(r.failed for r in rows) else 0


def cmd_imagecase(args) -> int:
    frames = _frames(args)
    if args.write_frames:
        write_frames(args.write_frames, frames)
    report = bench.image_case_study(frames, args.T, args.L, tuple(args.ks), args.convention)
    _emit(report.rows, args)
    if args.frame_errors:
        with open(args.frame_errors, "w") as fh:
            fh.write("method,k," + ",".join(f"Z{j}" for j in range(report.frames_checked)) + "\n")
            for (method, k), e in report.frame_errors.items():
                fh.write(f"{method},{k}," + ",".join(format(x, ".17g") for x in e) + "\n")
    return 0


def _check(name: str, ok: bool, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return ok


def cmd_verify(args) -> int:
    from .gramians import gramian_blocks, stein_residual
    from .system import hinf_norm, is_stable, spectral_radius

    sys_ = _load_system(args.sys)
    results = []
    rho = spectral_radius(sys_)
    results.append(_check("stability", is_stable(sys_), f"spectral radius {rho:.6g}"))
    if not results[-1]:
        return 2
    Ah, Bh, Ch = sys_.fourier
    Wc = gramian_blocks(Ah, Bh, "controllability")
    res = max(stein_residual(a, w, b @ np.conj(b.T)) for a, w, b in zip(Ah.blocks, Wc.blocks, Bh.blocks))
    results.append(_check("stein residual", res <= 1e-9, f"{res:.3e}"))
    norm = hinf_norm(sys_, args.grid)
    full = mor.t_bt(sys_, mor.ReductionConfig(k=0))
    e0 = mor.relative_error(sys_, full, args.grid, full_norm=norm)
    results.append(_check("balanced realization k=0", e0 <= 1e-8, f"rel err {e0:.3e}"))
    k = min(args.k, sys_.n - 1)
    red = mor.t_bt(sys_, mor.ReductionConfig(k=k))
    ek = mor.relative_error(sys_, red, args.grid, full_norm=norm)
    results.append(_check(f"error bound k={k}", ek <= red.bound / norm + 1e-8,
                          f"rel err {ek:.3e} <= bound {red.bound / norm:.3e}"))
    T = L = args.T
    r0 = min(sys_.l * (L + 1), sys_.m * (T + 1))
    if sys_.n <= r0:
        Z = markov(sys_, T + L + 2)
        era = mor.t_era(Z, mor.ReductionConfig(k=0, T=T, L=L))
        Zr = markov(era.reduced, T + L + 2)
        worst = max(np.linalg.norm(a.data - b.data) / max(np.linalg.norm(b.data), 1e-300)
                    for a, b in zip(Zr.Z, Z.Z))
        results.append(_check("exact realization", worst <= 1e-8, f"max rel err {worst:.3e}"))
    return 0 if all(results) else 2


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tprod-mor", description="Model order reduction for T-product dynamical systems.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="random stable TPDS to A.t3b, B.t3b, C.t3b")
    for name, default in (("n", 100), ("m", 5), ("l", 5), ("s", 9)):
        g.add_argument(f"--{name}", type=int, default=default)
    g.add_argument("--rho", type=float, default=0.9)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--prng", default="PCG64", choices=bench.PRNG_FAMILIES)
    g.add_argument("--out", default=".", help="output directory")
    g.set_defaults(func=cmd_gen)

    def report_args(q):
        q.add_argument("--out", default=None, help="report file (stdout if omitted)")
        q.add_argument("--format", default="csv", choices=("csv", "json"))

    for name, what in (("tbt", "T-BT"), ("tbpod", "T-BPOD"), ("tera", "T-ERA")):
        r = sub.add_parser(name, help=f"reduce with {what}")
        r.add_argument("--sys", default=".", help="directory holding A.t3b, B.t3b, C.t3b")
        r.add_argument("--k", type=int, default=0)
        r.add_argument("--T", type=int, default=20)
        r.add_argument("--L", type=int, default=20)
        r.add_argument("--convention", default="value", choices=("value", "tuple"))
        r.add_argument("--grid", type=int, default=512)
        r.add_argument("--baseline", action="store_true", help="also run the unfolded method")
        r.add_argument("--strict", action="store_true", help="fail on near-zero singular values")
        r.add_argument("--save-reduced", default=None, help="directory for the reduced .t3b triple")
        if name == "tera":
            r.add_argument("--frames", default=None, help="directory of PPM frames (Markov data)")
            r.add_argument("--synthetic", action="store_true", help="use synthetic frames")
            r.add_argument("--seed", type=int, default=0)
        report_args(r)
        r.set_defaults(func=cmd_reduce, frames=None, synthetic=False)

    b = sub.add_parser("bench", help="truncation sweep from a TOML config")
    b.add_argument("--config", default=None)
    report_args(b)
    b.set_defaults(func=cmd_bench)

    im = sub.add_parser("imagecase", help="T-ERA vs ERA on image frames")
    im.add_argument("--frames", default=None)
    im.add_argument("--synthetic", action="store_true")
    im.add_argument("--seed", type=int, default=0)
    im.add_argument("--T", type=int, default=10)
    im.add_argument("--L", type=int, default=10)
    im.add_argument("--ks", type=int, nargs="+", default=[0, 10, 20, 30, 40, 50])
    im.add_argument("--convention", default="value", choices=("value", "tuple"))
    im.add_argument("--write-frames", default=None, help="also save the frames as PPM")
    im.add_argument("--frame-errors", default=None, help="CSV of per-frame errors")
    report_args(im)
    im.set_defaults(func=cmd_imagecase)

    v = sub.add_parser("verify", help="check invariants on a stored system")
    v.add_argument("--sys", default=".")
    v.add_argument("--k", type=int, default=5)
    v.add_argument("--T", type=int, default=10)
    v.add_argument("--grid", type=int, default=512)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, TprodMorError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
