"""Command-line surface: pool, gradcheck, bench, demo-huddle, fuse.

Exit codes form a stable contract for CI: 0 success, 1 check/property
failure, 2 usage error, 3 I/O or tensor-format error.  Every JSON report
carries schema_version (currently 1).  SARA_WORKERS overrides the default
worker count where --workers is not given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bench, kernels, oracle, refine, synth
from .errors import SaraError
from .io import read_tensor_file, write_tensor_file
from .tensors import BinGrid, FeatureMap, PooledGrid, ProbMap, RoiBox, validate_feature_map, validate_prob_map

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _parse_roi(text: str) -> RoiBox:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"expected x1,y1,x2,y2, got {text!r}")
    try:
        x1, y1, x2, y2 = (float(p) for p in parts)
        return RoiBox(x1, y1, x2, y2)
    except (ValueError, SaraError) as exc:
        raise argparse.ArgumentTypeError(f"bad RoI {text!r}: {exc}")


def _parse_grid(text: str) -> BinGrid:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected HxWxS, got {text!r}")
    try:
        h, w, s = (int(p) for p in parts)
        return BinGrid(h, w, s)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}: {exc}")


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}: {exc}")


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad int list {text!r}: {exc}")


def _parse_size_list(text: str) -> list[tuple[int, int, int]]:
    sizes = []
    for chunk in text.split(","):
        parts = chunk.lower().split("x")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"expected CxHxW, got {chunk!r}")
        sizes.append(tuple(int(p) for p in parts))
    return sizes


def _parse_scores(text: str) -> list[float]:
    # inline "0.4,0.2" or @path to a JSON array
    if text.startswith("@"):
        with open(text[1:]) as fh:
            values = json.load(fh)
        return [float(v) for v in values]
    return [float(p) for p in text.split(",") if p != ""]


def _emit(report: dict, out_path: str | None) -> None:
    blob = json.dumps(report, indent=2)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(blob + "\n")
    else:
        print(blob)


def _default_workers() -> int:
    return int(os.environ.get(kernels.WORKERS_ENV, "1"))


def _cmd_pool(args) -> int:
    try:
        fdata = read_tensor_file(args.feature)
        if fdata.ndim != 3:
            raise SaraError(f"feature tensor must be 3-d, got shape {fdata.shape}")
        feature = validate_feature_map(*fdata.shape, fdata)
        prob = None
        if args.prob:
            pdata = read_tensor_file(args.prob)
            if pdata.ndim != 2:
                raise SaraError(f"probability tensor must be 2-d, got shape {pdata.shape}")
            prob = validate_prob_map(*pdata.shape, pdata)

        if prob is not None:
            pooled = kernels.sa_roi_align_forward(feature, args.roi, prob, args.grid)
        else:
            pooled = kernels.roi_align_forward(feature, args.roi, args.grid)
        write_tensor_file(args.out, pooled)

        if args.backward:
            gdata = read_tensor_file(args.backward)
            gout = PooledGrid(gdata, args.grid)
            if prob is not None:
                grads = kernels.sa_roi_align_backward(gout, feature, args.roi, prob, args.grid)
                write_tensor_file(args.grad_feature, grads.grad_feature)
                write_tensor_file(args.grad_prob, grads.grad_prob)
            else:
                grads = kernels.roi_align_backward(
                    gout, args.roi, args.grid,
                    (feature.channels, feature.height, feature.width),
                )
                write_tensor_file(args.grad_feature, grads.grad_feature)
    except (SaraError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    results = []
    for seed in range(args.seeds):
        prob_dims = (5, 5) if args.kernel == "sa" else None
        case = synth.gen_random_case(
            seed, channels=2, height=7, width=7, grid=(2, 2, 2), prob_dims=prob_dims
        )
        report = oracle.gradcheck(
            args.kernel, case.feature, case.roi, case.grid, case.prob,
            eps=args.eps, tolerance=args.tol, adjoint_seed=seed,
        )
        results.append((seed, report))

    failures = [(s, r) for s, r in results if not r.passed]
    worst_seed, worst = max(results, key=lambda sr: sr[1].max_rel_error)
    report = {
        "schema_version": SCHEMA_VERSION,
        "kernel": args.kernel,
        "seeds": args.seeds,
        "eps": args.eps,
        "tol": args.tol,
        "passed": not failures,
        "failed_seeds": [s for s, _ in failures],
        "worst_case": {"seed": worst_seed, **worst.as_dict()},
    }
    _emit(report, args.out)
    return EXIT_OK if not failures else EXIT_CHECK_FAILED


def _cmd_bench(args) -> int:
    workers = args.workers if args.workers is not None else [_default_workers()]
    report = bench.run_bench(
        sizes=args.sizes,
        jobs=args.jobs,
        grid=args.grid,
        workers=workers,
        repeats=args.repeats,
        oracle_sample=args.oracle_sample,
        seed=args.seed,
    )
    _emit(report, args.out)
    return EXIT_OK if report["determinism_ok"] else EXIT_CHECK_FAILED


def _cmd_demo_huddle(args) -> int:
    rows = []
    ordering_ok = True
    scenario = None
    for sigma in args.sigma:
        scenario = synth.gen_huddle(sigma=sigma, seed=args.seed)
        cos_plain, cos_shaped = synth.feature_separability(scenario, args.grid)
        rows.append({"sigma": sigma, "cos_plain": cos_plain, "cos_shaped": cos_shaped})
        if sigma <= 0.1 and not cos_shaped < cos_plain:
            ordering_ok = False
    report = {"schema_version": SCHEMA_VERSION, "seed": args.seed, "rows": rows, "ordering_ok": ordering_ok}
    _emit(report, args.out)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("sigma,cos_plain,cos_shaped\n")
            for row in rows:
                fh.write(f"{row['sigma']},{row['cos_plain']},{row['cos_shaped']}\n")
    if args.export_dir and scenario is not None:
        synth.export_scenario(scenario, args.export_dir)
    return EXIT_OK if ordering_ok else EXIT_CHECK_FAILED


def _cmd_fuse(args, parser: argparse.ArgumentParser) -> int:
    if len(args.sb) != len(args.sr):
        parser.error(f"score lengths differ: {len(args.sb)} vs {len(args.sr)}")
    sb = refine.ClassScores(np.asarray(args.sb), args.background_index)
    sr = refine.ClassScores(np.asarray(args.sr), args.background_index)
    fused = refine.fuse_scores(sb, sr, refine.FusionWeight(args.alpha))
    report = {
        "schema_version": SCHEMA_VERSION,
        "alpha": args.alpha,
        "fused": [float(v) for v in fused.scores],
        "argmax": int(np.argmax(fused.scores)),
    }
    _emit(report, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sara",
        description="RoI pooling kernels, oracle checks, and huddled-instance demos",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pool = sub.add_parser("pool", help="pool a RoI from a feature tensor file")
    pool.add_argument("--feature", required=True, help="SARA tensor file (C x H x W)")
    pool.add_argument("--roi", required=True, type=_parse_roi, help="x1,y1,x2,y2")
    pool.add_argument("--grid", type=_parse_grid, default=kernels.DEFAULT_GRID, help="HxWxS (default 7x7x2)")
    pool.add_argument("--prob", help="optional probability map file; selects the shape-aware kernel")
    pool.add_argument("--out", required=True, help="output SARA tensor file")
    pool.add_argument("--backward", help="pooled-gradient SARA file; also run the backward pass")
    pool.add_argument("--grad-feature", help="output file for the feature gradient")
    pool.add_argument("--grad-prob", help="output file for the probability gradient")

    grad = sub.add_parser("gradcheck", help="finite-difference checks of the backward passes")
    grad.add_argument("--kernel", required=True, choices=("roialign", "sa"))
    grad.add_argument("--seeds", type=int, default=20)
    grad.add_argument("--eps", type=float, default=1e-3)
    grad.add_argument("--tol", type=float, default=1e-3)
    grad.add_argument("--out", help="write the JSON report here instead of stdout")

    bn = sub.add_parser("bench", help="median-timing benchmark, kernel vs oracle")
    bn.add_argument("--sizes", type=_parse_size_list, default=[(256, 64, 64)], help="CxHxW[,CxHxW...]")
    bn.add_argument("--jobs", type=int, default=1000)
    bn.add_argument("--grid", type=_parse_grid, default=kernels.DEFAULT_GRID)
    bn.add_argument("--workers", type=_parse_int_list, default=None, help="worker counts, e.g. 1,2,8")
    bn.add_argument("--repeats", type=int, default=3)
    bn.add_argument("--oracle-sample", type=int, default=5)
    bn.add_argument("--seed", type=int, default=0)
    bn.add_argument("--out", help="write the JSON report here instead of stdout")

    demo = sub.add_parser("demo-huddle", help="measure feature separability on huddle scenarios")
    demo.add_argument("--sigma", type=_parse_float_list, default=[0.0, 0.05, 0.1])
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--grid", type=_parse_grid, default=kernels.DEFAULT_GRID)
    demo.add_argument("--csv", help="also write sigma,cos_plain,cos_shaped rows here")
    demo.add_argument("--out", help="write the JSON report here instead of stdout")
    demo.add_argument("--export-dir", help="export the last scenario (tensors + geometry JSON)")

    fuse = sub.add_parser("fuse", help="fuse base and refined classification scores")
    fuse.add_argument("--sb", required=True, type=_parse_scores, help="base scores, inline or @file")
    fuse.add_argument("--sr", required=True, type=_parse_scores, help="refined scores, inline or @file")
    fuse.add_argument("--alpha", type=float, default=1.0)
    fuse.add_argument("--background-index", type=int, default=0)
    fuse.add_argument("--out", help="write the JSON report here instead of stdout")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "pool":
        if args.backward and not args.grad_feature:
            parser.error("--backward requires --grad-feature")
        if args.backward and args.prob and not args.grad_prob:
            parser.error("--backward with --prob requires --grad-prob")
        return _cmd_pool(args)
    if args.command == "gradcheck":
        if args.seeds <= 0:
            parser.error(f"--seeds must be positive, got {args.seeds}")
        if args.eps <= 0:
            parser.error(f"--eps must be positive, got {args.eps}")
        if args.tol < 0:
            parser.error(f"--tol must be >= 0, got {args.tol}")
        return _cmd_gradcheck(args)
    if args.command == "bench":
        if args.repeats <= 0:
            parser.error(f"--repeats must be positive, got {args.repeats}")
        if args.jobs <= 0:
            parser.error(f"--jobs must be positive, got {args.jobs}")
        if args.workers is not None and (not args.workers or min(args.workers) < 1):
            parser.error(f"--workers must be positive, got {args.workers}")
        return _cmd_bench(args)
    if args.command == "demo-huddle":
        if not args.sigma:
            parser.error("--sigma needs at least one value")
        if any(s < 0 for s in args.sigma):
            parser.error("--sigma values must be >= 0")
        return _cmd_demo_huddle(args)
    if args.command == "fuse":
        if args.alpha < 0:
            parser.error(f"--alpha must be >= 0, got {args.alpha}")
        return _cmd_fuse(args, parser)
    parser.error(f"unknown command {args.command!r}")  # pragma: no cover
    return EXIT_USAGE  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
