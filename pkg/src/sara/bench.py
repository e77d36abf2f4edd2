"""Median-timing micro-benchmark comparing the fast kernels to the oracle.

One warmup run is excluded; wall times are medians over the requested
repeats.  The oracle is timed per RoI on a small job subsample (it is orders
of magnitude slower by design) and the speedup compares per-RoI medians.
Output checksums are recorded per worker count; any divergence is a
determinism violation.
"""

from __future__ import annotations

import hashlib
import statistics
import time

import numpy as np

from . import kernels, oracle, synth
from .tensors import BinGrid, FeatureMap, ProbMap

SCHEMA_VERSION = 1


def _checksum(results) -> str:
    digest = hashlib.sha256()
    for res in results:
        if res.error is not None:
            digest.update(res.error.encode())
            continue
        digest.update(res.output.data.tobytes())
        if res.grads is not None:
            digest.update(res.grads.grad_feature.tobytes())
            if res.grads.grad_prob is not None:
                digest.update(res.grads.grad_prob.tobytes())
    return digest.hexdigest()


def _make_jobs(size, grid: BinGrid, jobs: int, with_prob: bool, seed: int):
    channels, height, width = size
    rng = np.random.Generator(np.random.PCG64(seed))
    feature = FeatureMap(rng.random((channels, height, width), dtype=np.float32))
    out = []
    for i in range(jobs):
        roi = synth._draw_roi(rng, height, width)
        prob = None
        if with_prob:
            prob = ProbMap(rng.random((2 * grid.bin_rows, 2 * grid.bin_cols), dtype=np.float32))
        out.append(kernels.PoolJob(feature, roi, grid, prob))
    return out


def run_bench(
    *,
    sizes=((256, 64, 64),),
    jobs: int = 1000,
    grid: BinGrid = kernels.DEFAULT_GRID,
    workers=(1,),
    repeats: int = 3,
    oracle_sample: int = 5,
    seed: int = 0,
) -> dict:
    """Benchmark both kernels on every size; returns the report dict."""
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    workers = list(workers)
    if not workers or any(w < 1 for w in workers):
        raise ValueError(f"worker counts must be >= 1, got {workers}")

    records = []
    determinism_ok = True
    for size in sizes:
        for name, with_prob in (("roialign", False), ("sa", True)):
            job_list = _make_jobs(size, grid, jobs, with_prob, seed)

            per_worker = {}
            checksums = {}
            for wk in workers:
                kernels.batch_run(job_list[: min(8, jobs)], workers=wk)  # warmup
                times = []
                results = None
                for _ in range(repeats):
                    t0 = time.perf_counter()
                    results = kernels.batch_run(job_list, workers=wk)
                    times.append(time.perf_counter() - t0)
                per_worker[wk] = statistics.median(times)
                checksums[wk] = _checksum(results)
            if len(set(checksums.values())) != 1:
                determinism_ok = False

            sample = job_list[: min(oracle_sample, jobs)]
            oracle_times = []
            for job in sample:
                t0 = time.perf_counter()
                if job.prob is not None:
                    oracle.oracle_sa_roi_align(job.feature, job.roi, job.prob, job.grid)
                else:
                    oracle.oracle_roi_align(job.feature, job.roi, job.grid)
                oracle_times.append(time.perf_counter() - t0)
            oracle_per_roi = statistics.median(oracle_times)

            base_workers = workers[0]
            kernel_per_roi = per_worker[base_workers] / jobs
            records.append(
                {
                    "kernel": name,
                    "dims": {"channels": size[0], "height": size[1], "width": size[2]},
                    "grid": {
                        "bin_rows": grid.bin_rows,
                        "bin_cols": grid.bin_cols,
                        "samples_per_side": grid.samples_per_side,
                    },
                    "jobs": jobs,
                    "workers": {str(w): per_worker[w] for w in workers},
                    "wall_time_s": per_worker[base_workers],
                    "throughput_rois_per_s": jobs / per_worker[base_workers],
                    "oracle_per_roi_s": oracle_per_roi,
                    "speedup_vs_oracle": oracle_per_roi / kernel_per_roi,
                    "checksums": {str(w): checksums[w] for w in workers},
                    "checksum": checksums[base_workers],
                }
            )

    return {
        "schema_version": SCHEMA_VERSION,
        "repeats": repeats,
        "determinism_ok": determinism_ok,
        "records": records,
    }
