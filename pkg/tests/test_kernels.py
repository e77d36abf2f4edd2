"""Kernel unit tests: spec'd values, invariants, and differential checks."""

import numpy as np
import pytest
from _util import rel_err, ulp_distance32

from sara import (
    BinGrid,
    FeatureMap,
    PoolJob,
    PooledGrid,
    ProbMap,
    RoiBox,
    batch_run,
    bilinear_sample,
    bilinear_stencil,
    make_sample_points,
    oracle_roi_align,
    oracle_sa_roi_align,
    prob_sample,
    roi_align_backward,
    roi_align_forward,
    roi_to_prob_coords,
    sa_roi_align_backward,
    sa_roi_align_forward,
)
from sara.errors import ShapeMismatchError
from sara.synth import gen_random_case


def const_map(value, channels=2, height=6, width=6):
    return FeatureMap(np.full((channels, height, width), value, np.float32))


class TestBilinearSample:
    def test_constant_interior(self):
        fm = const_map(5.0)
        for a, b in [(1.3, 2.7), (2.0, 2.0), (3.9, 1.1)]:
            assert bilinear_sample(fm, a, b, 0) == 5.0

    def test_on_grid_point(self):
        rng = np.random.Generator(np.random.PCG64(3))
        fm = FeatureMap(rng.random((1, 4, 5), dtype=np.float32))
        assert bilinear_sample(fm, 3.0, 2.0, 0) == fm.data[0, 2, 3]

    def test_hand_value(self):
        fm = FeatureMap(np.array([[[1, 2], [3, 4]]], np.float32))
        assert bilinear_sample(fm, 0.5, 0.5, 0) == 2.5

    def test_far_outside_is_zero(self):
        fm = const_map(5.0)
        assert bilinear_sample(fm, -1.5, 0.0, 0) == 0.0

    def test_channel_out_of_range(self):
        with pytest.raises(IndexError):
            bilinear_sample(const_map(1.0), 1.0, 1.0, 2)

    def test_stencil_weights_sum_to_one_inside(self):
        rng = np.random.Generator(np.random.PCG64(11))
        for _ in range(100):
            a = rng.uniform(1.0, 4.0)
            b = rng.uniform(1.0, 4.0)
            st = bilinear_stencil(a, b)
            assert all(0.0 <= w <= 1.0 for w in st.weights)
            assert sum(st.weights) == pytest.approx(1.0, abs=1e-12)


class TestSamplePoints:
    def test_single_center(self):
        pts = make_sample_points(RoiBox(0, 0, 1, 1), BinGrid(1, 1, 1))
        assert len(pts) == 1
        assert (pts[0].a, pts[0].b) == (0.5, 0.5)

    def test_2x2_grid(self):
        pts = make_sample_points(RoiBox(0, 0, 2, 2), BinGrid(2, 2, 1))
        assert [(p.a, p.b) for p in pts] == [(0.5, 0.5), (1.5, 0.5), (0.5, 1.5), (1.5, 1.5)]

    def test_subsamples(self):
        pts = make_sample_points(RoiBox(0, 0, 1, 1), BinGrid(1, 1, 2))
        assert [(p.a, p.b) for p in pts] == [
            (0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75),
        ]

    def test_points_inside_their_bin(self):
        roi = RoiBox(1.2, -0.7, 9.4, 6.3)
        grid = BinGrid(3, 5, 4)
        bw = roi.width / grid.bin_cols
        bh = roi.height / grid.bin_rows
        for p in make_sample_points(roi, grid):
            assert roi.x1 + p.bin_col * bw <= p.a <= roi.x1 + (p.bin_col + 1) * bw
            assert roi.y1 + p.bin_row * bh <= p.b <= roi.y1 + (p.bin_row + 1) * bh


class TestRoiAlignForward:
    def test_constant(self):
        out = roi_align_forward(const_map(5.0), RoiBox(1, 1, 5, 5), BinGrid(3, 3, 2))
        assert np.all(out.data == 5.0)

    def test_single_bin_equals_center_sample(self):
        case = gen_random_case(5, channels=2, height=8, width=8)
        grid = BinGrid(1, 1, 1)
        out = roi_align_forward(case.feature, case.roi, grid)
        cx = case.roi.x1 + (case.roi.x2 - case.roi.x1) / 1 * 0.5
        cy = case.roi.y1 + (case.roi.y2 - case.roi.y1) / 1 * 0.5
        for c in range(2):
            assert out.data[c, 0, 0] == bilinear_sample(case.feature, cx, cy, c)

    def test_matches_oracle(self):
        case = gen_random_case(42, channels=8, height=16, width=16, grid=(7, 7, 2))
        roi = RoiBox(2.3, 1.7, 9.1, 12.4)
        k = roi_align_forward(case.feature, roi, case.grid)
        o = oracle_roi_align(case.feature, roi, case.grid)
        assert rel_err(k.data, o.data) <= 1e-5

    def test_matches_naive_sample_loop(self):
        # the vectorized kernel must agree with make_sample_points + bilinear_sample
        case = gen_random_case(17, channels=3, height=9, width=7, grid=(3, 2, 2))
        out = roi_align_forward(case.feature, case.roi, case.grid)
        n = case.grid.samples_per_bin
        for c in range(3):
            acc = np.zeros((3, 2), np.float32)
            for p in make_sample_points(case.roi, case.grid):
                acc[p.bin_row, p.bin_col] += np.float32(
                    bilinear_sample(case.feature, p.a, p.b, c)
                )
            np.testing.assert_allclose(out.data[c], acc / np.float32(n), rtol=2e-7)


class TestRoiAlignBackward:
    def test_zero_grad(self):
        grid = BinGrid(3, 3, 2)
        g = PooledGrid(np.zeros((2, 3, 3), np.float32), grid)
        gb = roi_align_backward(g, RoiBox(0, 0, 4, 4), grid, (2, 6, 6))
        assert np.all(gb.grad_feature == 0)

    def test_weight_conservation(self):
        # interior samples distribute total weight 1/N each; ones gradient
        # sums to channels * bins
        grid = BinGrid(3, 4, 2)
        roi = RoiBox(1.2, 1.4, 6.7, 5.3)
        g = PooledGrid(np.ones((2, 3, 4), np.float32), grid)
        gb = roi_align_backward(g, roi, grid, (2, 8, 8))
        assert float(gb.grad_feature.sum()) == pytest.approx(2 * 3 * 4, rel=1e-5)

    def test_shape_mismatch(self):
        grid = BinGrid(3, 3, 2)
        g = PooledGrid(np.zeros((2, 3, 3), np.float32), grid)
        with pytest.raises(ShapeMismatchError):
            roi_align_backward(g, RoiBox(0, 0, 4, 4), BinGrid(2, 3, 2), (2, 6, 6))
        with pytest.raises(ShapeMismatchError):
            roi_align_backward(g, RoiBox(0, 0, 4, 4), grid, (3, 6, 6))


class TestProbCoords:
    def test_corners_and_center(self):
        roi = RoiBox(2.0, 3.0, 10.0, 9.0)
        hp, wp = 14, 14
        assert roi_to_prob_coords(roi.x1, roi.y1, roi, (hp, wp)) == (-0.5, -0.5)
        cx = (roi.x1 + roi.x2) / 2
        cy = (roi.y1 + roi.y2) / 2
        c, d = roi_to_prob_coords(cx, cy, roi, (hp, wp))
        assert (c, d) == ((wp - 1) / 2, (hp - 1) / 2)
        assert roi_to_prob_coords(roi.x2, roi.y2, roi, (hp, wp)) == (wp - 0.5, hp - 0.5)


class TestProbSample:
    def test_constant_one(self):
        pm = ProbMap(np.ones((4, 4), np.float32))
        # clamped sampling reads exactly 1.0 even outside the nominal range
        for c, d in [(1.5, 2.5), (0.0, 0.0), (-0.4, 3.2), (75.0, -75.0)]:
            assert prob_sample(pm, c, d) == 1.0

    def test_grid_node(self):
        rng = np.random.Generator(np.random.PCG64(4))
        pm = ProbMap(rng.random((3, 5), dtype=np.float32))
        assert prob_sample(pm, 2.0, 1.0) == pm.data[1, 2]

    def test_checkerboard_center(self):
        pm = ProbMap(np.array([[0, 1], [1, 0]], np.float32))
        assert prob_sample(pm, 0.5, 0.5) == 0.5


class TestShapeAwareForward:
    def test_reduction_bit_exact(self):
        for seed in range(50):
            case = gen_random_case(seed, channels=3, height=10, width=12, grid=(3, 3, 2))
            ones = ProbMap(np.ones((5, 7), np.float32))
            plain = roi_align_forward(case.feature, case.roi, case.grid)
            shaped = sa_roi_align_forward(case.feature, case.roi, ones, case.grid)
            assert plain.data.tobytes() == shaped.data.tobytes()

    def test_annihilation(self):
        case = gen_random_case(9, channels=2, height=8, width=8)
        zeros = ProbMap(np.zeros((6, 6), np.float32))
        out = sa_roi_align_forward(case.feature, case.roi, zeros, case.grid)
        assert np.all(out.data == 0.0)

    def test_matches_oracle(self):
        case = gen_random_case(77, channels=4, height=12, width=10, grid=(5, 4, 2), prob_dims=(9, 8))
        k = sa_roi_align_forward(case.feature, case.roi, case.prob, case.grid)
        o = oracle_sa_roi_align(case.feature, case.roi, case.prob, case.grid)
        assert rel_err(k.data, o.data) <= 1e-5


class TestShapeAwareBackward:
    def test_zero_feature_zero_grad_prob(self):
        grid = BinGrid(2, 2, 2)
        fm = const_map(0.0, channels=2, height=6, width=6)
        pm = ProbMap(np.full((4, 4), 0.5, np.float32))
        g = PooledGrid(np.ones((2, 2, 2), np.float32), grid)
        gb = sa_roi_align_backward(g, fm, RoiBox(0.5, 0.5, 5.0, 5.0), pm, grid)
        assert np.all(gb.grad_prob == 0)

    def test_zero_prob_zero_grad_feature(self):
        case = gen_random_case(13, channels=2, height=8, width=8, grid=(2, 2, 2))
        pm = ProbMap(np.zeros((4, 4), np.float32))
        g = PooledGrid(np.ones((2, 2, 2), np.float32), case.grid)
        gb = sa_roi_align_backward(g, case.feature, case.roi, pm, case.grid)
        assert np.all(gb.grad_feature == 0)
        assert np.any(gb.grad_prob != 0)

    def test_grad_out_shape_checked(self):
        case = gen_random_case(14, channels=2, height=8, width=8, grid=(2, 2, 2), prob_dims=(4, 4))
        bad = PooledGrid(np.ones((2, 3, 2), np.float32))
        with pytest.raises(ShapeMismatchError):
            sa_roi_align_backward(bad, case.feature, case.roi, case.prob, case.grid)


class TestAlgebraicProperties:
    @pytest.mark.parametrize("seed", range(25))
    def test_bilinearity_pow2_exact(self, seed):
        # power-of-two scalars scale losslessly, so the identity is bit-sharp
        rng = np.random.Generator(np.random.PCG64(seed))
        case = gen_random_case(seed, channels=2, height=9, width=9, grid=(3, 3, 2), prob_dims=(5, 5))
        alpha = float(2.0 ** rng.integers(-3, 4))
        beta = float(2.0 ** rng.integers(-3, 1))  # keep beta*P inside [0, 1]
        scaled_f = FeatureMap(case.feature.data * np.float32(alpha))
        scaled_p = ProbMap(case.prob.data * np.float32(beta))
        lhs = sa_roi_align_forward(scaled_f, case.roi, scaled_p, case.grid)
        rhs = sa_roi_align_forward(case.feature, case.roi, case.prob, case.grid)
        expect = rhs.data * np.float32(alpha) * np.float32(beta)
        assert ulp_distance32(lhs.data, expect) <= 4

    def test_bilinearity_general_scalars(self):
        case = gen_random_case(3, channels=2, height=9, width=9, grid=(3, 3, 2), prob_dims=(5, 5))
        alpha, beta = 1.7, 0.6
        scaled_f = FeatureMap(case.feature.data * np.float32(alpha))
        scaled_p = ProbMap(case.prob.data * np.float32(beta))
        lhs = sa_roi_align_forward(scaled_f, case.roi, scaled_p, case.grid)
        rhs = sa_roi_align_forward(case.feature, case.roi, case.prob, case.grid)
        np.testing.assert_allclose(lhs.data, alpha * beta * rhs.data, rtol=1e-5)

    @pytest.mark.parametrize("seed", range(10))
    def test_translation_equivariance(self, seed):
        rng = np.random.Generator(np.random.PCG64(seed + 100))
        base = rng.random((2, 8, 8), dtype=np.float32)
        shift = int(rng.integers(1, 4))
        grown = np.zeros((2, 8 + shift, 8 + shift), np.float32)
        grown[:, shift:, shift:] = base
        roi = RoiBox(1.3, 1.1, 6.2, 6.6)
        moved = RoiBox(roi.x1 + shift, roi.y1 + shift, roi.x2 + shift, roi.y2 + shift)
        grid = BinGrid(3, 3, 2)
        out1 = roi_align_forward(FeatureMap(base), roi, grid)
        out2 = roi_align_forward(FeatureMap(grown), moved, grid)
        assert ulp_distance32(out1.data, out2.data) <= 4


class TestBatchRun:
    def _jobs(self, count, with_prob=False):
        jobs = []
        for seed in range(count):
            case = gen_random_case(
                seed, channels=2, height=8, width=8, grid=(3, 3, 2),
                prob_dims=(5, 5) if with_prob else None,
            )
            jobs.append(PoolJob(case.feature, case.roi, case.grid, case.prob))
        return jobs

    def test_single_job_matches_direct(self):
        (job,) = self._jobs(1)
        res = batch_run([job])[0]
        direct = roi_align_forward(job.feature, job.roi, job.grid)
        assert res.ok
        assert res.output.data.tobytes() == direct.data.tobytes()

    def test_worker_counts_bit_identical(self):
        jobs = self._jobs(60, with_prob=True)
        seq = batch_run(jobs, mode="forward+backward", workers=1)
        par = batch_run(jobs, mode="forward+backward", workers=8)
        for a, b in zip(seq, par):
            assert a.output.data.tobytes() == b.output.data.tobytes()
            assert a.grads.grad_feature.tobytes() == b.grads.grad_feature.tobytes()
            assert a.grads.grad_prob.tobytes() == b.grads.grad_prob.tobytes()

    def test_bad_job_isolated(self):
        jobs = self._jobs(3)
        bad = PoolJob(jobs[1].feature, jobs[1].roi, jobs[1].grid,
                      grad_out=PooledGrid(np.ones((2, 9, 9), np.float32)))
        results = batch_run([jobs[0], bad, jobs[2]], mode="forward+backward")
        assert results[0].ok and results[2].ok
        assert not results[1].ok
        assert "ShapeMismatch" in results[1].error

    def test_env_workers_override(self, monkeypatch):
        monkeypatch.setenv("SARA_WORKERS", "4")
        jobs = self._jobs(4)
        assert [r.ok for r in batch_run(jobs)] == [True] * 4

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            batch_run([], mode="sideways")
