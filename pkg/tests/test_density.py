import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import gaussian_kde

from entropic_kde.density import (
    DensityGrid,
    GridSpec,
    KernelModel,
    auto_grid,
    estimate_kde,
    median_grid,
    scott_bandwidth,
    shared_grid,
)
from entropic_kde.errors import InsufficientDataError, ParameterError, ValidationError


def cell_centers(spec):
    xx, yy = np.meshgrid(spec.x_centers(), spec.y_centers(), indexing="ij")
    return np.vstack([xx.ravel(), yy.ravel()])


class TestBandwidth:
    @pytest.mark.parametrize("n,expected", [(64, 0.5), (1_000_000, 0.1)])
    def test_examples(self, n, expected):
        assert scott_bandwidth(n, 2) == pytest.approx(expected, rel=1e-12)

    def test_decreasing_in_n(self):
        h = [scott_bandwidth(n) for n in range(2, 500)]
        assert all(b < a for a, b in zip(h, h[1:]))

    def test_needs_two_points(self):
        with pytest.raises(ParameterError):
            scott_bandwidth(1)


class TestEstimate:
    @pytest.mark.parametrize("n", [3, 17, 400])
    def test_matches_scipy_at_cell_centers(self, rng, n):
        pts = rng.standard_normal((n, 2)) @ np.array([[1.0, 0.3], [0.0, 0.5]])
        spec = auto_grid(pts, 24, 20)
        ours = KernelModel.fit(pts).evaluate(spec)
        oracle = gaussian_kde(pts.T)(cell_centers(spec)).reshape(spec.shape)
        np.testing.assert_allclose(ours, oracle, rtol=1e-9, atol=1e-15)

    def test_grid_integrates_to_one(self, rng):
        g = estimate_kde(rng.standard_normal((100, 2)))
        assert g.values.sum() * g.spec.cell_area == pytest.approx(1.0, abs=1e-12)

    def test_mode_of_tight_cluster(self, rng):
        jitter = 1e-3 * rng.standard_normal((100, 2))
        pts = np.vstack([jitter, -jitter])
        g = estimate_kde(pts, nx=33, ny=33)
        i, j = np.unravel_index(np.argmax(g.values), g.values.shape)
        s = g.spec
        assert s.x0 + i * s.dx <= 0 <= s.x0 + (i + 1) * s.dx
        assert s.y0 + j * s.dy <= 0 <= s.y0 + (j + 1) * s.dy

    def test_density_at_origin_of_standard_gaussian(self, rng):
        g = estimate_kde(rng.standard_normal((5000, 2)))
        i, j = g.spec.cell_of(0.0, 0.0)
        assert g.values[i, j] == pytest.approx(1 / (2 * math.pi), rel=0.15)

    @pytest.mark.parametrize("pts", [
        np.full((50, 2), 3.0),
        np.column_stack([np.arange(50.0), 2 * np.arange(50.0)]),
    ])
    def test_degenerate_clouds_are_finite(self, pts):
        g = estimate_kde(pts, nx=16, ny=16)
        assert np.all(np.isfinite(g.values))
        assert g.integral() == pytest.approx(1.0, abs=1e-9)

    def test_too_few_points(self):
        with pytest.raises(InsufficientDataError):
            estimate_kde(np.zeros((2, 2)))

    def test_permutation_invariance(self, rng):
        pts = rng.standard_normal((60, 2))
        spec = auto_grid(pts, 32, 32)
        a = estimate_kde(pts, spec).values
        b = estimate_kde(pts[rng.permutation(60)], spec).values
        np.testing.assert_allclose(a, b, rtol=1e-12)

    @given(st.floats(-50, 50), st.integers(0, 2 ** 32 - 1))
    def test_translation_equivariance(self, c, seed):
        pts = np.random.default_rng(seed).standard_normal((40, 2))
        spec = auto_grid(pts, 16, 16)
        a = estimate_kde(pts, spec).values
        b = estimate_kde(pts + c, spec.shifted(c, c)).values
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10 * a.max())

    def test_far_off_grid_falls_back_to_histogram(self, rng):
        pts = rng.standard_normal((30, 2))
        spec = GridSpec(100.0, 100.0, 0.1, 0.1, 8, 8)
        g = estimate_kde(pts, spec)
        assert g.integral() == pytest.approx(1.0)


class TestGrids:
    def test_auto_grid_covers_expanded_box(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.3, 0.6]])
        e = KernelModel.fit(pts).expansion
        spec = auto_grid(pts)
        assert spec.shape == (128, 128) and spec.nx * spec.ny == 16384
        assert spec.x0 == pytest.approx(-e) and spec.y0 == pytest.approx(-e)
        assert spec.x0 + spec.nx * spec.dx == pytest.approx(1 + e)

    def test_expansion_shrinks_with_n(self, rng):
        sizes = [10, 100, 1000]
        expansions = []
        for n in sizes:
            pts = rng.standard_normal((n, 2))
            pts = (pts - pts.mean(0)) @ np.linalg.inv(np.linalg.cholesky(np.cov(pts.T)).T)
            expansions.append(KernelModel.fit(pts).expansion)
        assert expansions[0] > expansions[1] > expansions[2]

    def test_zero_extent_axis_gets_unit_width(self):
        pts = np.column_stack([np.zeros(5), np.zeros(5)])
        spec = auto_grid(pts, 4, 4)
        assert spec.dx * spec.nx == pytest.approx(1.0)
        assert spec.x0 == pytest.approx(-0.5)

    def test_gridspec_validation(self):
        with pytest.raises(ParameterError):
            GridSpec(0, 0, 0.0, 1.0, 4, 4)
        with pytest.raises(ParameterError):
            GridSpec(0, 0, 1.0, 1.0, 1, 4)

    def test_density_grid_validation(self):
        spec = GridSpec(0, 0, 1, 1, 2, 2)
        with pytest.raises(ValidationError):
            DensityGrid(spec, [[1, -1], [0, 0]])
        with pytest.raises(ValidationError):
            DensityGrid(spec, np.ones((3, 2)))

    @pytest.mark.parametrize("snap", [None, 1, 8])
    def test_shared_grid_covers_every_cloud(self, rng, snap):
        models = [KernelModel.fit(rng.standard_normal((50, 2)) * s + s) for s in (1, 3, 0.5)]
        spec = shared_grid(models, 32, 32, snap)
        for m in models:
            lo = m.points.min(0) - m.expansion
            hi = m.points.max(0) + m.expansion
            assert spec.x0 <= lo[0] + 1e-12 and spec.y0 <= lo[1] + 1e-12
            assert spec.x0 + 32 * spec.dx >= hi[0] - 1e-12
            assert spec.y0 + 32 * spec.dy >= hi[1] - 1e-12

    def test_snapped_grid_is_stable_under_small_changes(self, rng):
        base = rng.standard_normal((200, 2))
        a = shared_grid([KernelModel.fit(base)], 32, 32, snap=8)
        b = shared_grid([KernelModel.fit(base * 1.0001)], 32, 32, snap=8)
        assert a == b

    def test_to_csv(self, tmp_path, rng):
        g = estimate_kde(rng.standard_normal((30, 2)), nx=5, ny=4)
        g.to_csv(tmp_path / "g.csv")
        back = np.loadtxt(tmp_path / "g.csv", delimiter=",")
        assert np.array_equal(back, g.values)


def random_grids(rng, count, spec):
    return [DensityGrid(spec, rng.random(spec.shape)) for _ in range(count)]


class TestMedian:
    spec = GridSpec(0.0, 0.0, 0.5, 0.25, 6, 5)

    def test_identical_inputs(self, rng):
        g = random_grids(rng, 1, self.spec)[0].normalized()
        np.testing.assert_allclose(median_grid([g, g, g]).values, g.values, rtol=1e-14)

    def test_outlier_is_ignored(self, rng):
        g = random_grids(rng, 1, self.spec)[0]
        outlier = DensityGrid(self.spec, g.values + 100.0)
        np.testing.assert_allclose(median_grid([g, outlier, g]).values, g.normalized().values,
                                   rtol=1e-14)

    @pytest.mark.parametrize("count", [4, 5])
    def test_matches_sorting_oracle(self, rng, count):
        grids = random_grids(rng, count, self.spec)
        oracle = np.empty(self.spec.shape)
        for i in range(self.spec.nx):
            for j in range(self.spec.ny):
                cell = sorted(g.values[i, j] for g in grids)
                mid = len(cell) // 2
                oracle[i, j] = cell[mid] if len(cell) % 2 else 0.5 * (cell[mid - 1] + cell[mid])
        out = median_grid(grids)
        np.testing.assert_allclose(out.values, oracle / (oracle.sum() * self.spec.cell_area),
                                   rtol=1e-13)

    def test_idempotent_and_permutation_invariant(self, rng):
        grids = random_grids(rng, 5, self.spec)
        m = median_grid(grids)
        np.testing.assert_allclose(median_grid([m]).values, m.values, rtol=1e-14)
        shuffled = [grids[k] for k in rng.permutation(5)]
        assert np.array_equal(median_grid(shuffled).values, m.values)

    def test_errors(self):
        with pytest.raises(ParameterError):
            median_grid([])
        a = DensityGrid(self.spec, np.ones(self.spec.shape))
        b = DensityGrid(self.spec.shifted(1, 0), np.ones(self.spec.shape))
        with pytest.raises(ParameterError):
            median_grid([a, b])


def test_normalization_on_random_clouds(rng):
    for _ in range(50):
        n = int(rng.integers(3, 300))
        pts = rng.standard_normal((n, 2)) * rng.uniform(1e-3, 1e3, 2) + rng.uniform(-10, 10, 2)
        g = estimate_kde(pts, nx=32, ny=32)
        assert abs(g.integral() - 1) <= 1e-6
