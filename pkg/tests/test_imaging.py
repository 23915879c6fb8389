"""Recurrence matrix, GASF, and MTF transforms."""

import numpy as np
import pytest

from faultwave.imaging import (
    ImageTensor,
    RecurrenceSpec,
    gasf,
    mtf,
    read_image_dataset,
    recurrence_matrix,
    transform,
    write_image_csv,
    write_image_dataset,
)

PAPER_SERIES = [0.15, 0.08, -0.01]
PAPER_MATRIX = np.array([
    [0.0, 0.07, 0.16],
    [0.07, 0.0, 0.09],
    [0.16, 0.09, 0.0],
])


class TestRecurrenceMatrix:
    def test_three_point_worked_example(self):
        img = recurrence_matrix(PAPER_SERIES)
        assert img.kind == "rp"
        # exact up to one ulp of the decimal literals
        assert np.max(np.abs(img.data - PAPER_MATRIX)) <= 1e-15

    def test_constant_series_all_zero(self):
        img = recurrence_matrix(np.full(8, 3.3))
        np.testing.assert_array_equal(img.data, np.zeros((8, 8)))

    def test_embedded_against_bruteforce(self, rng):
        series = rng.normal(size=12)
        spec = RecurrenceSpec(embedding_dim=2, delay=1)
        img = recurrence_matrix(series, spec)
        m = 12 - 1
        assert img.data.shape == (m, m)
        for p in range(m):
            for q in range(m):
                vp = np.array([series[p], series[p + 1]])
                vq = np.array([series[q], series[q + 1]])
                assert img.data[p, q] == pytest.approx(np.linalg.norm(vp - vq), abs=1e-12)

    def test_embedding_with_delay(self, rng):
        series = rng.normal(size=10)
        spec = RecurrenceSpec(embedding_dim=3, delay=2)
        img = recurrence_matrix(series, spec)
        m = 10 - 2 * 2
        assert img.data.shape == (m, m)
        vp = series[[0, 2, 4]]
        vq = series[[3, 5, 7]]
        assert img.data[0, 3] == pytest.approx(np.linalg.norm(vp - vq))

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            recurrence_matrix([1.0, 2.0], RecurrenceSpec(embedding_dim=2, delay=2))

    def test_symmetry_zero_diag_nonneg(self, rng):
        for _ in range(10):
            img = recurrence_matrix(rng.normal(size=15))
            np.testing.assert_array_equal(img.data, img.data.T)
            np.testing.assert_array_equal(np.diag(img.data), np.zeros(15))
            assert (img.data >= 0).all()

    def test_triangle_inequality(self, rng):
        for _ in range(5):
            d = recurrence_matrix(rng.normal(size=12)).data
            n = d.shape[0]
            for p in range(n):
                for q in range(n):
                    for s in range(n):
                        assert d[p, q] <= d[p, s] + d[s, q] + 1e-12

    def test_shift_invariance(self, rng):
        series = rng.normal(size=15)
        a = recurrence_matrix(series).data
        b = recurrence_matrix(series + 7.5).data
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestGasf:
    def test_extreme_value_diagonal(self):
        # the max rescales to 1, angle 0, so its diagonal entry is cos(0) = 1
        img = gasf([0.0, 0.5, 1.0])
        assert img.data[2, 2] == pytest.approx(1.0, abs=1e-12)

    def test_diagonal_identity(self, rng):
        for _ in range(10):
            series = rng.normal(size=15)
            img = gasf(series)
            lo, hi = series.min(), series.max()
            scaled = 2 * (series - lo) / (hi - lo) - 1
            np.testing.assert_allclose(np.diag(img.data), 2 * scaled**2 - 1, atol=1e-9)

    def test_symmetric(self, rng):
        img = gasf(rng.normal(size=20))
        assert np.max(np.abs(img.data - img.data.T)) < 1e-12

    def test_entries_bounded(self, rng):
        img = gasf(rng.normal(size=30))
        assert (img.data >= -1 - 1e-12).all() and (img.data <= 1 + 1e-12).all()

    def test_constant_series_maps_to_zero_angle_matrix(self):
        # rescale of a constant series is all zeros, angles pi/2, entries cos(pi) .. = -1
        img = gasf(np.full(5, 2.0))
        np.testing.assert_allclose(img.data, -np.ones((5, 5)), atol=1e-12)

    def test_reversal_symmetry(self, rng):
        series = rng.normal(size=11)
        a = gasf(series).data
        b = gasf(series[::-1]).data
        np.testing.assert_allclose(b, a[::-1, ::-1], atol=1e-12)


def brute_force_mtf(series, n_bins):
    """Independent oracle: dict-counted quantile-bin transitions."""
    series = np.asarray(series, dtype=float)
    edges = [np.quantile(series, i / n_bins) for i in range(1, n_bins)]
    def bin_of(v):
        # a sample equal to an edge belongs to the upper bin
        b = 0
        for e in edges:
            if v >= e:
                b += 1
        return b
    bins = [bin_of(v) for v in series]
    used = sorted(set(bins))
    remap = {b: i for i, b in enumerate(used)}
    bins = [remap[b] for b in bins]
    k = len(used)
    counts = {}
    for a, b in zip(bins[:-1], bins[1:]):
        counts[(a, b)] = counts.get((a, b), 0) + 1
    w = np.zeros((k, k))
    for (a, b), c in counts.items():
        w[a, b] = c
    for row in range(k):
        tot = w[row].sum()
        w[row] = w[row] / tot if tot > 0 else 1.0 / k
    out = np.zeros((len(series), len(series)))
    for i, bi in enumerate(bins):
        for j, bj in enumerate(bins):
            out[i, j] = w[bi, bj]
    return out


class TestMtf:
    def test_increasing_series_two_bins(self):
        series = np.array([1.0, 2.0, 3.0, 4.0])
        img = mtf(series, n_bins=2)
        np.testing.assert_allclose(img.data, brute_force_mtf(series, 2), atol=1e-12)
        # low bin: one self transition, one up transition
        assert img.data[0, 0] == pytest.approx(0.5)
        assert img.data[0, 2] == pytest.approx(0.5)
        assert img.data[2, 2] == pytest.approx(1.0)

    def test_constant_series_all_ones(self):
        img = mtf(np.full(6, 1.5), n_bins=4)
        np.testing.assert_array_equal(img.data, np.ones((6, 6)))

    def test_entries_are_probabilities(self, rng):
        for _ in range(10):
            img = mtf(rng.normal(size=15), n_bins=4)
            assert (img.data >= 0).all() and (img.data <= 1).all()

    def test_matches_bruteforce_random(self, rng):
        for _ in range(25):
            series = rng.normal(size=15)
            img = mtf(series, n_bins=4)
            np.testing.assert_allclose(img.data, brute_force_mtf(series, 4), atol=1e-12)

    def test_block_structure(self, rng):
        # entries depend only on the bin pair
        series = rng.normal(size=20)
        img = mtf(series, n_bins=3)
        vals = {}
        edges = np.quantile(series, [1 / 3, 2 / 3])
        bins = np.searchsorted(edges, series, side="right")
        for i in range(20):
            for j in range(20):
                key = (bins[i], bins[j])
                vals.setdefault(key, img.data[i, j])
                assert img.data[i, j] == vals[key]

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            mtf([1.0], n_bins=2)


class TestIO:
    def test_csv_dump(self, tmp_path, rng):
        img = recurrence_matrix(rng.normal(size=6))
        path = tmp_path / "img.csv"
        write_image_csv(path, img)
        back = np.loadtxt(path, delimiter=",")
        np.testing.assert_allclose(back, img.data, atol=0)

    def test_binary_round_trip(self, tmp_path, rng):
        images = [transform(rng.normal(size=15), "gasf") for _ in range(7)]
        path = tmp_path / "set.bin"
        write_image_dataset(path, images)
        back = read_image_dataset(path)
        assert len(back) == 7
        assert back[0].kind == "gasf"
        for a, b in zip(images, back):
            np.testing.assert_array_equal(a.data, b.data)

    def test_mixed_kinds_rejected(self, tmp_path, rng):
        imgs = [transform(rng.normal(size=8), "rp"), transform(rng.normal(size=8), "mtf")]
        with pytest.raises(ValueError):
            write_image_dataset(tmp_path / "x.bin", imgs)

    def test_invariants_of_tensor_type(self):
        with pytest.raises(ValueError):
            ImageTensor(data=np.zeros((3, 4)), kind="rp", source_len=3)
        with pytest.raises(ValueError):
            ImageTensor(data=np.zeros((3, 3)), kind="nope", source_len=3)
