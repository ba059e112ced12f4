"""Heatmap stamping, codebook, maxima extraction, and heatmap model tests."""

import numpy as np
import pytest

from mmforecast.kinematics import PoseSequence
from mmforecast.motionmap import (
    Codebook,
    CodebookMissError,
    HeatmapModel,
    HeatmapModelConfig,
    Mode,
    build_codebook,
    codebook_from_arrays,
    codebook_size_bits,
    codebook_to_arrays,
    extract_maxima,
    heatmap_to_pgm,
    heatmap_to_tsv,
    stamp_heatmap,
    train_heatmap_model,
)
from mmforecast.nn import tensor, weighted_bce


def brute_force_maxima(values, threshold, nms_radius, max_k=None):
    """Second route: explicit loops, 'no strictly greater neighbor' test."""
    m, n = values.shape
    candidates = []
    for r in range(m):
        for c in range(n):
            v = values[r, c]
            if v < threshold:
                continue
            dominated = False
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    if dr == 0 and dc == 0:
                        continue
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < m and 0 <= cc < n and values[rr, cc] > v:
                        dominated = True
            if not dominated:
                candidates.append((r, c, v))
    candidates.sort(key=lambda t: (-t[2], t[0], t[1]))
    accepted = []
    for r, c, v in candidates:
        if all(max(abs(r - r2), abs(c - c2)) > nms_radius for r2, c2, _ in accepted):
            accepted.append((r, c, v))
            if max_k is not None and len(accepted) >= max_k:
                break
    return [Mode(cell=(r, c), confidence=float(v)) for r, c, v in accepted]


def plain_bce(probs, targets):
    eps = 1e-7
    p = np.clip(probs, eps, 1.0 - eps)
    return float(np.mean(-(targets * np.log(p) + (1.0 - targets) * np.log(1.0 - p))))


class TestStamping:
    def test_peak_exactly_one_and_decay(self):
        hm = stamp_heatmap([(4, 5)], sigma=1.5, m=16)
        assert hm.shape == (16, 16)
        assert hm[4, 5] == 1.0
        assert float(np.exp(-1.0 / (2 * 1.5**2))) == pytest.approx(hm[4, 6], rel=1e-15)
        assert hm[4, 7] < hm[4, 6] < hm[4, 5]
        assert np.all(hm > 0) and np.all(hm <= 1.0)

    def test_max_combination_keeps_both_peaks_at_one(self):
        hm = stamp_heatmap([(2, 2), (10, 12)], sigma=1.5, m=16)
        assert hm[2, 2] == 1.0
        assert hm[10, 12] == 1.0
        single_a = stamp_heatmap([(2, 2)], sigma=1.5, m=16)
        single_b = stamp_heatmap([(10, 12)], sigma=1.5, m=16)
        np.testing.assert_array_equal(hm, np.maximum(single_a, single_b))

    def test_order_invariant_and_duplicates_once(self):
        cells = [(1, 1), (5, 7), (3, 3)]
        forward = stamp_heatmap(cells, sigma=1.5, m=12)
        backward = stamp_heatmap(list(reversed(cells)), sigma=1.5, m=12)
        with_dupes = stamp_heatmap(cells + [(5, 7), (1, 1)], sigma=1.5, m=12)
        np.testing.assert_array_equal(forward, backward)
        np.testing.assert_array_equal(forward, with_dupes)

    def test_validation(self):
        with pytest.raises(ValueError, match="empty"):
            stamp_heatmap([], sigma=1.5, m=8)
        with pytest.raises(ValueError, match="sigma"):
            stamp_heatmap([(0, 0)], sigma=0.0, m=8)
        with pytest.raises(ValueError, match="outside"):
            stamp_heatmap([(8, 0)], sigma=1.5, m=8)
        with pytest.raises(ValueError, match="outside"):
            stamp_heatmap([(0, -1)], sigma=1.5, m=8)


class TestCodebook:
    def test_exact_means_and_counts(self):
        a = np.array([1.0, 2.0, 3.0])
        b = np.array([3.0, 2.0, 1.0])
        c = np.array([10.0, 10.0, 10.0])
        book = build_codebook([((2, 3), a), ((0, 0), c), ((2, 3), b)], m=8, n=3)
        np.testing.assert_array_equal(book.lookup((2, 3)), (a + b) / 2.0)
        np.testing.assert_array_equal(book.lookup((0, 0)), c)
        assert book.counts[(2, 3)] == 2
        assert book.counts[(0, 0)] == 1
        assert book.cells == [(0, 0), (2, 3)]

    def test_validation(self):
        with pytest.raises(ValueError, match="no pairs"):
            build_codebook([], m=8, n=3)
        with pytest.raises(ValueError, match="shape"):
            build_codebook([((0, 0), np.zeros(4))], m=8, n=3)
        with pytest.raises(ValueError, match="outside"):
            build_codebook([((9, 0), np.zeros(3))], m=8, n=3)

    def test_lookup_falls_back_to_nearest_populated(self):
        book = build_codebook(
            [((2, 2), np.array([1.0])), ((2, 6), np.array([2.0]))], m=16, n=1
        )
        # (2, 3) is distance 1 from (2, 2) and 3 from (2, 6)
        np.testing.assert_array_equal(book.lookup((2, 3)), [1.0])
        np.testing.assert_array_equal(book.lookup((2, 5)), [2.0])

    def test_lookup_tie_breaks_row_major(self):
        book = build_codebook(
            [((4, 2), np.array([1.0])), ((4, 6), np.array([2.0])), ((2, 4), np.array([3.0]))],
            m=16,
            n=1,
        )
        # (4, 4) is distance 2 from all three; (2, 4) wins row-major order
        np.testing.assert_array_equal(book.lookup((4, 4)), [3.0])

    def test_lookup_beyond_radius_raises(self):
        book = build_codebook([((0, 0), np.array([1.0]))], m=32, n=1)
        np.testing.assert_array_equal(book.lookup((3, 4)), [1.0])  # distance 5 exactly
        with pytest.raises(CodebookMissError, match="radius"):
            book.lookup((3, 5))  # distance sqrt(34) > 5
        with pytest.raises(CodebookMissError):
            book.lookup((20, 20))

    def test_size_formula(self):
        assert codebook_size_bits(128, 128) == 32 * 128 * 128 * 128
        assert codebook_size_bits(128, 128) == 64 * 2**20
        book = build_codebook([((0, 0), np.zeros(16))], m=64, n=16)
        assert book.size_estimate_bits() == 32 * 64 * 64 * 16

    def test_array_roundtrip(self):
        rng = np.random.default_rng(5)
        pairs = [((int(r), int(c)), rng.normal(size=4)) for r, c in rng.integers(0, 8, size=(10, 2))]
        book = build_codebook(pairs, m=8, n=4)
        arrays, meta = codebook_to_arrays(book)
        back = codebook_from_arrays(arrays, meta)
        assert back.grid_size == book.grid_size
        assert back.latent_dim == book.latent_dim
        assert back.cells == book.cells
        assert back.counts == book.counts
        for cell in book.cells:
            np.testing.assert_array_equal(back.means[cell], book.means[cell])


class TestMaxima:
    def test_matches_brute_force_on_random_heatmaps(self):
        rng = np.random.default_rng(17)
        for trial in range(30):
            values = rng.random((16, 16))
            threshold = float(rng.uniform(0.0, 0.9))
            radius = int(rng.integers(1, 5))
            got = extract_maxima(values, threshold, radius)
            want = brute_force_maxima(values, threshold, radius)
            assert got == want, f"trial {trial}"

    def test_matches_brute_force_on_stamped_heatmaps(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            k = int(rng.integers(1, 6))
            cells = [(int(r), int(c)) for r, c in rng.integers(0, 24, size=(k, 2))]
            values = stamp_heatmap(cells, sigma=1.5, m=24)
            got = extract_maxima(values, 0.2, 3)
            want = brute_force_maxima(values, 0.2, 3)
            assert got == want

    def test_constructed_plateau_tie_row_major(self):
        values = np.zeros((8, 8))
        values[3, 3] = values[3, 4] = 0.9  # adjacent equal peaks
        got = extract_maxima(values, 0.2, 1)
        assert got == [Mode(cell=(3, 3), confidence=0.9)]
        # far-apart equal peaks both survive, row-major order
        values = np.zeros((8, 8))
        values[6, 1] = values[1, 6] = 0.7
        got = extract_maxima(values, 0.2, 2)
        assert [m.cell for m in got] == [(1, 6), (6, 1)]

    def test_suppression_boundary_is_inclusive(self):
        values = np.zeros((12, 12))
        values[2, 2] = 1.0
        values[2, 5] = 0.8  # Chebyshev 3 away
        assert [m.cell for m in extract_maxima(values, 0.1, 3)] == [(2, 2)]
        assert [m.cell for m in extract_maxima(values, 0.1, 2)] == [(2, 2), (2, 5)]

    def test_pairwise_spacing_invariant(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            values = rng.random((20, 20))
            radius = int(rng.integers(1, 6))
            modes = extract_maxima(values, 0.0, radius)
            for i in range(len(modes)):
                for j in range(i + 1, len(modes)):
                    a, b = modes[i].cell, modes[j].cell
                    assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) > radius

    def test_confidence_is_heatmap_value_exactly(self):
        rng = np.random.default_rng(41)
        values = rng.random((10, 10))
        for mode in extract_maxima(values, 0.0, 2):
            assert mode.confidence == values[mode.cell]

    def test_max_k_and_empty(self):
        values = np.zeros((10, 10))
        values[1, 1], values[8, 8], values[1, 8] = 0.9, 0.8, 0.7
        assert len(extract_maxima(values, 0.5, 2, max_k=2)) == 2
        assert extract_maxima(values, 0.95, 2) == []

    def test_memory_layout_does_not_change_result(self):
        rng = np.random.default_rng(47)
        values = rng.random((15, 15))
        c_order = extract_maxima(np.ascontiguousarray(values), 0.1, 2)
        f_order = extract_maxima(np.asfortranarray(values), 0.1, 2)
        assert c_order == f_order

    def test_validation(self):
        with pytest.raises(ValueError, match="threshold"):
            extract_maxima(np.zeros((4, 4)), -0.1, 1)
        with pytest.raises(ValueError, match="nms_radius"):
            extract_maxima(np.zeros((4, 4)), 0.2, 0)


class TestWeightedBce:
    def test_equals_plain_bce_at_weight_one(self):
        rng = np.random.default_rng(53)
        probs = rng.uniform(0.01, 0.99, size=(6, 6))
        targets = stamp_heatmap([(2, 2), (4, 5)], sigma=1.0, m=6)
        ours = weighted_bce(tensor(probs), targets, 1.0).item()
        assert ours == pytest.approx(plain_bce(probs, targets), rel=1e-12)

    def test_positive_weight_scales_positive_term_only(self):
        rng = np.random.default_rng(59)
        probs = rng.uniform(0.01, 0.99, size=(6, 6))
        targets = rng.uniform(0.0, 1.0, size=(6, 6))
        w = 25.0
        expected = float(
            np.mean(-(w * targets * np.log(probs) + (1 - targets) * np.log(1 - probs)))
        )
        assert weighted_bce(tensor(probs), targets, w).item() == pytest.approx(expected, rel=1e-12)

    def test_underestimating_positives_costs_more_as_weight_grows(self):
        targets = stamp_heatmap([(3, 3)], sigma=1.0, m=8)
        probs = np.full((8, 8), 0.1)
        losses = [weighted_bce(tensor(probs), targets, w).item() for w in (1.0, 5.0, 25.0)]
        assert losses[0] < losses[1] < losses[2]


TOY = HeatmapModelConfig(joint_count=3, grid_size=8, hidden_dim=16, conv_channels=(4, 4), seed=11)


def toy_observation(frames=5, seed=42):
    rng = np.random.default_rng(seed)
    arr = rng.normal(size=(frames, 3, 3))
    arr[:, 0, :] = 0.0
    return PoseSequence(frames=arr, fps=25.0)


class TestHeatmapModel:
    def test_output_shape_and_range(self):
        hm = HeatmapModel(TOY).predict(toy_observation())
        assert hm.shape == (8, 8)
        assert np.all(hm > 0.0) and np.all(hm < 1.0)

    def test_golden_prediction(self):
        hm = HeatmapModel(TOY).predict(toy_observation())
        np.testing.assert_allclose(
            hm[3, :4],
            [0.5071204769449079, 0.49343385478252355, 0.5033356158479921, 0.49742789216704597],
            rtol=1e-12,
        )
        assert float(hm[5, 6]) == pytest.approx(0.49848286150371524, rel=1e-12)

    def test_deterministic_construction(self):
        a = HeatmapModel(TOY).predict(toy_observation())
        b = HeatmapModel(TOY).predict(toy_observation())
        np.testing.assert_array_equal(a, b)

    def test_consumes_exactly_last_three_frames(self):
        obs = toy_observation(frames=7, seed=1)
        longer = PoseSequence(
            frames=np.concatenate([np.ones((4, 3, 3)), obs.frames[-3:]], axis=0), fps=25.0
        )
        np.testing.assert_array_equal(
            HeatmapModel(TOY).predict(obs), HeatmapModel(TOY).predict(longer)
        )

    def test_validation(self):
        model = HeatmapModel(TOY)
        with pytest.raises(ValueError, match="at least 3"):
            model.predict(toy_observation(frames=2))
        bad = PoseSequence(frames=np.zeros((5, 4, 3)), fps=25.0)
        with pytest.raises(ValueError, match="joints"):
            model.predict(bad)

    def test_overfit_five_samples(self):
        model = HeatmapModel(TOY)
        rng = np.random.default_rng(7)
        tails = rng.normal(size=(5, 3, 9))
        cells = [(1, 2), (6, 5), (3, 3), (7, 1), (2, 6)]
        targets = np.stack([stamp_heatmap([c], 1.5, 8) for c in cells])
        history = train_heatmap_model(
            model, tails, targets, epochs=150, seed=3, positive_weight=25.0, lr=5e-3, batch_size=5
        )
        losses = [h.loss for h in history]
        assert all(b < a for a, b in zip(losses[:10], losses[1:11]))
        for i, cell in enumerate(cells):
            pred = model._forward(tails[i : i + 1]).value[0]
            r, c = np.unravel_index(np.argmax(pred), pred.shape)
            assert max(abs(int(r) - cell[0]), abs(int(c) - cell[1])) <= 1

    def test_training_deterministic(self):
        def run():
            model = HeatmapModel(TOY)
            rng = np.random.default_rng(7)
            tails = rng.normal(size=(5, 3, 9))
            targets = np.stack(
                [stamp_heatmap([c], 1.5, 8) for c in [(1, 2), (6, 5), (3, 3), (7, 1), (2, 6)]]
            )
            history = train_heatmap_model(
                model, tails, targets, epochs=5, seed=3, batch_size=2
            )
            return [h.loss for h in history], model.predict(toy_observation())

        losses_a, pred_a = run()
        losses_b, pred_b = run()
        assert losses_a == losses_b
        np.testing.assert_array_equal(pred_a, pred_b)

    def test_training_validation(self):
        model = HeatmapModel(TOY)
        with pytest.raises(ValueError, match="per observation"):
            train_heatmap_model(model, np.zeros((2, 3, 9)), np.zeros((3, 8, 8)), 1, 0)
        with pytest.raises(ValueError, match="empty"):
            train_heatmap_model(model, np.zeros((0, 3, 9)), np.zeros((0, 8, 8)), 1, 0)


class TestExports:
    def test_tsv_format(self):
        values = np.array([[0.0, 0.5], [1.0, 0.25]])
        text = heatmap_to_tsv(values)
        assert text == "0.000000\t0.500000\n1.000000\t0.250000\n"

    def test_pgm_format(self):
        values = np.array([[0.0, 0.5], [1.0, 0.25]])
        text = heatmap_to_pgm(values)
        lines = text.splitlines()
        assert lines[0] == "P2"
        assert lines[1] == "2 2"
        assert lines[2] == "255"
        assert lines[3] == "0 128"
        assert lines[4] == "255 64"
