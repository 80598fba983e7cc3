import itertools
from math import comb, floor, log2

import numpy as np
import pytest

from gqsm.codec import (
    ConstellationSpec,
    GqsmConfig,
    bits_per_frame,
    decode_bits,
    default_pilots,
    encode_frame,
    gray_constellation,
    rank_combination,
    unrank_combination,
)


class TestCombinadic:
    def test_first_subset(self):
        assert unrank_combination(0, 4, 2).tolist() == [1, 2]

    def test_rank5_is_last_pair(self):
        # oracle: enumerate all C(4,2)=6 subsets lexicographically
        subsets = list(itertools.combinations(range(1, 5), 2))
        assert unrank_combination(5, 4, 2).tolist() == list(subsets[5]) == [3, 4]

    def test_singletons_in_order(self):
        assert unrank_combination(3, 4, 1).tolist() == [4]

    def test_matches_itertools_enumeration(self):
        for n, p in [(5, 2), (6, 3), (7, 1), (10, 4)]:
            expected = list(itertools.combinations(range(1, n + 1), p))
            for r, subset in enumerate(expected):
                assert unrank_combination(r, n, p).tolist() == list(subset)
                assert rank_combination(subset, n) == r

    def test_round_trip_full_range(self):
        for n, p in [(16, 3), (9, 2)]:
            for r in range(comb(n, p)):
                assert rank_combination(unrank_combination(r, n, p), n) == r

    def test_rank_out_of_range(self):
        with pytest.raises(ValueError):
            unrank_combination(6, 4, 2)
        with pytest.raises(ValueError):
            unrank_combination(-1, 4, 2)

    def test_rank_rejects_unsorted_and_duplicates(self):
        with pytest.raises(ValueError):
            rank_combination([2, 1], 4)
        with pytest.raises(ValueError):
            rank_combination([2, 2], 4)
        with pytest.raises(ValueError):
            rank_combination([0, 1], 4)


class TestBitBudget:
    def test_reference_points(self):
        assert bits_per_frame(GqsmConfig(16, 16, 2, 4)) == (6, 4, 16)
        assert bits_per_frame(GqsmConfig(2, 2, 1, 2)) == (1, 1, 3)
        assert bits_per_frame(GqsmConfig(32, 32, 4, 4)) == (15, 8, 38)

    def test_grid_against_direct_formula(self):
        for n_tx in range(2, 33):
            for p in range(1, 5):
                for m in (2, 4, 16):
                    if p > n_tx or comb(n_tx, p) < 2:
                        continue
                    cfg = GqsmConfig(n_tx, n_tx, p, m)
                    b_sp = floor(log2(comb(n_tx, p)))
                    b_dg = p * int(log2(m))
                    assert bits_per_frame(cfg) == (b_sp, b_dg, 2 * b_sp + b_dg)

    def test_rejects_no_spatial_information(self):
        with pytest.raises(ValueError):
            GqsmConfig(n_tx=2, n_rx=2, p=2, m=4)  # C(2,2) = 1


class TestConstellation:
    @pytest.mark.parametrize("m", [2, 4, 16])
    def test_unit_energy(self, m):
        spec = gray_constellation(m)
        assert abs(np.mean(np.abs(spec.points) ** 2) - 1.0) <= 1e-12

    @pytest.mark.parametrize("m", [2, 4, 16])
    def test_labels_bijection(self, m):
        spec = gray_constellation(m)
        assert sorted(spec.labels.tolist()) == list(range(m))

    @pytest.mark.parametrize("m", [2, 4, 16])
    def test_gray_adjacency(self, m):
        # nearest geometric neighbours differ in exactly one label bit
        spec = gray_constellation(m)
        pts = spec.points
        dists = np.abs(pts[:, None] - pts[None, :])
        np.fill_diagonal(dists, np.inf)
        step = dists.min()
        for a, b in zip(*np.where(dists < step * 1.001)):
            diff = int(spec.labels[a]) ^ int(spec.labels[b])
            assert bin(diff).count("1") == 1

    def test_rejects_bad_energy(self):
        with pytest.raises(ValueError):
            ConstellationSpec(points=np.array([2.0, -2.0]), labels=np.array([0, 1]))

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            ConstellationSpec(points=np.array([1.0, -1.0]), labels=np.array([0, 2]))


class TestEncodeFrame:
    def test_two_antenna_single_symbol(self):
        cfg = GqsmConfig(n_tx=2, n_rx=2, p=1, m=4)
        frame = encode_frame([0, 1], [1 + 1j], cfg)
        assert frame.k_r.tolist() == [1]
        assert frame.k_i.tolist() == [2]
        np.testing.assert_allclose(frame.x, [1.0, 1j])

    def test_rank_placement_four_antennas(self):
        # rank_r=1 -> {1,3}, rank_i=2 -> {1,4} by combinadic enumeration,
        # pilots both 1+j place x = [1+j, 0, 1, j]
        cfg = GqsmConfig(n_tx=4, n_rx=4, p=2, m=4)
        assert cfg.b_sp == 2
        frame = encode_frame([0, 1, 1, 0], [1 + 1j, 1 + 1j], cfg)
        assert frame.rank_r == 1 and frame.rank_i == 2
        assert frame.k_r.tolist() == [1, 3]
        assert frame.k_i.tolist() == [1, 4]
        np.testing.assert_allclose(frame.x, [1 + 1j, 0, 1, 1j])

    def test_all_zero_bits_select_first_subset(self):
        cfg = GqsmConfig(n_tx=8, n_rx=8, p=3, m=4)
        frame = encode_frame(np.zeros(2 * cfg.b_sp, dtype=int), default_pilots(cfg), cfg)
        assert frame.k_r.tolist() == [1, 2, 3]
        assert frame.k_i.tolist() == [1, 2, 3]

    def test_bit_length_mismatch(self):
        cfg = GqsmConfig(n_tx=4, n_rx=4, p=1, m=4)
        with pytest.raises(ValueError):
            encode_frame([0, 1, 1], default_pilots(cfg), cfg)

    def test_x_rebuilds_from_indices_and_pilots(self):
        cfg = GqsmConfig(n_tx=16, n_rx=16, p=3, m=4)
        rng = np.random.default_rng(7)
        for _ in range(50):
            bits = rng.integers(0, 2, size=2 * cfg.b_sp)
            pilots = cfg.constellation.points[rng.integers(0, cfg.m, size=cfg.p)]
            frame = encode_frame(bits, pilots, cfg)
            x = np.zeros(cfg.n_tx, dtype=np.complex128)
            x[frame.k_r - 1] += frame.pilots_r
            x[frame.k_i - 1] += 1j * frame.pilots_i
            np.testing.assert_allclose(frame.x, x, atol=0)

    def test_sparsity(self):
        cfg = GqsmConfig(n_tx=16, n_rx=16, p=2, m=4)
        rng = np.random.default_rng(3)
        for _ in range(100):
            bits = rng.integers(0, 2, size=2 * cfg.b_sp)
            frame = encode_frame(bits, default_pilots(cfg), cfg)
            assert np.count_nonzero(frame.x.real) <= cfg.p
            assert np.count_nonzero(frame.x.imag) <= cfg.p

    def test_only_prefix_ranks_emitted(self):
        cfg = GqsmConfig(n_tx=5, n_rx=5, p=2, m=4)  # C(5,2)=10, prefix 8
        limit = 1 << cfg.b_sp
        for v in range(limit):
            bits = [(v >> (cfg.b_sp - 1 - i)) & 1 for i in range(cfg.b_sp)]
            frame = encode_frame(bits + [0] * cfg.b_sp, default_pilots(cfg), cfg)
            assert frame.rank_r == v < limit


class TestDecodeBits:
    def test_all_zero(self):
        cfg = GqsmConfig(n_tx=4, n_rx=4, p=2, m=4)
        bits, invalid = decode_bits([1, 2], [1, 2], cfg)
        assert bits.tolist() == [0, 0, 0, 0]
        assert not invalid

    def test_round_trip_random(self):
        cfg = GqsmConfig(n_tx=16, n_rx=16, p=2, m=4)
        rng = np.random.default_rng(11)
        for _ in range(1000):
            bits = rng.integers(0, 2, size=2 * cfg.b_sp)
            frame = encode_frame(bits, default_pilots(cfg), cfg)
            decoded, invalid = decode_bits(frame.k_r, frame.k_i, cfg)
            assert not invalid
            assert decoded.tolist() == bits.tolist()

    def test_out_of_prefix_clamped_and_flagged(self):
        cfg = GqsmConfig(n_tx=4, n_rx=4, p=2, m=4)  # b_sp = 2, prefix 4
        assert rank_combination([3, 4], 4) == 5
        bits, invalid = decode_bits([3, 4], [1, 2], cfg)
        assert invalid
        assert bits[: cfg.b_sp].tolist() == [1, 1]  # clamped to rank 3

    def test_duplicate_indices_flagged(self):
        cfg = GqsmConfig(n_tx=4, n_rx=4, p=2, m=4)
        bits, invalid = decode_bits([2, 2], [1, 2], cfg)
        assert invalid
        assert bits[: cfg.b_sp].tolist() == [1, 1]


class TestConfigValidation:
    def test_alpha_fixed(self):
        with pytest.raises(ValueError):
            GqsmConfig(n_tx=4, n_rx=4, p=1, m=4, alpha=2)

    def test_m_power_of_two(self):
        with pytest.raises(ValueError):
            GqsmConfig(n_tx=4, n_rx=4, p=1, m=3)

    def test_p_bounds(self):
        with pytest.raises(ValueError):
            GqsmConfig(n_tx=4, n_rx=4, p=0, m=4)
        with pytest.raises(ValueError):
            GqsmConfig(n_tx=4, n_rx=4, p=5, m=4)

    def test_default_pilots_are_first_points(self):
        cfg = GqsmConfig(n_tx=8, n_rx=8, p=2, m=4)
        np.testing.assert_allclose(default_pilots(cfg), cfg.constellation.points[:2])
