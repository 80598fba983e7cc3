import dataclasses

import numpy as np
import pytest

from gqsm.codec import GqsmConfig
from gqsm.gabp import DecoderParams
from gqsm.harness import (
    BATCH_FRAMES,
    SweepPlan,
    run_point,
    run_sweep,
    scaling_probe,
    simulate_frame,
)


def small_plan(**overrides):
    defaults = dict(
        config=GqsmConfig(n_tx=4, n_rx=4, p=1, m=4),
        params=DecoderParams(tau_max=20),
        decoders=("gabp", "ml", "mfb"),
        ebn0_points_db=(0.0, 4.0),
        frames_per_point=300,
        max_bit_errors=None,
        master_seed=17,
    )
    defaults.update(overrides)
    return SweepPlan(**defaults)


class TestSimulateFrame:
    def test_deterministic_per_key(self):
        plan = small_plan()
        a = simulate_frame(plan, 0.1, 1, 42)
        b = simulate_frame(plan, 0.1, 1, 42)
        np.testing.assert_array_equal(a[0].spatial_bits, b[0].spatial_bits)
        np.testing.assert_array_equal(a[1].y_real, b[1].y_real)
        np.testing.assert_array_equal(a[1].h_r, b[1].h_r)

    def test_distinct_frames_differ(self):
        plan = small_plan()
        a = simulate_frame(plan, 0.1, 0, 0)
        b = simulate_frame(plan, 0.1, 0, 1)
        assert not np.array_equal(a[1].y_real, b[1].y_real)

    def test_randomized_pilots_come_from_constellation(self):
        plan = small_plan(randomize_pilots=True)
        _, _, pilots = simulate_frame(plan, 0.1, 0, 3)
        dists = np.abs(pilots[:, None] - plan.config.constellation.points[None, :])
        assert np.all(dists.min(axis=1) < 1e-12)


class TestRunPoint:
    def test_noiseless_recovery_all_decoders(self):
        plan = small_plan(
            config=GqsmConfig(n_tx=8, n_rx=8, p=1, m=4),
            params=DecoderParams(),
            ebn0_points_db=(60.0,),
            frames_per_point=500,
        )
        records = run_point(plan, 60.0)
        assert len(records) == 3
        for r in records:
            assert r.bit_errors == 0
            assert r.ber == 0.0
            assert r.spatial_bits == 500 * 2 * plan.config.b_sp

    def test_zero_channel_is_coin_flipping(self):
        plan = small_plan(
            decoders=("gabp",),
            ebn0_points_db=(10.0,),
            frames_per_point=400,
            zero_channel=True,
        )
        (record,) = run_point(plan, 10.0)
        assert abs(record.ber - 0.5) <= 3 * record.ci95_halfwidth / 1.96 + 0.01

    def test_worker_count_does_not_change_results(self):
        plan = small_plan()
        serial = run_point(plan, 0.0, workers=1)
        parallel = run_point(plan, 0.0, workers=2)
        for a, b in zip(serial, parallel):
            da = dataclasses.asdict(a)
            db = dataclasses.asdict(b)
            da.pop("wall_time_s")
            db.pop("wall_time_s")
            assert da == db

    def test_early_stop_at_batch_boundary(self):
        plan = small_plan(
            decoders=("gabp",),
            ebn0_points_db=(-10.0,),
            frames_per_point=5000,
            max_bit_errors=50,
        )
        (record,) = run_point(plan, -10.0)
        assert record.bit_errors >= 50
        assert record.frames < 5000
        assert record.frames % BATCH_FRAMES == 0

    def test_ber_and_ci_consistency(self):
        plan = small_plan(decoders=("ml",), ebn0_points_db=(2.0,), frames_per_point=300)
        (record,) = run_point(plan, 2.0)
        assert record.ber == record.bit_errors / record.spatial_bits
        expected_ci = 1.96 * np.sqrt(record.ber * (1 - record.ber) / record.spatial_bits)
        assert record.ci95_halfwidth == pytest.approx(expected_ci)


class TestRunSweep:
    def test_empty_points(self):
        plan = small_plan(ebn0_points_db=())
        assert run_sweep(plan) == []

    def test_record_layout(self):
        plan = small_plan(decoders=("ml", "mfb"), frames_per_point=100)
        records = run_sweep(plan)
        assert [(r.decoder, r.ebn0_db) for r in records] == [
            ("ml", 0.0), ("mfb", 0.0), ("ml", 4.0), ("mfb", 4.0),
        ]

    def test_plan_validation(self):
        with pytest.raises(ValueError):
            small_plan(decoders=("bogus",))
        with pytest.raises(ValueError):
            small_plan(ebn0_points_db=(4.0, 0.0))
        with pytest.raises(ValueError):
            small_plan(frames_per_point=0)
        with pytest.raises(ValueError):
            small_plan(pilots=np.array([1.0, 1.0]))


class TestScalingProbe:
    def test_single_cell(self):
        records = scaling_probe(n_tx_values=(8,), p_values=(1,), reps=2)
        decoders = {r.decoder for r in records}
        assert decoders == {"gabp", "ml"}
        for r in records:
            assert r.n_rx == r.n_tx == 8
            assert r.per_iter_ms > 0

    def test_ml_cells_over_cap_are_skipped(self):
        records = scaling_probe(
            n_tx_values=(16,), p_values=(1, 4), reps=1, ml_cap=2**10
        )
        ml_cells = [r for r in records if r.decoder == "ml"]
        assert [(r.n_tx, r.p) for r in ml_cells] == [(16, 1)]

    def test_invalid_grid(self):
        with pytest.raises(ValueError):
            scaling_probe(n_tx_values=(4,), p_values=(8,), reps=1)
