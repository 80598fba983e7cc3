"""Monte-Carlo BER engine with reproducible per-frame random substreams.

Every frame realization is a pure function of (master_seed, point index,
frame index), so results are bit-identical for any worker count. All
enabled decoders consume the identical realization of each frame. Frames
are processed in fixed-size batches; the optional early stop (enough bit
errors for every decoder) is evaluated only at batch boundaries so the
stopping point does not depend on scheduling.
"""

from __future__ import annotations

import multiprocessing
import time
from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .channel import build_real_system, draw_channel, ebn0_to_n0, transmit
from .codec import GqsmConfig, decode_bits, default_pilots, encode_frame
from .gabp import DecoderParams, decode, warm_up
from .reference import DEFAULT_ML_CAP, mfb_decode, ml_decode

__all__ = [
    "SweepPlan",
    "BerRecord",
    "ScalingRecord",
    "run_point",
    "run_sweep",
    "scaling_probe",
    "simulate_frame",
    "BATCH_FRAMES",
]

KNOWN_DECODERS = ("gabp", "ml", "mfb")

# fixed batch granularity; early stop only at batch boundaries keeps the
# frame count independent of the worker count
BATCH_FRAMES = 256


@dataclass(frozen=True)
class SweepPlan:
    """Everything that determines a sweep's results (worker count excluded)."""

    config: GqsmConfig
    params: DecoderParams = field(default_factory=DecoderParams)
    decoders: tuple[str, ...] = ("gabp",)
    ebn0_points_db: tuple[float, ...] = ()
    frames_per_point: int = 10_000
    max_bit_errors: int | None = 200
    master_seed: int = 0
    pilots: np.ndarray | None = None
    randomize_pilots: bool = False
    zero_channel: bool = False

    def __post_init__(self):
        object.__setattr__(self, "decoders", tuple(self.decoders))
        object.__setattr__(
            self, "ebn0_points_db", tuple(float(e) for e in self.ebn0_points_db)
        )
        for d in self.decoders:
            if d not in KNOWN_DECODERS:
                raise ValueError(f"unknown decoder {d!r}; choose from {KNOWN_DECODERS}")
        if not self.decoders:
            raise ValueError("at least one decoder is required")
        if self.frames_per_point < 1:
            raise ValueError("frames_per_point must be >= 1")
        if any(not np.isfinite(e) for e in self.ebn0_points_db):
            raise ValueError("ebn0 points must be finite")
        if list(self.ebn0_points_db) != sorted(self.ebn0_points_db):
            raise ValueError("ebn0 points must be sorted ascending")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")
        if self.pilots is not None:
            object.__setattr__(
                self, "pilots", np.asarray(self.pilots, dtype=np.complex128)
            )
            if self.pilots.size != self.config.p:
                raise ValueError("pilots length must equal config.p")

    def fixed_pilots(self) -> np.ndarray | None:
        if self.randomize_pilots:
            return None
        return self.pilots if self.pilots is not None else default_pilots(self.config)


@dataclass(frozen=True)
class BerRecord:
    """Aggregated error statistics of one decoder at one operating point."""

    decoder: str
    ebn0_db: float
    frames: int
    spatial_bits: int
    bit_errors: int
    frame_errors: int
    ber: float
    ci95_halfwidth: float
    wall_time_s: float


@dataclass(frozen=True)
class ScalingRecord:
    decoder: str
    n_tx: int
    n_rx: int
    p: int
    per_iter_ms: float
    fit_residual: float


def simulate_frame(
    plan: SweepPlan, n0: float, point_index: int, frame_index: int
):
    """Deterministic realization of one frame: (frame, real_system, pilots).

    Draw order within the per-frame substream: spatial bits, pilots (only
    when randomized), channel, noise.
    """
    config = plan.config
    rng = np.random.default_rng([plan.master_seed, point_index, frame_index])
    bits = rng.integers(0, 2, size=2 * config.b_sp)
    if plan.randomize_pilots:
        pilots = config.constellation.points[rng.integers(0, config.m, size=config.p)]
    else:
        pilots = plan.fixed_pilots()
    frame = encode_frame(bits, pilots, config)
    if plan.zero_channel:
        h = np.zeros((config.n_rx, config.n_tx), dtype=np.complex128)
    else:
        h = draw_channel(config, rng)
    y = transmit(frame.x, h, n0, rng)
    return frame, build_real_system(y, h, n0), pilots


def _decode_indices(decoder, system, pilots, frame, plan):
    if decoder == "gabp":
        result = decode(system, pilots, plan.params)
        return result.k_r_hat, result.k_i_hat
    if decoder == "ml":
        return ml_decode(system, pilots, plan.config)
    return mfb_decode(system, pilots, frame, plan.config)


def _simulate_block(args):
    """Worker body: run frames [start, stop) and return per-decoder counts."""
    plan, n0, point_index, start, stop = args
    counts = {d: [0, 0, 0.0] for d in plan.decoders}  # bit_errors, frame_errors, wall
    for f in range(start, stop):
        frame, system, pilots = simulate_frame(plan, n0, point_index, f)
        for d in plan.decoders:
            t0 = time.perf_counter()
            k_r, k_i = _decode_indices(d, system, pilots, frame, plan)
            counts[d][2] += time.perf_counter() - t0
            bits_hat, _ = decode_bits(k_r, k_i, plan.config)
            n_err = int(np.sum(bits_hat != frame.spatial_bits))
            counts[d][0] += n_err
            counts[d][1] += int(n_err > 0)
    return counts


def _chunk_ranges(start: int, stop: int, parts: int):
    edges = np.linspace(start, stop, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_point(
    plan: SweepPlan,
    ebn0_db: float,
    point_index: int | None = None,
    workers: int = 1,
) -> list[BerRecord]:
    """Simulate one Eb/N0 point; one record per enabled decoder.

    All decoders see the same frame realizations. Early stop (when set)
    fires once every decoder has accumulated max_bit_errors.
    """
    if point_index is None:
        pts = plan.ebn0_points_db
        point_index = pts.index(float(ebn0_db)) if float(ebn0_db) in pts else 0
    n0 = ebn0_to_n0(ebn0_db, plan.config, plan.fixed_pilots())
    totals = {d: [0, 0, 0.0] for d in plan.decoders}
    frames_done = 0

    pool = None
    try:
        if workers > 1:
            if "gabp" in plan.decoders:
                warm_up()  # compile pre-fork so workers inherit the kernel
            pool = multiprocessing.get_context("fork").Pool(workers)
        while frames_done < plan.frames_per_point:
            stop = min(frames_done + BATCH_FRAMES, plan.frames_per_point)
            tasks = [
                (plan, n0, point_index, a, b)
                for a, b in _chunk_ranges(frames_done, stop, max(workers, 1))
            ]
            results = pool.map(_simulate_block, tasks) if pool else map(_simulate_block, tasks)
            for counts in results:
                for d in plan.decoders:
                    totals[d][0] += counts[d][0]
                    totals[d][1] += counts[d][1]
                    totals[d][2] += counts[d][2]
            frames_done = stop
            if plan.max_bit_errors is not None and all(
                totals[d][0] >= plan.max_bit_errors for d in plan.decoders
            ):
                break
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    records = []
    spatial_bits = frames_done * 2 * plan.config.b_sp
    for d in plan.decoders:
        bit_errors, frame_errors, wall = totals[d]
        ber = bit_errors / spatial_bits if spatial_bits else 0.0
        ci = 1.96 * sqrt(ber * (1.0 - ber) / spatial_bits) if spatial_bits else 0.0
        records.append(
            BerRecord(
                decoder=d,
                ebn0_db=float(ebn0_db),
                frames=frames_done,
                spatial_bits=spatial_bits,
                bit_errors=bit_errors,
                frame_errors=frame_errors,
                ber=ber,
                ci95_halfwidth=ci,
                wall_time_s=wall,
            )
        )
    return records


def run_sweep(plan: SweepPlan, workers: int = 1) -> list[BerRecord]:
    """Map run_point over every Eb/N0 point of the plan."""
    records = []
    for i, ebn0_db in enumerate(plan.ebn0_points_db):
        records.extend(run_point(plan, ebn0_db, point_index=i, workers=workers))
    return records


def _gabp_complexity(n_tx: int, n_rx: int, p: int) -> float:
    return p * n_tx * n_tx * n_rx


def _ml_complexity(config: GqsmConfig) -> float:
    return float(4**config.b_sp)


def scaling_probe(
    n_tx_values=(8, 16, 32),
    p_values=(1, 2, 4),
    m: int = 4,
    decoders: tuple[str, ...] = ("gabp", "ml"),
    params: DecoderParams | None = None,
    reps: int = 3,
    seed: int = 0,
    ebn0_db: float = 10.0,
    ml_cap: int = DEFAULT_ML_CAP,
) -> list[ScalingRecord]:
    """Median decode timings over an (n_tx, p) grid with n_rx = n_tx.

    For gabp the entry is the per-iteration time, isolated by differencing
    decodes at two iteration counts; for ml it is the whole decode (its
    cost has no iteration structure). fit_residual is the relative error
    against the least-squares fit of each decoder's complexity model
    (p * n_tx^2 * n_rx for gabp, 2**(2 b_sp) for ml). ML cells whose
    search space exceeds ml_cap are omitted.
    """
    params = params or DecoderParams()
    rows: list[tuple[str, int, int, int, float, float]] = []
    for n_tx in n_tx_values:
        for p in p_values:
            if p > n_tx:
                raise ValueError(f"grid cell p={p} exceeds n_tx={n_tx}")
            config = GqsmConfig(n_tx=int(n_tx), n_rx=int(n_tx), p=int(p), m=m)
            plan = SweepPlan(
                config=config, params=params, decoders=("mfb",),
                ebn0_points_db=(ebn0_db,), master_seed=seed,
            )
            n0 = ebn0_to_n0(ebn0_db, config, plan.fixed_pilots())
            frame, system, pilots = simulate_frame(plan, n0, 0, 0)
            for d in decoders:
                if d == "gabp":
                    lo = DecoderParams(tau_max=10, rho=params.rho,
                                       variance_floor=params.variance_floor)
                    hi = DecoderParams(tau_max=50, rho=params.rho,
                                       variance_floor=params.variance_floor)
                    decode(system, pilots, lo)  # warm-up
                    t_lo, t_hi = [], []
                    for _ in range(reps):
                        t0 = time.perf_counter()
                        decode(system, pilots, lo)
                        t1 = time.perf_counter()
                        decode(system, pilots, hi)
                        t2 = time.perf_counter()
                        t_lo.append(t1 - t0)
                        t_hi.append(t2 - t1)
                    per_call = float(np.median(t_hi) - np.median(t_lo)) / (
                        hi.tau_max - lo.tau_max
                    )
                    model = _gabp_complexity(config.n_tx, config.n_rx, config.p)
                elif d == "ml":
                    if 4**config.b_sp > ml_cap:
                        continue
                    samples = []
                    for _ in range(reps):
                        t0 = time.perf_counter()
                        ml_decode(system, pilots, config, cap=ml_cap)
                        samples.append(time.perf_counter() - t0)
                    per_call = float(np.median(samples))
                    model = _ml_complexity(config)
                else:
                    raise ValueError(f"scaling probe supports gabp and ml, not {d!r}")
                rows.append((d, config.n_tx, config.n_rx, config.p, per_call * 1e3, model))

    records = []
    for d in {r[0] for r in rows}:
        cells = [r for r in rows if r[0] == d]
        times = np.array([c[4] for c in cells])
        models = np.array([c[5] for c in cells])
        scale = float(times @ models / (models @ models))
        for c in cells:
            predicted = scale * c[5]
            residual = (c[4] - predicted) / predicted if predicted > 0 else 0.0
            records.append(
                ScalingRecord(
                    decoder=c[0], n_tx=c[1], n_rx=c[2], p=c[3],
                    per_iter_ms=c[4], fit_residual=float(residual),
                )
            )
    records.sort(key=lambda r: (r.decoder, r.n_tx, r.p))
    return records
