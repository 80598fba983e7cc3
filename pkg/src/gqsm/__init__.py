"""Piloted generalized quadrature spatial modulation: simulator and decoders."""

from .channel import (
    NoiseSpec,
    RealSystem,
    build_real_system,
    draw_channel,
    ebn0_to_n0,
    realify_channel,
    realify_observation,
    transmit,
)
from .codec import (
    ConstellationSpec,
    Frame,
    GqsmConfig,
    bits_per_frame,
    decode_bits,
    default_pilots,
    encode_frame,
    gray_constellation,
    rank_combination,
    unrank_combination,
)
from .gabp import BeliefState, DecodeResult, DecoderParams, decode, iterate
from .harness import (
    BerRecord,
    ScalingRecord,
    SweepPlan,
    run_point,
    run_sweep,
    scaling_probe,
    simulate_frame,
)
from .reference import MlSearchSpace, mfb_decode, ml_decode

__version__ = "0.1.0"

__all__ = [
    "BeliefState",
    "BerRecord",
    "ConstellationSpec",
    "DecodeResult",
    "DecoderParams",
    "Frame",
    "GqsmConfig",
    "MlSearchSpace",
    "NoiseSpec",
    "RealSystem",
    "ScalingRecord",
    "SweepPlan",
    "bits_per_frame",
    "build_real_system",
    "decode",
    "decode_bits",
    "default_pilots",
    "draw_channel",
    "ebn0_to_n0",
    "encode_frame",
    "gray_constellation",
    "iterate",
    "mfb_decode",
    "ml_decode",
    "rank_combination",
    "realify_channel",
    "realify_observation",
    "run_point",
    "run_sweep",
    "scaling_probe",
    "simulate_frame",
    "transmit",
    "unrank_combination",
]
