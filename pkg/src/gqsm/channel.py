"""Rayleigh MIMO channel, AWGN, and the real-valued decoupled system.

The complex model y = Hx + w is rewritten over the reals by stacking real
and imaginary parts: the 2n_rx observation sees the real-part symbols
through h_r = [Re H; Im H] and the imaginary-part symbols through
h_i = [-Im H; Re H]. Each real noise entry has variance n0/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import GqsmConfig, bits_per_frame

__all__ = [
    "RealSystem",
    "NoiseSpec",
    "draw_channel",
    "realify_channel",
    "realify_observation",
    "ebn0_to_n0",
    "transmit",
    "build_real_system",
]


@dataclass(frozen=True)
class RealSystem:
    """Realified observation: y_real = h_r @ Re(x) + h_i @ Im(x) + noise."""

    y_real: np.ndarray  # (2 n_rx,)
    h_r: np.ndarray  # (2 n_rx, n_tx)
    h_i: np.ndarray  # (2 n_rx, n_tx)
    n0: float

    @property
    def n_factors(self) -> int:
        return self.y_real.size

    @property
    def n_tx(self) -> int:
        return self.h_r.shape[1]

    @property
    def h_bold(self) -> np.ndarray:
        return np.hstack([self.h_r, self.h_i])


@dataclass(frozen=True)
class NoiseSpec:
    ebn0_db: float
    n0: float

    @classmethod
    def from_ebn0(cls, ebn0_db: float, config: GqsmConfig, pilots=None) -> "NoiseSpec":
        return cls(ebn0_db=float(ebn0_db), n0=ebn0_to_n0(ebn0_db, config, pilots))


def draw_channel(config: GqsmConfig, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. circularly-symmetric complex Gaussian channel, unit entry variance."""
    shape = (config.n_rx, config.n_tx)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def realify_channel(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a complex channel into the real-domain blocks (h_r, h_i)."""
    h = np.asarray(h, dtype=np.complex128)
    h_r = np.vstack([h.real, h.imag])
    h_i = np.vstack([-h.imag, h.real])
    return h_r, h_i


def realify_observation(y: np.ndarray) -> np.ndarray:
    """Stack [Re y; Im y]."""
    y = np.asarray(y, dtype=np.complex128)
    return np.concatenate([y.real, y.imag])


def ebn0_to_n0(ebn0_db: float, config: GqsmConfig, pilots=None) -> float:
    """Noise power for a target Eb/N0 in dB.

    Eb = E_frame / b_total with b_total counting both spatial and digital
    bits. E_frame is the exact pilot energy when fixed pilots are given,
    otherwise the expectation p under unit-energy random pilots.
    """
    if not np.isfinite(ebn0_db):
        raise ValueError("ebn0_db must be finite")
    if pilots is None:
        e_frame = float(config.p)
    else:
        e_frame = float(np.sum(np.abs(np.asarray(pilots, dtype=np.complex128)) ** 2))
    if e_frame <= 0:
        raise ValueError("frame energy must be positive")
    _, _, b_total = bits_per_frame(config)
    eb = e_frame / b_total
    return eb * 10.0 ** (-float(ebn0_db) / 10.0)


def transmit(x: np.ndarray, h: np.ndarray, n0: float, rng: np.random.Generator) -> np.ndarray:
    """y = Hx + w with w ~ CN(0, n0) per entry; n0 = 0 is exact."""
    x = np.asarray(x, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    if h.shape[1] != x.size:
        raise ValueError(f"channel has {h.shape[1]} columns but x has {x.size} entries")
    if n0 < 0:
        raise ValueError("n0 must be nonnegative")
    y = h @ x
    if n0 > 0:
        n_rx = h.shape[0]
        w = (rng.standard_normal(n_rx) + 1j * rng.standard_normal(n_rx)) * np.sqrt(n0 / 2.0)
        y = y + w
    return y


def build_real_system(y: np.ndarray, h: np.ndarray, n0: float) -> RealSystem:
    h_r, h_i = realify_channel(h)
    return RealSystem(y_real=realify_observation(y), h_r=h_r, h_i=h_i, n0=float(n0))
