"""Bit mapping and frame construction for generalized quadrature spatial modulation.

Information bits select, independently for the in-phase and quadrature
branches, which P of the N_T transmit antennas carry the real and imaginary
parts of the P pilot symbols. The bits-to-antenna-subset mapping uses
lexicographic combinadic ranking restricted to the first 2**b_sp subsets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, log2

import numpy as np

__all__ = [
    "ConstellationSpec",
    "GqsmConfig",
    "Frame",
    "gray_constellation",
    "bits_per_frame",
    "unrank_combination",
    "rank_combination",
    "encode_frame",
    "decode_bits",
    "default_pilots",
]


def _gray(v: int) -> int:
    return v ^ (v >> 1)


def _inverse_gray(g: int) -> int:
    v = 0
    while g:
        v ^= g
        g >>= 1
    return v


@dataclass(frozen=True)
class ConstellationSpec:
    """Unit-average-energy constellation with one bit label per point.

    ``points[v]`` is the symbol whose bit pattern equals the integer
    ``labels[v]``; labels are a bijection onto {0, ..., M-1}.
    """

    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.complex128)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)
        m = points.size
        if m < 2 or m & (m - 1):
            raise ValueError(f"constellation size must be a power of 2 >= 2, got {m}")
        if sorted(labels.tolist()) != list(range(m)):
            raise ValueError("bit labels must be a bijection onto {0,...,M-1}")
        energy = float(np.mean(np.abs(points) ** 2))
        if abs(energy - 1.0) > 1e-12:
            raise ValueError(f"constellation average energy is {energy}, expected 1")

    @property
    def m(self) -> int:
        return int(self.points.size)

    def point_for_label(self, label: int) -> complex:
        return complex(self.points[int(np.where(self.labels == label)[0][0])])


def gray_constellation(m: int) -> ConstellationSpec:
    """Rectangular QAM with per-axis Gray labels and unit average energy.

    M=2 gives BPSK, M=4 QPSK, M=16 square 16-QAM. Points are stored in
    label order, so ``points[v]`` carries bit pattern v directly.
    """
    if m < 2 or m & (m - 1):
        raise ValueError(f"m must be a power of 2 >= 2, got {m}")
    bits = int(log2(m))
    bits_i = (bits + 1) // 2
    bits_q = bits // 2
    li, lq = 1 << bits_i, 1 << bits_q
    points = np.empty(m, dtype=np.complex128)
    for v in range(m):
        gi = v >> bits_q
        gq = v & (lq - 1)
        pos_i = _inverse_gray(gi)
        pos_q = _inverse_gray(gq) if bits_q else 0
        re = 2 * pos_i - (li - 1)
        im = 2 * pos_q - (lq - 1) if bits_q else 0
        points[v] = re + 1j * im
    # exact per-axis second moment: (L^2 - 1) / 3 for L equispaced levels
    energy = (li * li - 1) / 3 + ((lq * lq - 1) / 3 if bits_q else 0.0)
    points /= np.sqrt(energy)
    return ConstellationSpec(points=points, labels=np.arange(m))


@dataclass(frozen=True)
class GqsmConfig:
    """System dimensions and encoder parameters.

    n_tx/n_rx are the transmit/receive antenna counts, p the number of
    symbols per frame, m the constellation size. alpha is the codebook
    amplification factor and must be 1 (no amplified codebook support).
    """

    n_tx: int
    n_rx: int
    p: int
    m: int = 4
    constellation: ConstellationSpec | None = None
    alpha: int = 1

    def __post_init__(self):
        if self.n_tx < 1 or self.n_rx < 1:
            raise ValueError("antenna counts must be positive")
        if not 1 <= self.p <= self.n_tx:
            raise ValueError(f"p must satisfy 1 <= p <= n_tx, got p={self.p}")
        if self.m < 2 or self.m & (self.m - 1):
            raise ValueError(f"m must be a power of 2 >= 2, got {self.m}")
        if self.alpha != 1:
            raise ValueError("only alpha == 1 is supported")
        if self.constellation is None:
            object.__setattr__(self, "constellation", gray_constellation(self.m))
        elif self.constellation.m != self.m:
            raise ValueError("constellation size does not match m")
        if comb(self.n_tx, self.p) < 2:
            raise ValueError(
                f"C({self.n_tx},{self.p}) < 2: antenna selection carries no information"
            )

    @property
    def b_sp(self) -> int:
        """Spatial bits per branch: floor(log2 C(n_tx, p))."""
        return comb(self.n_tx, self.p).bit_length() - 1

    @property
    def b_dg(self) -> int:
        """Digital bits carried by the p symbols."""
        return self.p * int(log2(self.m))

    @property
    def b_total(self) -> int:
        return 2 * self.b_sp + self.b_dg


def bits_per_frame(config: GqsmConfig) -> tuple[int, int, int]:
    """Bit budget (b_sp, b_dg, b_total) of one frame.

    b_sp spatial bits per branch, b_dg digital bits, total 2*b_sp + b_dg.
    In the piloted mode only the 2*b_sp spatial bits carry information;
    b_dg is reported for rate accounting.
    """
    if comb(config.n_tx, config.p) < 2:
        raise ValueError("no spatial information: C(n_tx, p) < 2")
    return config.b_sp, config.b_dg, config.b_total


def unrank_combination(rank: int, n: int, p: int) -> np.ndarray:
    """rank-th p-subset of {1,...,n} in lexicographic order (strictly increasing)."""
    total = comb(n, p)
    if not 0 <= rank < total:
        raise ValueError(f"rank {rank} outside [0, C({n},{p})={total})")
    out = np.empty(p, dtype=np.int64)
    r = rank
    a = 1
    for i in range(p):
        while True:
            block = comb(n - a, p - i - 1)
            if r < block:
                break
            r -= block
            a += 1
        out[i] = a
        a += 1
    return out


def rank_combination(indices, n: int) -> int:
    """Lexicographic rank of a strictly increasing p-subset of {1,...,n}."""
    idx = np.asarray(indices, dtype=np.int64)
    p = idx.size
    if np.any(idx < 1) or np.any(idx > n):
        raise ValueError(f"indices must lie in {{1,...,{n}}}")
    if np.any(np.diff(idx) <= 0):
        raise ValueError("indices must be strictly increasing (no duplicates)")
    rank = 0
    prev = 0
    for i in range(p):
        for a in range(prev + 1, int(idx[i])):
            rank += comb(n - a, p - i - 1)
        prev = int(idx[i])
    return rank


@lru_cache(maxsize=64)
def _prefix_subsets(n: int, p: int, count: int) -> tuple[np.ndarray, ...]:
    """First ``count`` lexicographic p-subsets of {1,...,n}, cached."""
    return tuple(unrank_combination(r, n, p) for r in range(count))


@dataclass(frozen=True)
class Frame:
    """One encoded transmission."""

    spatial_bits: np.ndarray
    rank_r: int
    rank_i: int
    k_r: np.ndarray
    k_i: np.ndarray
    pilots_r: np.ndarray
    pilots_i: np.ndarray
    x: np.ndarray = field(repr=False)

    @property
    def pilots(self) -> np.ndarray:
        return self.pilots_r + 1j * self.pilots_i


def _bits_to_int(bits: np.ndarray) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


def _int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.int64)


def default_pilots(config: GqsmConfig) -> np.ndarray:
    """Deterministic pilots: the first p points of the constellation in label order."""
    return config.constellation.points[: config.p].copy()


def encode_frame(spatial_bits, pilots, config: GqsmConfig) -> Frame:
    """Map 2*b_sp spatial bits plus p known pilot symbols to a transmit vector.

    The first b_sp bits select (big-endian combinadic rank) the antenna
    subset for the real parts, the last b_sp bits the subset for the
    imaginary parts. Symbol component p goes to the p-th smallest active
    index of its branch.
    """
    bits = np.asarray(spatial_bits, dtype=np.int64)
    b_sp = config.b_sp
    if bits.size != 2 * b_sp:
        raise ValueError(f"expected {2 * b_sp} spatial bits, got {bits.size}")
    pilots = np.asarray(pilots, dtype=np.complex128)
    if pilots.size != config.p:
        raise ValueError(f"expected {config.p} pilots, got {pilots.size}")
    rank_r = _bits_to_int(bits[:b_sp])
    rank_i = _bits_to_int(bits[b_sp:])
    k_r = unrank_combination(rank_r, config.n_tx, config.p)
    k_i = unrank_combination(rank_i, config.n_tx, config.p)
    x = np.zeros(config.n_tx, dtype=np.complex128)
    x[k_r - 1] += pilots.real
    x[k_i - 1] += 1j * pilots.imag
    return Frame(
        spatial_bits=bits.copy(),
        rank_r=rank_r,
        rank_i=rank_i,
        k_r=k_r,
        k_i=k_i,
        pilots_r=pilots.real.copy(),
        pilots_i=pilots.imag.copy(),
        x=x,
    )


def _branch_rank(k_hat, config: GqsmConfig) -> tuple[int, bool]:
    """Rank of an estimated index set, clamped into the power-of-two prefix.

    Index sets that are no valid codeword (duplicates, or rank beyond the
    2**b_sp prefix) are clamped to the last prefix rank and flagged.
    """
    idx = np.sort(np.asarray(k_hat, dtype=np.int64))
    limit = 1 << config.b_sp
    if idx.size != config.p or np.any(np.diff(idx) <= 0):
        return limit - 1, True
    rank = rank_combination(idx, config.n_tx)
    if rank >= limit:
        return limit - 1, True
    return rank, False


def decode_bits(k_r_hat, k_i_hat, config: GqsmConfig) -> tuple[np.ndarray, bool]:
    """Invert the spatial mapping; returns (bits, invalid_codeword_flag)."""
    rank_r, bad_r = _branch_rank(k_r_hat, config)
    rank_i, bad_i = _branch_rank(k_i_hat, config)
    b_sp = config.b_sp
    bits = np.concatenate([_int_to_bits(rank_r, b_sp), _int_to_bits(rank_i, b_sp)])
    return bits, bad_r or bad_i
