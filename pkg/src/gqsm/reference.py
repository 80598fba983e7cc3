"""Ground-truth decoders: exhaustive ML search and the genie-aided matched-filter bound.

The ML search enumerates every reachable codeword (the power-of-two
prefix of antenna-subset ranks, squared over the two branches), so its
cost scales as 2**(2 b_sp) and walls off quickly; it is the oracle for
small systems. The matched-filter bound cancels all interference exactly
using the true frame and decides each of the 2p activation vectors
independently, which lower-bounds every realizable decoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import RealSystem
from .codec import Frame, GqsmConfig, _prefix_subsets

__all__ = ["MlSearchSpace", "ml_decode", "mfb_decode", "DEFAULT_ML_CAP"]

DEFAULT_ML_CAP = 2**20


@dataclass(frozen=True)
class MlSearchSpace:
    """Reachable codeword ranks per branch with their unranked index sets."""

    n_ranks: int
    index_sets: tuple[np.ndarray, ...]

    @classmethod
    def for_config(cls, config: GqsmConfig) -> "MlSearchSpace":
        n_ranks = 1 << config.b_sp
        return cls(n_ranks=n_ranks, index_sets=_prefix_subsets(config.n_tx, config.p, n_ranks))

    @property
    def size(self) -> int:
        return self.n_ranks * self.n_ranks


def _branch_contributions(
    block: np.ndarray, components: np.ndarray, space: MlSearchSpace
) -> np.ndarray:
    """Received-signal contribution of every branch rank: (n_ranks, 2 n_rx)."""
    out = np.empty((space.n_ranks, block.shape[0]))
    for r, idx in enumerate(space.index_sets):
        out[r] = block[:, idx - 1] @ components
    return out


def ml_decode(
    real_system: RealSystem,
    pilots,
    config: GqsmConfig,
    cap: int = DEFAULT_ML_CAP,
) -> tuple[np.ndarray, np.ndarray]:
    """Exhaustive minimum-distance search over all reachable codewords.

    Returns the (k_r, k_i) index sets of the rank pair minimizing
    ||y - H x(rank_r, rank_i)||^2, ties broken by the lexicographically
    smallest (rank_r, rank_i). Raises if the search space exceeds cap.
    """
    space = MlSearchSpace.for_config(config)
    if space.size > cap:
        raise ValueError(f"ML search space {space.size} exceeds cap {cap}")
    pilots = np.asarray(pilots, dtype=np.complex128)
    y = real_system.y_real
    c_r = _branch_contributions(real_system.h_r, pilots.real, space)
    c_i = _branch_contributions(real_system.h_i, pilots.imag, space)

    d = y[None, :] - c_r  # (n_ranks, 2 n_rx)
    d_norm = np.einsum("rn,rn->r", d, d)
    ci_norm = np.einsum("rn,rn->r", c_i, c_i)
    best = np.inf
    best_pair = (0, 0)
    for ri in range(space.n_ranks):
        di = d[ri]
        base = d_norm[ri]
        for rj in range(space.n_ranks):
            res = base - 2.0 * float(di @ c_i[rj]) + ci_norm[rj]
            if res < best:
                best = res
                best_pair = (ri, rj)
    return space.index_sets[best_pair[0]].copy(), space.index_sets[best_pair[1]].copy()


def mfb_decode(
    real_system: RealSystem,
    pilots,
    truth: Frame,
    config: GqsmConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Genie-aided matched-filter bound decisions.

    For each of the 2p activation variables the genie removes the exact
    contributions of the 2p-1 other variables from the observation, then
    picks the antenna whose pilot-scaled channel column is closest to the
    cleaned signal. Ties (e.g. a zero pilot component) resolve to the
    lowest antenna index.
    """
    pilots = np.asarray(pilots, dtype=np.complex128)
    p = config.p
    components = np.concatenate([pilots.real, pilots.imag])
    blocks = (real_system.h_r, real_system.h_i)
    true_idx = np.concatenate([truth.k_r, truth.k_i])

    # residual after removing every true contribution once
    y_res = real_system.y_real.copy()
    for v in range(2 * p):
        y_res -= components[v] * blocks[v // p][:, true_idx[v] - 1]

    picks = np.empty(2 * p, dtype=np.int64)
    for v in range(2 * p):
        block = blocks[v // p]
        target = y_res + components[v] * block[:, true_idx[v] - 1]
        diff = target[:, None] - components[v] * block
        picks[v] = int(np.argmin(np.einsum("nt,nt->t", diff, diff))) + 1
    return np.sort(picks[:p]), np.sort(picks[p:])
