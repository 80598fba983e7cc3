"""Gaussian belief propagation decoder over per-symbol antenna-activation vectors.

The sparse transmit vector is a superposition of 2p pilot-scaled unit
vectors (p real components through h_r, p imaginary components through
h_i), so decoding reduces to jointly estimating 2p categorical variables
over n_tx antennas. Each of the 2n_rx real observations acts as a factor
node; every (variable, factor) edge carries a soft replica (a probability
vector over antennas) and its error covariance matrix. One update of a
variable is: soft interference cancellation, Gaussian conditional
variances, extrinsic information vectors / precision diagonals by
leave-one-out sums, exact categorical posterior, then a damped update of
replicas and covariances. Within an iteration the 2p variables are
updated sequentially, each seeing the freshest beliefs of the others;
the parallel schedule settles into symmetric local optima once several
variables interfere (p >= 2), while the sequential sweep reaches the
fixed point that the truth-initialized recursion confirms is stable.
Hard decisions come from the consensus belief aggregated over all factor
nodes, with a greedy no-replacement rule when per-variable argmax
decisions collide on an antenna.

Per-iteration cost is O(p * n_tx^2 * n_rx): the covariance quadratic forms
and damped covariance updates dominate, and nothing enumerates antenna
subsets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .channel import RealSystem

__all__ = [
    "DecoderParams",
    "BeliefState",
    "DecodeResult",
    "replica_covariance",
    "init_state",
    "soft_ic",
    "conditional_variances",
    "extrinsic_messages",
    "posterior_update",
    "damp",
    "iterate",
    "consensus_scores",
    "consensus_decision",
    "decode",
]


@dataclass(frozen=True)
class DecoderParams:
    """Message-passing knobs: iteration count, damping factor, variance floor."""

    tau_max: int = 100
    rho: float = 0.5
    variance_floor: float = 1e-12

    def __post_init__(self):
        if self.tau_max < 1:
            raise ValueError("tau_max must be a positive integer")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.variance_floor <= 0:
            raise ValueError("variance_floor must be positive")


@dataclass
class BeliefState:
    """Per-edge beliefs and cached system quantities for one decode call.

    Arrays are indexed (variable, factor, ...) with variables 0..p-1 the
    real-branch components and p..2p-1 the imaginary-branch components.
    ``scaled_rows[v, n]`` is the factor-n channel row of variable v's
    branch premultiplied by its pilot component.
    """

    replicas: np.ndarray  # (2p, 2n_rx, n_tx)
    covariances: np.ndarray  # (2p, 2n_rx, n_tx, n_tx)
    scaled_rows: np.ndarray  # (2p, 2n_rx, n_tx)
    scaled_rows_sq: np.ndarray  # (2p, 2n_rx, n_tx)
    y: np.ndarray  # (2n_rx,)
    n0: float
    variance_floor: float
    p: int
    log_prior: np.ndarray  # (2p, n_tx)
    uniform_prior: bool = True
    residuals: np.ndarray | None = field(default=None, repr=False)
    variances: np.ndarray | None = field(default=None, repr=False)
    eta: np.ndarray | None = field(default=None, repr=False)
    lam_diag: np.ndarray | None = field(default=None, repr=False)
    eta_consensus: np.ndarray | None = field(default=None, repr=False)
    lam_consensus: np.ndarray | None = field(default=None, repr=False)
    _cov_scratch: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_vars(self) -> int:
        return self.replicas.shape[0]

    @property
    def n_factors(self) -> int:
        return self.replicas.shape[1]

    @property
    def n_tx(self) -> int:
        return self.replicas.shape[2]


@dataclass(frozen=True)
class DecodeResult:
    """Hard antenna-index decisions plus the consensus beliefs behind them."""

    k_r_hat: np.ndarray
    k_i_hat: np.ndarray
    probabilities: np.ndarray  # (2p, n_tx) consensus probability vectors
    iterations_run: int
    collision_resolved: bool


def replica_covariance(a: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Error covariance of a categorical soft replica: diag(a) - a a^T."""
    a = np.asarray(a, dtype=np.float64)
    if out is None:
        out = np.empty(a.shape + (a.shape[-1],))
    np.multiply((-a)[..., :, None], a[..., None, :], out=out)
    idx = np.arange(a.shape[-1])
    out[..., idx, idx] += a
    return out


def _pilot_components(pilots) -> np.ndarray:
    pilots = np.asarray(pilots, dtype=np.complex128)
    return np.concatenate([pilots.real, pilots.imag])


def init_state(
    real_system: RealSystem,
    pilots,
    params: DecoderParams | None = None,
    prior: np.ndarray | None = None,
) -> BeliefState:
    """Fresh belief state with every replica at its prior mean.

    With the default uniform prior each replica starts at 1/n_tx per
    antenna and each covariance at I/n_tx - J/n_tx^2.
    """
    params = params or DecoderParams()
    n_tx = real_system.n_tx
    n_factors = real_system.n_factors
    s = _pilot_components(pilots)
    n_vars = s.size
    p = n_vars // 2
    if p == 0 or real_system.h_r.shape != (n_factors, n_tx):
        raise ValueError("system and pilot dimensions are inconsistent")

    if prior is None:
        prior_arr = np.full((n_vars, n_tx), 1.0 / n_tx)
        uniform = True
    else:
        prior_arr = np.broadcast_to(np.asarray(prior, dtype=np.float64), (n_vars, n_tx)).copy()
        sums = prior_arr.sum(axis=1)
        if np.any(prior_arr < 0) or np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError("prior rows must be probability vectors")
        uniform = bool(np.all(np.abs(prior_arr - 1.0 / n_tx) < 1e-15))
    with np.errstate(divide="ignore"):
        log_prior = np.log(prior_arr)

    rows = np.empty((n_vars, n_factors, n_tx))
    rows[:p] = real_system.h_r
    rows[p:] = real_system.h_i
    scaled_rows = rows * s[:, None, None]

    replicas = np.broadcast_to(prior_arr[:, None, :], (n_vars, n_factors, n_tx)).copy()
    covariances = np.broadcast_to(
        replica_covariance(prior_arr)[:, None, :, :], (n_vars, n_factors, n_tx, n_tx)
    ).copy()
    return BeliefState(
        replicas=replicas,
        covariances=covariances,
        scaled_rows=scaled_rows,
        scaled_rows_sq=scaled_rows**2,
        y=real_system.y_real,
        n0=float(real_system.n0),
        variance_floor=params.variance_floor,
        p=p,
        log_prior=log_prior,
        uniform_prior=uniform,
    )


def soft_ic(state: BeliefState) -> np.ndarray:
    """Soft interference cancellation residuals for every edge.

    residual[v, n] = y[n] minus the expected contributions of all
    variables other than v, using the edge replicas held at factor n.
    """
    means = np.einsum("vnt,vnt->vn", state.scaled_rows, state.replicas)
    state.residuals = state.y[None, :] - means.sum(axis=0, keepdims=True) + means
    return state.residuals


def _scaled_quadratic_forms(state: BeliefState) -> np.ndarray:
    """|s_v|^2 h_n^T Gamma_{v:n} h_n for every edge, via batched matmul."""
    n_vars, n_factors, n_tx = state.scaled_rows.shape
    flat_cov = state.covariances.reshape(n_vars * n_factors, n_tx, n_tx)
    flat_rows = state.scaled_rows.reshape(n_vars * n_factors, n_tx, 1)
    t = np.matmul(flat_cov, flat_rows).reshape(n_vars, n_factors, n_tx)
    return np.einsum("vnt,vnt->vn", t, state.scaled_rows)


def conditional_variances(state: BeliefState) -> np.ndarray:
    """Gaussian variance of each edge residual, floored at n0/2 + variance_floor.

    variance[v, n] sums the replica-error quadratic forms of all other
    variables at factor n plus the noise term n0/2.
    """
    q = _scaled_quadratic_forms(state)
    total = q.sum(axis=0, keepdims=True)
    floor = state.n0 / 2.0 + state.variance_floor
    state.variances = np.maximum(total - q + state.n0 / 2.0, floor)
    return state.variances


def extrinsic_messages(state: BeliefState) -> tuple[np.ndarray, np.ndarray]:
    """Leave-one-out information vectors and precision diagonals per edge.

    The full sums over all factors are computed once and the own-factor
    term subtracted; the full sums are kept as the consensus belief. Only
    the precision diagonal is formed: candidate activation vectors are
    unit vectors, so scores depend on the diagonal alone.
    """
    if state.residuals is None or state.variances is None:
        raise RuntimeError("run soft_ic and conditional_variances first")
    ratio = state.residuals / state.variances
    eta_full = np.einsum("vn,vnt->vt", ratio, state.scaled_rows)
    lam_full = np.einsum("vn,vnt->vt", 1.0 / state.variances, state.scaled_rows_sq)
    state.eta_consensus = eta_full
    state.lam_consensus = lam_full
    state.eta = eta_full[:, None, :] - ratio[..., None] * state.scaled_rows
    state.lam_diag = lam_full[:, None, :] - state.scaled_rows_sq / state.variances[..., None]
    return state.eta, state.lam_diag


def _score_probabilities(scores: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Row-wise softmax with max subtraction (last axis).

    Shifted scores are floored at -60 nats: the discarded probability mass
    (< 1e-26) is irrelevant at double precision, and bounded arguments
    keep exp() off its slow path for large-magnitude inputs, whose cost
    would otherwise depend on how converged the beliefs are.
    """
    if out is None:
        out = np.empty_like(scores)
    np.subtract(scores, scores.max(axis=-1, keepdims=True), out=out)
    np.maximum(out, -60.0, out=out)
    np.exp(out, out=out)
    out /= out.sum(axis=-1, keepdims=True)
    return out


def posterior_update(
    state: BeliefState, prior: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Exact categorical posterior per edge from the extrinsic belief.

    For unit-vector candidates the Gaussian belief evaluates to the
    per-antenna score eta_t - lam_tt/2 (+ log prior), so the posterior is
    a softmax over antennas; the covariance follows as diag(a) - a a^T.
    Returns (replicas, covariances) without touching the state's beliefs
    (see damp); the covariance array is a per-state scratch buffer that
    the next posterior_update call on the same state will overwrite.
    """
    if state.eta is None or state.lam_diag is None:
        raise RuntimeError("run extrinsic_messages first")
    if prior is None:
        log_prior = state.log_prior
    else:
        with np.errstate(divide="ignore"):
            log_prior = np.log(np.asarray(prior, dtype=np.float64))
    scores = state.eta - 0.5 * state.lam_diag + log_prior[:, None, :]
    replicas = _score_probabilities(scores)
    if state._cov_scratch is None:
        state._cov_scratch = np.empty_like(state.covariances)
    return replicas, replica_covariance(replicas, out=state._cov_scratch)


def damp(
    state: BeliefState,
    new_replicas: np.ndarray,
    new_covariances: np.ndarray,
    rho: float,
    consume_new: bool = False,
) -> BeliefState:
    """Convex blend of old and new beliefs: rho * old + (1 - rho) * new, in place.

    With consume_new the new_covariances array is used as scratch (its
    contents are destroyed), avoiding a large temporary in the hot loop.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    state.replicas *= rho
    state.replicas += (1.0 - rho) * new_replicas
    np.multiply(state.covariances, rho, out=state.covariances)
    if consume_new:
        np.multiply(new_covariances, 1.0 - rho, out=new_covariances)
        state.covariances += new_covariances
    else:
        state.covariances += (1.0 - rho) * new_covariances
    return state


def _greedy_assign(scores: np.ndarray) -> tuple[np.ndarray, bool]:
    """Per-branch hard decision without antenna reuse.

    Plain per-variable argmax when no antenna is picked twice; otherwise
    repeatedly assign the best remaining (variable, antenna) pair.
    Returns 1-based antenna indices per variable and the collision flag.
    """
    n_vars, _ = scores.shape
    naive = scores.argmax(axis=1)
    if np.unique(naive).size == n_vars:
        return naive + 1, False
    work = scores.astype(np.float64, copy=True)
    picks = np.empty(n_vars, dtype=np.int64)
    for _ in range(n_vars):
        v, t = np.unravel_index(np.argmax(work), work.shape)
        picks[v] = t + 1
        work[v, :] = -np.inf
        work[:, t] = -np.inf
    return picks, True


@njit(cache=True)
def _iterate_kernel(replicas, covariances, srows, srows_sq, y, log_prior,
                    uniform_prior, n0_half, floor, rho):
    """Jitted sequential sweep; mirrors the step functions exactly.

    Compiled to keep per-iteration cost on the arithmetic (the covariance
    quadratic forms and damped covariance updates), not on array-dispatch
    overhead, which at n_tx = 16 otherwise rivals the work itself.
    """
    n_vars, n_factors, n_tx = replicas.shape
    means = np.empty((n_vars, n_factors))
    quads = np.empty((n_vars, n_factors))
    for v in range(n_vars):
        for n in range(n_factors):
            m = 0.0
            for t in range(n_tx):
                m += srows[v, n, t] * replicas[v, n, t]
            means[v, n] = m
            q = 0.0
            for i in range(n_tx):
                acc = 0.0
                for j in range(n_tx):
                    acc += covariances[v, n, i, j] * srows[v, n, j]
                q += acc * srows[v, n, i]
            quads[v, n] = q
    scores = np.empty(n_tx)
    probs = np.empty((n_factors, n_tx))
    ratio = np.empty(n_factors)
    inv_var = np.empty(n_factors)
    eta_full = np.empty(n_tx)
    lam_full = np.empty(n_tx)
    one_rho = 1.0 - rho
    for v in range(n_vars):
        for t in range(n_tx):
            eta_full[t] = 0.0
            lam_full[t] = 0.0
        for n in range(n_factors):
            total_mean = 0.0
            total_quad = 0.0
            for u in range(n_vars):
                total_mean += means[u, n]
                total_quad += quads[u, n]
            residual = y[n] - total_mean + means[v, n]
            variance = total_quad - quads[v, n] + n0_half
            if variance < floor:
                variance = floor
            r = residual / variance
            ratio[n] = r
            inv_var[n] = 1.0 / variance
            for t in range(n_tx):
                eta_full[t] += r * srows[v, n, t]
                lam_full[t] += inv_var[n] * srows_sq[v, n, t]
        for n in range(n_factors):
            # leave-one-out score: full sums minus the edge's own term
            smax = -1.0e300
            for t in range(n_tx):
                s = (eta_full[t] - ratio[n] * srows[v, n, t]
                     - 0.5 * (lam_full[t] - inv_var[n] * srows_sq[v, n, t]))
                if not uniform_prior:
                    s += log_prior[v, t]
                scores[t] = s
                if s > smax:
                    smax = s
            psum = 0.0
            for t in range(n_tx):
                s = scores[t] - smax
                if s < -60.0:
                    s = -60.0
                e = np.exp(s)
                probs[n, t] = e
                psum += e
            for t in range(n_tx):
                probs[n, t] /= psum
        for n in range(n_factors):
            for t in range(n_tx):
                replicas[v, n, t] = rho * replicas[v, n, t] + one_rho * probs[n, t]
            for i in range(n_tx):
                for j in range(n_tx):
                    g = -probs[n, i] * probs[n, j]
                    if i == j:
                        g += probs[n, i]
                    covariances[v, n, i, j] = (
                        rho * covariances[v, n, i, j] + one_rho * g
                    )
            m = 0.0
            for t in range(n_tx):
                m += srows[v, n, t] * replicas[v, n, t]
            means[v, n] = m
            q = 0.0
            for i in range(n_tx):
                acc = 0.0
                for j in range(n_tx):
                    acc += covariances[v, n, i, j] * srows[v, n, j]
                q += acc * srows[v, n, i]
            quads[v, n] = q


def warm_up() -> None:
    """Compile (or load the cached) iteration kernel ahead of use."""
    z2 = np.full((2, 2, 2), 0.5)
    _iterate_kernel(
        z2.copy(), replica_covariance(z2.copy()), z2.copy(), z2.copy(),
        np.zeros(2), np.log(z2[:, 0, :].copy()), True, 0.5, 0.5 + 1e-12, 0.5,
    )


def iterate(state: BeliefState, params: DecoderParams) -> BeliefState:
    """One full message-passing iteration: a sequential sweep over variables.

    Each variable's edges run the complete update block (soft-IC,
    conditional variances, leave-one-out messages, posterior, damping)
    against the freshest beliefs of the other variables. Per-variable
    contribution means and covariance quadratic forms are cached and
    refreshed after each update, so a sweep costs the same order as one
    parallel round.
    """
    _iterate_kernel(
        state.replicas,
        state.covariances,
        state.scaled_rows,
        state.scaled_rows_sq,
        state.y,
        state.log_prior,
        state.uniform_prior,
        state.n0 / 2.0,
        state.n0 / 2.0 + state.variance_floor,
        params.rho,
    )
    return state


def consensus_scores(state: BeliefState, prior: np.ndarray | None = None) -> np.ndarray:
    """Per-variable consensus scores: full factor sums without self-exclusion.

    Recomputes residuals and variances from the current (damped) beliefs
    and stores the aggregated information vectors / precision diagonals
    on the state.
    """
    soft_ic(state)
    conditional_variances(state)
    ratio = state.residuals / state.variances
    state.eta_consensus = np.einsum("vn,vnt->vt", ratio, state.scaled_rows)
    state.lam_consensus = np.einsum(
        "vn,vnt->vt", 1.0 / state.variances, state.scaled_rows_sq
    )
    if prior is None:
        log_prior = state.log_prior
    else:
        with np.errstate(divide="ignore"):
            log_prior = np.log(np.asarray(prior, dtype=np.float64))
    return state.eta_consensus - 0.5 * state.lam_consensus + log_prior


def consensus_decision(state: BeliefState, prior: np.ndarray | None = None) -> DecodeResult:
    """Aggregate all factor nodes without self-exclusion and decide indices.

    Picks each branch's p antennas greedily without replacement from the
    consensus scores (identical to independent argmax whenever no
    collision occurs).
    """
    scores = consensus_scores(state, prior)
    probs = _score_probabilities(scores)
    p = state.p
    k_r, hit_r = _greedy_assign(scores[:p])
    k_i, hit_i = _greedy_assign(scores[p:])
    return DecodeResult(
        k_r_hat=np.sort(k_r),
        k_i_hat=np.sort(k_i),
        probabilities=probs,
        iterations_run=0,
        collision_resolved=hit_r or hit_i,
    )


def _entropy_bits(scores: np.ndarray) -> float:
    probs = _score_probabilities(scores)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0, probs * np.log2(probs), 0.0)
    return float(-terms.sum(axis=1).mean())


def decode(
    real_system: RealSystem,
    pilots,
    params: DecoderParams | None = None,
    prior: np.ndarray | None = None,
    entropy_trace: list | None = None,
) -> DecodeResult:
    """Run the full message-passing schedule and return hard decisions.

    Executes tau_max damped sequential sweeps over all edges of both
    branches (no early stopping), then the consensus decision. If
    entropy_trace is a list, the mean consensus-belief entropy (bits) is
    appended once per iteration.
    """
    params = params or DecoderParams()
    state = init_state(real_system, pilots, params, prior)
    for _ in range(params.tau_max):
        iterate(state, params)
        if entropy_trace is not None:
            entropy_trace.append(_entropy_bits(consensus_scores(state)))
    result = consensus_decision(state)
    return DecodeResult(
        k_r_hat=result.k_r_hat,
        k_i_hat=result.k_i_hat,
        probabilities=result.probabilities,
        iterations_run=params.tau_max,
        collision_resolved=result.collision_resolved,
    )
