"""Discrete-alphabet belief propagation detectors.

Three schemes share the message plumbing here:

* factor-graph BP over the received vector (one factor per observation, or a
  single joint factor that reproduces exact marginalisation in one pass),
* BP over the fully-connected pairwise graph (synchronous schedule), and
* BP over the ring, a tail-biting forward/backward recursion whose two
  directions use separately optimised links.

Messages and beliefs are probability vectors over the constellation and are
renormalised after every update. Arithmetic runs in the log domain by
default so near-noiseless instances do not underflow; the linear-domain path
exists for cross-checking at moderate SNR.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelInstance, Constellation
from .errors import CapacityError
from .exact import MAX_LATTICE_BITS, llr_from_marginals
from .pairwise import PairwiseGraph, Topology, translate_log_table


@dataclass(frozen=True)
class BpConfig:
    """Knobs shared by the iterative detectors.

    damping blends each new message with the previous one in the probability
    domain (0 disables it, matching the reference schedules).
    """

    iterations: int = 4
    damping: float = 0.0
    log_domain: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")


@dataclass
class BeliefState:
    """Per-node beliefs plus the per-iteration change trace."""

    beliefs: np.ndarray  # (M, size) rows summing to one
    iterations: int
    delta_trace: np.ndarray  # max_j L1 belief change per iteration


def hard_decide(beliefs) -> np.ndarray:
    """Per-node argmax with lowest-index tie break."""
    return np.argmax(np.asarray(beliefs), axis=1)


def soft_output(beliefs, constellation: Constellation) -> np.ndarray:
    """Clamped per-bit LLRs derived from the beliefs."""
    return llr_from_marginals(beliefs, constellation)


def _lse(a, axis):
    m = np.max(a, axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def _norm_log(lp):
    return lp - _lse(lp, axis=-1)[..., None]


def _norm_lin(p):
    return p / p.sum(axis=-1, keepdims=True)


def _delta(beliefs, prev):
    return float(np.max(np.sum(np.abs(beliefs - prev), axis=1)))


class _Domain:
    """Message arithmetic in either the log or the linear domain."""

    def __init__(self, log: bool):
        self.log = log

    def from_log(self, table):
        return table if self.log else np.exp(table)

    def uniform(self, shape, size):
        if self.log:
            return np.full(shape, -np.log(size))
        return np.full(shape, 1.0 / size)

    def normalize(self, msg):
        return _norm_log(msg) if self.log else _norm_lin(msg)

    def translate(self, table, msg):
        """Marginalise a kernel table [..., s, t] against a message over t."""
        if self.log:
            return _lse(table + msg[..., None, :], axis=-1)
        return np.einsum("...st,...t->...s", table, msg)

    def combine(self, *msgs):
        if self.log:
            return sum(msgs)
        out = msgs[0].copy()
        for m in msgs[1:]:
            out = out * m
        return out

    def to_prob(self, msg):
        return np.exp(_norm_log(msg)) if self.log else _norm_lin(msg)

    def damp(self, new, old, damping):
        if damping == 0.0:
            return new
        new_p, old_p = self.to_prob(new), self.to_prob(old)
        mixed = (1.0 - damping) * new_p + damping * old_p
        if not self.log:
            return mixed
        with np.errstate(divide="ignore"):  # sharp messages may carry true zeros
            return np.log(mixed)


# ---------------------------------------------------------------------------
# Factor-graph BP over the raw observations


def bp1_factor_graph(channel: ChannelInstance, constellation: Constellation, y,
                     config: BpConfig, singly_connected: bool = False) -> BeliefState:
    """Sum-product over observation factor nodes and symbol variable nodes.

    With ``singly_connected`` a single factor carries the joint likelihood of
    the whole received vector; that graph is a tree, so one iteration already
    yields the exact posterior marginals. The default uses one factor per
    receive dimension, whose messages marginalise the per-observation
    likelihood over the interfering symbols.
    """
    m, size = channel.n_tx, constellation.size
    if m * constellation.bits_per_symbol > MAX_LATTICE_BITS:
        raise CapacityError("factor marginalisation would exceed the lattice cap")
    y = np.asarray(y)
    shape = (size,) * m
    grids = np.indices(shape)
    points = constellation.points

    if singly_connected:
        mu = sum(channel.H[:, j][(...,) + (None,) * m] * points[grids[j]] for j in range(m))
        tables = [-np.sum(np.abs(y[(...,) + (None,) * m] - mu) ** 2, axis=0) / channel.sigma2]
    else:
        tables = []
        for k in range(channel.n_rx):
            mu = sum(channel.H[k, j] * points[grids[j]] for j in range(m))
            tables.append(-np.abs(y[k] - mu) ** 2 / channel.sigma2)

    n_fac = len(tables)
    log_prior = np.log(constellation.prior)
    lam = np.tile(log_prior, (n_fac, m, 1))
    pi = np.zeros((n_fac, m, size))
    beliefs = np.tile(constellation.prior, (m, 1))
    deltas = []

    def axis_view(vec, j):
        return vec.reshape(tuple(size if k == j else 1 for k in range(m)))

    for _ in range(config.iterations):
        for f in range(n_fac):
            w = tables[f] + sum(axis_view(lam[f, l], l) for l in range(m))
            for j in range(m):
                axes = tuple(k for k in range(m) if k != j)
                # lam[f, j] is constant along the marginalised axes, so it can
                # be pulled out of the log-sum-exp and removed afterwards.
                pi[f, j] = _norm_log(_lse(w, axis=axes) - lam[f, j])
        log_b = _norm_log(log_prior[None, :] + pi.sum(axis=0))
        new_beliefs = np.exp(log_b)
        deltas.append(_delta(new_beliefs, beliefs))
        beliefs = new_beliefs
        lam = _norm_log(log_b[None, :, :] - pi)
    return BeliefState(beliefs=beliefs, iterations=config.iterations,
                       delta_trace=np.array(deltas))


# ---------------------------------------------------------------------------
# BP over the pairwise graphs


def _require_uniform(constellation):
    if not constellation.uniform_prior():
        raise ValueError(
            "pairwise-graph BP embeds a unit-Gaussian prior in its translation "
            "kernels and supports uniform symbol priors only"
        )


def _prior_state(constellation, m, config):
    return BeliefState(beliefs=np.tile(constellation.prior, (m, 1)),
                       iterations=config.iterations,
                       delta_trace=np.zeros(config.iterations))


def bp2_fully_connected(graph: PairwiseGraph, constellation: Constellation,
                        config: BpConfig) -> BeliefState:
    """Synchronous BP over the fully-connected pairwise graph.

    Each directed edge first collects the extrinsic product of the other
    incoming messages, then pushes it through the pair's translation kernel.
    For M = 2 the graph coincides with the two-node ring and the schedule
    degenerates to the ring recursion, which this routine delegates to so
    the two detectors stay exactly equal there.
    """
    if graph.topology is not Topology.FULLY_CONNECTED:
        raise ValueError("graph topology must be fully connected")
    _require_uniform(constellation)
    m, size = graph.n_nodes, constellation.size
    if m == 1:
        return _prior_state(constellation, m, config)
    if m == 2:
        return _ring_pass(graph, constellation, config)

    dom = _Domain(config.log_domain)
    points = constellation.points
    table = np.zeros((m, m, size, size))
    for (j, i), link in graph.links.items():
        table[j, i] = translate_log_table(link, points)
    table = dom.from_log(table)

    pi = dom.uniform((m, m, size), size)  # [i, j] holds the i -> j message
    beliefs = np.tile(constellation.prior, (m, 1))
    deltas = []
    off_diag = ~np.eye(m, dtype=bool)
    neutral = 0.0 if config.log_domain else 1.0

    for _ in range(config.iterations):
        incoming = np.where(off_diag[:, :, None], pi, neutral)
        col = incoming.sum(axis=0) if config.log_domain else incoming.prod(axis=0)
        # extrinsic toward j: everything into i except what j itself sent
        if config.log_domain:
            lam = dom.normalize(col[:, None, :] - np.swapaxes(pi, 0, 1))
        else:
            lam = dom.normalize(col[:, None, :] / np.swapaxes(pi, 0, 1))
        cand = dom.normalize(dom.translate(np.swapaxes(table, 0, 1), lam))
        cand = dom.damp(cand, pi, config.damping)
        pi = np.where(off_diag[:, :, None], cand, pi)
        incoming = np.where(off_diag[:, :, None], pi, neutral)
        summed = incoming.sum(axis=0) if config.log_domain else incoming.prod(axis=0)
        new_beliefs = dom.to_prob(summed)
        deltas.append(_delta(new_beliefs, beliefs))
        beliefs = new_beliefs
    return BeliefState(beliefs=beliefs, iterations=config.iterations,
                       delta_trace=np.array(deltas))


def bp3_ring(graph: PairwiseGraph, constellation: Constellation,
             config: BpConfig) -> BeliefState:
    """Tail-biting forward/backward BP over the ring.

    One iteration is one complete turn: the forward messages propagate
    sequentially all the way around the ring, then the backward messages do
    the same in the opposite direction. The two directions use their own
    links, so their translated observations differ in general.
    """
    if graph.topology is not Topology.RING and graph.n_nodes != 2:
        raise ValueError("graph topology must be a ring")
    _require_uniform(constellation)
    if graph.n_nodes == 1:
        return _prior_state(constellation, 1, config)
    return _ring_pass(graph, constellation, config)


def _ring_pass(graph: PairwiseGraph, constellation: Constellation,
               config: BpConfig) -> BeliefState:
    m, size = graph.n_nodes, constellation.size
    order = graph.order
    dom = _Domain(config.log_domain)
    points = constellation.points
    # forward link at position r translates order[r]'s message toward order[r+1]
    lt_f = [dom.from_log(translate_log_table(graph.link(order[(r + 1) % m], order[r]), points))
            for r in range(m)]
    lt_b = [dom.from_log(translate_log_table(graph.link(order[(r - 1) % m], order[r]), points))
            for r in range(m)]

    fwd = dom.uniform((m, size), size)  # fwd[r]: forward message into position r
    bwd = dom.uniform((m, size), size)
    beliefs = np.tile(constellation.prior, (m, 1))
    deltas = []

    def step(table, incoming, previous):
        new = dom.normalize(dom.translate(table, incoming))
        return dom.damp(new, previous, config.damping)

    for _ in range(config.iterations):
        for r in range(m):
            prev = (r - 1) % m
            fwd[r] = step(lt_f[prev], fwd[prev], fwd[r])
        for r in reversed(range(m)):
            nxt = (r + 1) % m
            bwd[r] = step(lt_b[nxt], bwd[nxt], bwd[r])
        new_beliefs = np.empty((m, size))
        for r in range(m):
            new_beliefs[order[r]] = dom.to_prob(dom.combine(fwd[r], bwd[r]))
        deltas.append(_delta(new_beliefs, beliefs))
        beliefs = new_beliefs
    return BeliefState(beliefs=beliefs, iterations=config.iterations,
                       delta_trace=np.array(deltas))
