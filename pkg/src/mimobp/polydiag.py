"""Order-2 channel shortening and tail-biting forward/backward detection.

A bank of multi-modal MMSE filters turns the M-stream channel into an
effective two-tap tail-biting chain: filter r passes its target stream and
the previous stream around the ring, and suppresses everything else into a
Gaussian remainder. Unlike the ring BP detector, both recursion directions
here share the same effective observations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelInstance, Constellation
from .discrete_bp import BeliefState, BpConfig, _delta, _Domain
from .linalg import hermitian_solve, partial_covariance


@dataclass(frozen=True)
class BiDiagonalized:
    """Shortening filters and effective-channel taps, in ring order.

    Row r of the effective model reads
        y'_r = a_diag[r] * x_{order[r]} + a_sub[r] * x_{order[r-1]} + n'_r,
    with E|n'_r|^2 = sigma2_eff[r] = a_diag[r]. ``leakage`` reports the
    residual power of the streams the filter was meant to suppress.
    """

    C: np.ndarray  # (N, M), column r = filter for ring position r
    a_diag: np.ndarray  # (M,) real
    a_sub: np.ndarray  # (M,) complex
    sigma2_eff: np.ndarray  # (M,) real
    leakage: np.ndarray  # (M,) real diagnostic
    order: tuple


def bidiagonalize(channel: ChannelInstance, permutation=None) -> BiDiagonalized:
    """Build the two-tap shortening filters c_r = K_r^{-1} h_target.

    K_r is the covariance of noise plus every stream outside {target,
    previous}; the filter maximises the target's SINR against that
    covariance.
    """
    m = channel.n_tx
    if m < 2:
        raise ValueError("bi-diagonalization needs at least two streams")
    if permutation is None:
        order = tuple(range(m))
    else:
        order = tuple(int(p) for p in permutation)
        if sorted(order) != list(range(m)):
            raise ValueError(f"permutation must be a bijection on 0..{m - 1}")
    H = channel.H
    C = np.empty((channel.n_rx, m), dtype=complex)
    a_diag = np.empty(m)
    a_sub = np.empty(m, dtype=complex)
    leakage = np.empty(m)
    for r in range(m):
        target, prev = order[r], order[(r - 1) % m]
        K = partial_covariance(H, channel.sigma2, (target, prev))
        c = hermitian_solve(K, H[:, target])
        C[:, r] = c
        a_diag[r] = np.vdot(c, H[:, target]).real
        a_sub[r] = np.vdot(c, H[:, prev])
        others = [k for k in range(m) if k not in (target, prev)]
        leakage[r] = sum(abs(np.vdot(c, H[:, k])) ** 2 for k in others)
    return BiDiagonalized(C=C, a_diag=a_diag, a_sub=a_sub,
                          sigma2_eff=a_diag.copy(), leakage=leakage, order=order)


def effective_observation(bd: BiDiagonalized, y) -> np.ndarray:
    """Filter outputs y'_r = c_r^H y, in ring order."""
    return bd.C.conj().T @ np.asarray(y)


def forward_backward_detect(bd: BiDiagonalized, constellation: Constellation, y,
                            config: BpConfig) -> BeliefState:
    """Tail-biting forward/backward recursion on the shortened channel.

    One iteration is one full turn in each direction; messages carry the
    symbol prior forward, and beliefs combine the prior with both directions'
    extrinsic messages.
    """
    m, size = bd.a_diag.shape[0], constellation.size
    y_eff = effective_observation(bd, y)
    points = constellation.points
    dom = _Domain(config.log_domain)

    def factor_table(r):
        # [t, s] = log density of y'_r given previous symbol t and target s
        mu = bd.a_diag[r] * points[None, :] + bd.a_sub[r] * points[:, None]
        return (-np.abs(y_eff[r] - mu) ** 2 / bd.sigma2_eff[r]
                - np.log(np.pi * bd.sigma2_eff[r]))

    tables = [dom.from_log(factor_table(r)) for r in range(m)]
    log_prior = np.log(constellation.prior)
    prior = dom.from_log(log_prior)

    alpha = dom.uniform((m, size), size)  # forward message into position r
    beta = dom.uniform((m, size), size)
    beliefs = np.tile(constellation.prior, (m, 1))
    deltas = []

    for _ in range(config.iterations):
        for r in range(m):
            prev = (r - 1) % m
            # factor r marginalises the previous symbol: sum_t f_r(t, s) p(t) alpha_prev(t)
            inc = dom.combine(prior, alpha[prev])
            alpha[r] = dom.normalize(dom.translate(np.swapaxes(tables[r], 0, 1), inc))
        for r in reversed(range(m)):
            nxt = (r + 1) % m
            inc = dom.combine(prior, beta[nxt])
            beta[r] = dom.normalize(dom.translate(tables[nxt], inc))
        new_beliefs = np.empty((m, size))
        for r in range(m):
            new_beliefs[bd.order[r]] = dom.to_prob(dom.combine(prior, alpha[r], beta[r]))
        deltas.append(_delta(new_beliefs, beliefs))
        beliefs = new_beliefs
    return BeliefState(beliefs=beliefs, iterations=config.iterations,
                       delta_trace=np.array(deltas))
