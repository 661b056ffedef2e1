"""Exact reference detectors: brute-force marginal posteriors, joint ML, LMMSE.

These are the ground-truth oracles that every approximate detector in the
package is measured against. They enumerate the full symbol lattice and are
therefore capped at 2^24 hypotheses.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .channel import ChannelInstance, Constellation
from .errors import CapacityError

LLR_CLAMP = 40.0
MAX_LATTICE_BITS = 24


def _check_capacity(m_tx, bits_per_symbol):
    if m_tx * bits_per_symbol > MAX_LATTICE_BITS:
        raise CapacityError(
            f"lattice of 2^{m_tx * bits_per_symbol} points exceeds the 2^{MAX_LATTICE_BITS} cap"
        )


def lattice_indices(m_tx, size):
    """All index vectors of the symbol lattice, in lexicographic order."""
    grids = np.indices((size,) * m_tx).reshape(m_tx, -1).T
    return np.ascontiguousarray(grids)


def _joint_log_posterior(channel, constellation, y):
    """Unnormalised log posterior over the full lattice, plus the index table."""
    H = channel.H
    m = channel.n_tx
    idx = lattice_indices(m, constellation.size)
    symbols = constellation.points[idx]  # (L, M)
    resid = y[None, :] - symbols @ H.T  # (L, N)
    logp = -np.sum(np.abs(resid) ** 2, axis=1) / channel.sigma2
    logp = logp + np.sum(np.log(constellation.prior[idx]), axis=1)
    return logp, idx


def map_marginals(channel: ChannelInstance, constellation: Constellation, y) -> np.ndarray:
    """Exact per-symbol posterior pmfs by full lattice enumeration.

    Returns an (M, size) array whose rows sum to one. Accumulation is done in
    the log domain so high-SNR instances do not underflow.
    """
    _check_capacity(channel.n_tx, constellation.bits_per_symbol)
    y = np.asarray(y)
    logp, idx = _joint_log_posterior(channel, constellation, y)
    m, size = channel.n_tx, constellation.size
    table = logp.reshape((size,) * m)
    out = np.empty((m, size))
    for j in range(m):
        axes = tuple(k for k in range(m) if k != j)
        mj = table.max(axis=axes)
        out[j] = mj + np.log(np.sum(np.exp(table - mj.reshape(
            tuple(size if k == j else 1 for k in range(m)))), axis=axes))
    out -= out.max(axis=1, keepdims=True)
    p = np.exp(out)
    p /= p.sum(axis=1, keepdims=True)
    return p


def ml_hard(channel: ChannelInstance, constellation: Constellation, y) -> np.ndarray:
    """Joint maximum-likelihood decision (MAP under a uniform prior).

    Ties resolve to the lexicographically smallest index vector.
    """
    _check_capacity(channel.n_tx, constellation.bits_per_symbol)
    H = channel.H
    idx = lattice_indices(channel.n_tx, constellation.size)
    resid = np.asarray(y)[None, :] - constellation.points[idx] @ H.T
    metric = np.sum(np.abs(resid) ** 2, axis=1)
    return idx[int(np.argmin(metric))].copy()


def llr_from_marginals(posteriors, constellation: Constellation) -> np.ndarray:
    """Per-bit log-likelihood ratios log(P[b=0] / P[b=1]), clamped to +-40.

    posteriors is an (M, size) table of per-symbol pmfs.
    """
    post = np.asarray(posteriors, dtype=float)
    labels = constellation.bit_labels  # (size, m)
    p0 = post @ (1.0 - labels)  # (M, m)
    p1 = post @ labels.astype(float)
    with np.errstate(divide="ignore"):
        llr = np.log(p0) - np.log(p1)
    return np.clip(llr, -LLR_CLAMP, LLR_CLAMP)


@dataclass(frozen=True)
class LmmseResult:
    """Linear MMSE estimates and the per-component residual MSE."""

    estimates: np.ndarray
    mmse: np.ndarray


def lmmse(channel: ChannelInstance, y) -> LmmseResult:
    """Linear MMSE estimator x_hat_j = h_j^H K^{-1} y with K = H H^H + sigma2 I.

    The per-component minimum MSE is 1 - h_j^H K^{-1} h_j, strictly inside
    (0, 1) for positive noise power and nonzero columns.
    """
    H = channel.H
    K = H @ H.conj().T + channel.sigma2 * np.eye(channel.n_rx)
    sol = np.linalg.solve(K, np.column_stack([H, np.asarray(y)]))
    KinvH, Kinvy = sol[:, :-1], sol[:, -1]
    estimates = H.conj().T @ Kinvy
    mmse = 1.0 - np.real(np.sum(H.conj() * KinvH, axis=0))
    return LmmseResult(estimates=estimates, mmse=mmse)
