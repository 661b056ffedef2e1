"""Vectorised detector kernels for Monte Carlo sweeps.

Every kernel here stacks trials along a leading batch axis and reproduces
the corresponding single-instance reference implementation (the sibling
modules) to numerical precision; the test suite cross-checks each pair.
Shapes: H is (B, N, M), y is (B, N), messages carry a trailing
constellation axis of length Q.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import Constellation
from .errors import CapacityError
from .exact import MAX_LATTICE_BITS, lattice_indices


def _lse(a, axis):
    m = np.max(a, axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def _norm_log(lp):
    return lp - _lse(lp, axis=-1)[..., None]


def full_covariance(H, sigma2):
    B, n_rx, _ = H.shape
    K = np.einsum("bnm,bpm->bnp", H, H.conj())
    K[:, np.arange(n_rx), np.arange(n_rx)] += sigma2
    return K


def lmmse_batch(H, y, sigma2):
    """Batched linear MMSE: returns (estimates (B, M), per-component MSE)."""
    m = H.shape[2]
    K = full_covariance(H, sigma2)
    rhs = np.concatenate([H, y[:, :, None]], axis=2)
    sol = np.linalg.solve(K, rhs)
    xhat = np.einsum("bnm,bn->bm", H.conj(), sol[:, :, m])
    mmse = 1.0 - np.real(np.einsum("bnm,bnm->bm", H.conj(), sol[:, :, :m]))
    return xhat, mmse


def _lattice_metrics(H, y, constellation):
    """Squared residual |y - H s|^2 for every lattice point; (B, L)."""
    m = H.shape[2]
    if m * constellation.bits_per_symbol > MAX_LATTICE_BITS:
        raise CapacityError("lattice enumeration exceeds the 2^24 cap")
    lat = lattice_indices(m, constellation.size)
    syms = constellation.points[lat]
    resid = y[:, None, :] - np.einsum("bnm,lm->bln", H, syms)
    return np.sum(np.abs(resid) ** 2, axis=2), lat


def ml_hard_batch(H, y, sigma2, constellation):
    """Joint ML decisions; argmin keeps the lexicographically smallest tie."""
    metric, lat = _lattice_metrics(H, y, constellation)
    return lat[np.argmin(metric, axis=1)]


def map_marginals_batch(H, y, sigma2, constellation):
    """Exact per-symbol posteriors for a batch; (B, M, Q)."""
    metric, lat = _lattice_metrics(H, y, constellation)
    m, size = H.shape[2], constellation.size
    logp = -metric / sigma2 + np.sum(np.log(constellation.prior)[lat], axis=1)[None, :]
    table = logp.reshape((-1,) + (size,) * m)
    out = np.empty((H.shape[0], m, size))
    for j in range(m):
        axes = tuple(1 + k for k in range(m) if k != j)
        out[:, j, :] = _lse(table, axis=axes)
    p = np.exp(_norm_log(out))
    return p / p.sum(axis=2, keepdims=True)


# ---------------------------------------------------------------------------
# pairwise link coefficients


@dataclass
class LinkTables:
    """Ordered-pair filter outputs for a batch; index [b, target j, known i]."""

    y_prime: np.ndarray  # (B, M, M) complex
    a_diag: np.ndarray  # (B, M, M) real, equals sigma2_cond
    a_cross: np.ndarray  # (B, M, M) complex
    u: np.ndarray
    v: np.ndarray
    u_var: np.ndarray
    v_var: np.ndarray


def link_tables(H, y, sigma2) -> LinkTables:
    B, n_rx, m = H.shape
    K = full_covariance(H, sigma2)
    y_prime = np.zeros((B, m, m), dtype=complex)
    a_diag = np.zeros((B, m, m))
    a_cross = np.zeros((B, m, m), dtype=complex)
    for j in range(m):
        hj = H[:, :, j]
        for i in range(m):
            if i == j:
                continue
            hi = H[:, :, i]
            Kji = K - np.einsum("bn,bp->bnp", hj, hj.conj()) - np.einsum("bn,bp->bnp", hi, hi.conj())
            c = np.linalg.solve(Kji, hj[:, :, None])[:, :, 0]
            a_diag[:, j, i] = np.real(np.einsum("bn,bn->b", c.conj(), hj))
            a_cross[:, j, i] = np.einsum("bn,bn->b", c.conj(), hi)
            y_prime[:, j, i] = np.einsum("bn,bn->b", c.conj(), y)
    scale = 1.0 + a_diag
    u = y_prime / scale
    v = -a_cross / scale
    return LinkTables(y_prime=y_prime, a_diag=a_diag, a_cross=a_cross,
                      u=u, v=v, u_var=1.0 / scale, v_var=np.abs(v) ** 2)


def _translate_log_tables(links: LinkTables, points):
    """(B, M, M, Q, Q) array; [b, j, i, s, t] = log p(x_j = s | x_i = t)."""
    scale = 1.0 + links.a_diag
    mean = (links.y_prime[..., None] - links.a_cross[..., None] * points) / scale[..., None]
    diff = points[:, None] - mean[..., None, :]
    return (np.log(scale / np.pi)[..., None, None]
            - scale[..., None, None] * np.abs(diff) ** 2)


def bp2_batch(links: LinkTables, constellation: Constellation, iterations: int,
              order=None) -> np.ndarray:
    """Beliefs of the fully-connected discrete scheme; (B, M, Q)."""
    B, m, _ = links.a_diag.shape
    size = constellation.size
    if m == 2:
        return bp3_batch(links, constellation, iterations, order=(0, 1))
    log_t = _translate_log_tables(links, constellation.points)
    log_t = np.swapaxes(log_t, 1, 2)  # [b, i, j, s, t]
    pi = np.full((B, m, m, size), -np.log(size))
    off = ~np.eye(m, dtype=bool)
    for _ in range(iterations):
        inc = np.where(off[None, :, :, None], pi, 0.0)
        col = inc.sum(axis=1)  # [b, i, :] total into i
        lam = _norm_log(col[:, :, None, :] - np.swapaxes(pi, 1, 2))
        pi = _norm_log(_lse(log_t + lam[:, :, :, None, :], axis=4))
    inc = np.where(off[None, :, :, None], pi, 0.0)
    return np.exp(_norm_log(inc.sum(axis=1)))


def bp3_batch(links: LinkTables, constellation: Constellation, iterations: int,
              order=None) -> np.ndarray:
    """Beliefs of the ring scheme, full sequential turns; (B, M, Q)."""
    B, m, _ = links.a_diag.shape
    size = constellation.size
    order = tuple(range(m)) if order is None else tuple(order)
    log_t = _translate_log_tables(links, constellation.points)
    lt_f = [log_t[:, order[(r + 1) % m], order[r]] for r in range(m)]
    lt_b = [log_t[:, order[(r - 1) % m], order[r]] for r in range(m)]
    fwd = np.full((B, m, size), -np.log(size))
    bwd = np.full((B, m, size), -np.log(size))
    for _ in range(iterations):
        for r in range(m):
            prev = (r - 1) % m
            fwd[:, r] = _norm_log(_lse(lt_f[prev] + fwd[:, prev][:, None, :], axis=2))
        for r in reversed(range(m)):
            nxt = (r + 1) % m
            bwd[:, r] = _norm_log(_lse(lt_b[nxt] + bwd[:, nxt][:, None, :], axis=2))
    beliefs = np.empty((B, m, size))
    for r in range(m):
        beliefs[:, order[r]] = np.exp(_norm_log(fwd[:, r] + bwd[:, r]))
    return beliefs


def fb_batch(H, y, sigma2, constellation: Constellation, iterations: int,
             order=None) -> np.ndarray:
    """Beliefs of the shortened-channel forward/backward detector; (B, M, Q)."""
    B, n_rx, m = H.shape
    size = constellation.size
    order = tuple(range(m)) if order is None else tuple(order)
    points = constellation.points
    K = full_covariance(H, sigma2)
    tables = []
    for r in range(m):
        target, prev = order[r], order[(r - 1) % m]
        ht, hp = H[:, :, target], H[:, :, prev]
        Kr = K - np.einsum("bn,bp->bnp", ht, ht.conj()) - np.einsum("bn,bp->bnp", hp, hp.conj())
        c = np.linalg.solve(Kr, ht[:, :, None])[:, :, 0]
        a_diag = np.real(np.einsum("bn,bn->b", c.conj(), ht))
        a_sub = np.einsum("bn,bn->b", c.conj(), hp)
        y_eff = np.einsum("bn,bn->b", c.conj(), y)
        mu = a_diag[:, None, None] * points[None, None, :] + a_sub[:, None, None] * points[None, :, None]
        tables.append(-np.abs(y_eff[:, None, None] - mu) ** 2 / a_diag[:, None, None])
    log_prior = np.log(constellation.prior)
    alpha = np.full((B, m, size), -np.log(size))
    beta = np.full((B, m, size), -np.log(size))
    for _ in range(iterations):
        for r in range(m):
            prev = (r - 1) % m
            inc = log_prior[None, :] + alpha[:, prev]
            alpha[:, r] = _norm_log(_lse(tables[r] + inc[:, :, None], axis=1))
        for r in reversed(range(m)):
            nxt = (r + 1) % m
            inc = log_prior[None, :] + beta[:, nxt]
            beta[:, r] = _norm_log(_lse(tables[nxt] + inc[:, None, :], axis=2))
    beliefs = np.empty((B, m, size))
    for r in range(m):
        beliefs[:, order[r]] = np.exp(_norm_log(log_prior[None, :] + alpha[:, r] + beta[:, r]))
    return beliefs


# ---------------------------------------------------------------------------
# Gaussian schemes (fixed sweep counts keep outputs independent of batching)


def gbp3g_batch(links: LinkTables, sweeps: int, order=None) -> np.ndarray:
    """Belief means of the ring Gaussian recursion after ``sweeps`` hops."""
    B, m, _ = links.a_diag.shape
    order = tuple(range(m)) if order is None else tuple(order)
    into_f = [(order[r], order[(r - 1) % m]) for r in range(m)]
    into_b = [(order[r], order[(r + 1) % m]) for r in range(m)]
    u_f = np.stack([links.u[:, j, i] for j, i in into_f], axis=1)
    v_f = np.stack([links.v[:, j, i] for j, i in into_f], axis=1)
    uv_f = np.stack([links.u_var[:, j, i] for j, i in into_f], axis=1)
    vv_f = np.stack([links.v_var[:, j, i] for j, i in into_f], axis=1)
    u_b = np.stack([links.u[:, j, i] for j, i in into_b], axis=1)
    v_b = np.stack([links.v[:, j, i] for j, i in into_b], axis=1)
    uv_b = np.stack([links.u_var[:, j, i] for j, i in into_b], axis=1)
    vv_b = np.stack([links.v_var[:, j, i] for j, i in into_b], axis=1)

    mu_f = np.zeros((B, m), dtype=complex)
    var_f = np.ones((B, m))
    mu_b = np.zeros((B, m), dtype=complex)
    var_b = np.ones((B, m))
    for _ in range(sweeps):
        mu_f = u_f + v_f * np.roll(mu_f, 1, axis=1)
        var_f = uv_f + vv_f * np.roll(var_f, 1, axis=1)
        mu_b = u_b + v_b * np.roll(mu_b, -1, axis=1)
        var_b = uv_b + vv_b * np.roll(var_b, -1, axis=1)
    bel = (mu_f / var_f + mu_b / var_b) / (1.0 / var_f + 1.0 / var_b)
    out = np.empty((B, m), dtype=complex)
    out[:, list(order)] = bel
    return out


def gbp2g_batch(links: LinkTables, sweeps: int) -> np.ndarray:
    """Belief means of the fully-connected Gaussian scheme after ``sweeps``."""
    B, m, _ = links.a_diag.shape
    if m == 2:
        return gbp3g_batch(links, sweeps, order=(0, 1))
    off = ~np.eye(m, dtype=bool)
    u = np.swapaxes(links.u, 1, 2)  # [b, i, j] = coefficients of the i -> j edge
    v = np.swapaxes(links.v, 1, 2)
    uv = np.swapaxes(links.u_var, 1, 2)
    vv = np.swapaxes(links.v_var, 1, 2)
    mu = np.zeros((B, m, m), dtype=complex)
    var = np.ones((B, m, m))
    for _ in range(sweeps):
        prec = np.where(off[None], 1.0 / var, 0.0)
        wmean = np.where(off[None], mu / var, 0.0)
        lam_prec = prec.sum(axis=1)[:, :, None] - np.swapaxes(prec, 1, 2)
        lam_mean = (wmean.sum(axis=1)[:, :, None] - np.swapaxes(wmean, 1, 2)) / lam_prec
        var = np.where(off[None], uv + vv / lam_prec, var)
        mu = np.where(off[None], u + v * lam_mean, mu)
    prec = np.where(off[None], 1.0 / var, 0.0)
    return np.where(off[None], mu / var, 0.0).sum(axis=1) / prec.sum(axis=1)


# ---------------------------------------------------------------------------
# factor-graph scheme over the raw observations


def bp1_batch(H, y, sigma2, constellation: Constellation, iterations: int,
              singly_connected: bool = False) -> np.ndarray:
    """Beliefs of the observation factor-graph scheme; (B, M, Q)."""
    B, n_rx, m = H.shape
    size = constellation.size
    lat = lattice_indices(m, size)
    if m * constellation.bits_per_symbol > MAX_LATTICE_BITS:
        raise CapacityError("lattice enumeration exceeds the 2^24 cap")
    syms = constellation.points[lat]  # (L, M)
    proj = np.einsum("bnm,lm->bnl", H, syms)
    if singly_connected:
        ll = -np.sum(np.abs(y[:, :, None] - proj) ** 2, axis=1, keepdims=True) / sigma2
    else:
        ll = -np.abs(y[:, :, None] - proj) ** 2 / sigma2  # (B, F, L)
    n_fac = ll.shape[1]
    log_prior = np.log(constellation.prior)
    lam = np.tile(log_prior, (B, n_fac, m, 1))
    pi = np.zeros((B, n_fac, m, size))
    for _ in range(iterations):
        gathered = np.stack([lam[:, :, j, :][:, :, lat[:, j]] for j in range(m)], axis=2)
        w = ll + gathered.sum(axis=2)  # (B, F, L)
        for j in range(m):
            wt = (w - gathered[:, :, j]).reshape((B, n_fac) + (size,) * m)
            axes = tuple(2 + k for k in range(m) if k != j)
            pi[:, :, j, :] = _norm_log(_lse(wt, axis=axes))
        log_b = _norm_log(log_prior[None, None, :] + pi.sum(axis=1))
        lam = _norm_log(log_b[:, None, :, :] - pi)
    return np.exp(log_b)
