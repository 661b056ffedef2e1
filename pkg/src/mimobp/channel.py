"""Channel, constellation and transmit-side signal generation.

The system model is y = H x + n with an N x M complex channel H (N >= M),
unit-energy data symbols (E[x x^H] = I) and circularly-symmetric noise of
per-dimension variance sigma2 (E[n n^H] = sigma2 * I).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ChannelInstance:
    """One realisation of the linear model: channel matrix plus noise power."""

    H: np.ndarray
    sigma2: float

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        object.__setattr__(self, "H", H)
        n_rx, n_tx = H.shape
        if not (n_rx >= n_tx >= 1):
            raise ValueError(f"need N >= M >= 1, got N={n_rx}, M={n_tx}")
        if not np.isfinite(H).all():
            raise ValueError("channel entries must be finite")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")

    @property
    def n_rx(self):
        return self.H.shape[0]

    @property
    def n_tx(self):
        return self.H.shape[1]


@dataclass(frozen=True, eq=False)
class Constellation:
    """Finite symbol alphabet with bit labels and a prior pmf.

    Points carry unit average energy under the prior, matching the
    unit-symbol-power assumption of the system model.
    """

    name: str
    points: np.ndarray
    bits_per_symbol: int
    bit_labels: np.ndarray  # (size, bits_per_symbol) array of 0/1
    prior: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=complex))
        object.__setattr__(self, "bit_labels", np.asarray(self.bit_labels, dtype=np.uint8))
        object.__setattr__(self, "prior", np.asarray(self.prior, dtype=float))
        size = 2 ** self.bits_per_symbol
        if self.points.shape != (size,):
            raise ValueError("need exactly 2^m points")
        if self.bit_labels.shape != (size, self.bits_per_symbol):
            raise ValueError("bit_labels shape mismatch")
        if abs(self.prior.sum() - 1.0) > 1e-15:
            raise ValueError("prior must sum to 1")
        energy = float(np.sum(self.prior * np.abs(self.points) ** 2))
        if abs(energy - 1.0) > 1e-12:
            raise ValueError(f"average symbol energy must be 1, got {energy}")

    @property
    def size(self):
        return self.points.shape[0]

    def uniform_prior(self) -> bool:
        return bool(np.allclose(self.prior, 1.0 / self.size, atol=1e-12))

    def bits_for(self, indices):
        """Flat bit sequence for a vector of point indices."""
        return self.bit_labels[np.asarray(indices)].reshape(-1)

    def indices_from_bits(self, bits):
        """Inverse of bits_for: recover point indices from a flat bit vector."""
        m = self.bits_per_symbol
        bits = np.asarray(bits, dtype=np.uint8).reshape(-1, m)
        weights = 1 << np.arange(m - 1, -1, -1)
        keys = bits @ weights
        lut = np.empty(self.size, dtype=np.int64)
        lut[self.bit_labels @ weights] = np.arange(self.size)
        return lut[keys]

    def slice_hard(self, values):
        """Nearest-point indices for arbitrary complex values."""
        values = np.asarray(values)
        return np.argmin(np.abs(values[..., None] - self.points), axis=-1)


@dataclass(frozen=True)
class TransmitRecord:
    """One channel use: drawn symbols, their bits, and the received vector."""

    indices: np.ndarray
    x: np.ndarray
    bits: np.ndarray
    y: np.ndarray
    trial: int = 0


def _bit_rows(m):
    rows = np.arange(2 ** m, dtype=np.uint32)
    return ((rows[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.uint8)


def qpsk() -> Constellation:
    """Gray-labelled QPSK with unit energy and uniform prior.

    The first bit selects the sign of the real part, the second the sign of
    the imaginary part, so angular neighbours differ in exactly one bit.
    """
    labels = _bit_rows(2)
    re = 1.0 - 2.0 * labels[:, 0]
    im = 1.0 - 2.0 * labels[:, 1]
    points = (re + 1j * im) / np.sqrt(2.0)
    return Constellation("QPSK", points, 2, labels, np.full(4, 0.25))


_GRAY2 = {(0, 0): -3.0, (0, 1): -1.0, (1, 1): 1.0, (1, 0): 3.0}


def qam16() -> Constellation:
    """Gray-labelled 16QAM on levels {-3,-1,1,3}/sqrt(10), uniform prior.

    Bits 0-1 Gray-select the in-phase level, bits 2-3 the quadrature level;
    neighbouring levels differ in a single bit on each axis.
    """
    labels = _bit_rows(4)
    re = np.array([_GRAY2[(b[0], b[1])] for b in labels])
    im = np.array([_GRAY2[(b[2], b[3])] for b in labels])
    points = (re + 1j * im) / np.sqrt(10.0)
    return Constellation("QAM16", points, 4, labels, np.full(16, 1.0 / 16.0))


def get_constellation(name: str) -> Constellation:
    key = name.strip().upper()
    if key == "QPSK":
        return qpsk()
    if key in ("QAM16", "16QAM"):
        return qam16()
    raise ValueError(f"unknown constellation {name!r}")


def trial_rng(seed, *ids) -> np.random.Generator:
    """Independent counter-based stream for (seed, ids...).

    Built on Philox so that every (seed, trial) pair owns a disjoint counter
    range; trials can therefore run in any order or partitioning and still
    reproduce bit-identically.
    """
    counter = 0
    for k, v in enumerate(ids):
        v = int(v)
        if not 0 <= v < 2 ** 64:
            raise ValueError("stream ids must fit in 64 bits")
        counter += v << (128 + 64 * k)
    return np.random.Generator(np.random.Philox(key=int(seed), counter=counter))


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def draw_channel(n_tx, n_rx, rng) -> np.ndarray:
    """i.i.d. CN(0, 1) channel matrix of shape (n_rx, n_tx).

    Real and imaginary parts are each N(0, 1/2); with a fixed seed the draw
    is bit-identical across runs.
    """
    if not (n_rx >= n_tx >= 1):
        raise ValueError(f"need N >= M >= 1, got N={n_rx}, M={n_tx}")
    g = _as_rng(rng)
    return (g.standard_normal((n_rx, n_tx)) + 1j * g.standard_normal((n_rx, n_tx))) / np.sqrt(2.0)


def transmit(channel: ChannelInstance, constellation: Constellation, rng, trial: int = 0) -> TransmitRecord:
    """Draw symbols per the constellation prior, add noise, return y = Hx + n."""
    g = _as_rng(rng)
    m = channel.n_tx
    indices = g.choice(constellation.size, size=m, p=constellation.prior)
    x = constellation.points[indices]
    scale = np.sqrt(channel.sigma2 / 2.0)
    noise = scale * (g.standard_normal(channel.n_rx) + 1j * g.standard_normal(channel.n_rx))
    y = channel.H @ x + noise
    return TransmitRecord(indices=indices, x=x, bits=constellation.bits_for(indices), y=y, trial=trial)
