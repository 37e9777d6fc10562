"""Baseband MIMO link pieces: QPSK modem, Rician block fading, AWGN.

Convention: a channel realization is a complex (n_rx, n_tx) ndarray; batched
realizations stack on a leading axis. Per-entry average power is total_power
(fixed to 1), so the Rician K-factor only redistributes energy between the
line-of-sight and scattered components.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special


@dataclass(frozen=True)
class ModulationScheme:
    """Complex constellation with its bit labeling.

    ``alphabet[i]`` is the point whose label is the bits of ``i``, MSB first.
    The alphabet is unit average energy, so symbol power sigma_x^2 == 1.
    """

    name: str
    alphabet: tuple[complex, ...]
    bits_per_symbol: int

    def __post_init__(self):
        if len(self.alphabet) != 2 ** self.bits_per_symbol:
            raise ValueError("alphabet size must be 2**bits_per_symbol")

    @property
    def order(self) -> int:
        return len(self.alphabet)

    @property
    def symbol_energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    @property
    def points(self) -> np.ndarray:
        return np.asarray(self.alphabet, dtype=np.complex128)


def qpsk() -> ModulationScheme:
    """Gray-mapped unit-energy QPSK.

    Bit pair (b0, b1) -> ((1 - 2*b1) + 1j*(1 - 2*b0)) / sqrt(2), i.e.
    00 -> (1+1j)/sqrt(2), 01 -> (-1+1j)/sqrt(2),
    11 -> (-1-1j)/sqrt(2), 10 -> (1-1j)/sqrt(2).
    """
    s = 1.0 / np.sqrt(2.0)
    alphabet = (
        complex(s, s),    # 00
        complex(-s, s),   # 01
        complex(s, -s),   # 10
        complex(-s, -s),  # 11
    )
    return ModulationScheme(name="qpsk", alphabet=alphabet, bits_per_symbol=2)


@dataclass(frozen=True)
class RicianModel:
    """Rician block-fading ensemble for an N x M antenna array.

    k_factor is the linear LOS-to-scatter power ratio; 0 gives Rayleigh
    fading. total_power is the per-entry second moment, normalized to 1.
    """

    n_rx: int
    n_tx: int
    k_factor: float = 0.0
    total_power: float = 1.0

    def __post_init__(self):
        if self.n_rx < self.n_tx:
            raise ValueError("need n_rx >= n_tx")
        if self.k_factor < 0:
            raise ValueError("k_factor must be nonnegative")
        if self.total_power <= 0:
            raise ValueError("total_power must be positive")

    @property
    def nu(self) -> float:
        """LOS amplitude: nu^2 = K*Omega/(K+1)."""
        k = self.k_factor
        return float(np.sqrt(k * self.total_power / (k + 1.0)))

    @property
    def sigma(self) -> float:
        """Per-component scatter std: sigma^2 = Omega/(2(K+1))."""
        return float(np.sqrt(self.total_power / (2.0 * (self.k_factor + 1.0))))


class TransmitBlock(NamedTuple):
    bits: np.ndarray
    symbols: np.ndarray


class ReceivedBlock(NamedTuple):
    y: np.ndarray
    channel: np.ndarray
    noise_var: float


def random_bits(count: int, rng: np.random.Generator) -> np.ndarray:
    """Equiprobable information bits as an int8 vector."""
    return rng.integers(0, 2, size=count, dtype=np.int8)


def modulate(bits, scheme: ModulationScheme) -> np.ndarray:
    """Map a bit vector to constellation symbols, MSB-first per symbol.

    Accepts a flat vector (length divisible by bits_per_symbol) or a 2-D
    array of shape (batch, n_bits); the symbol axis is always the last one.
    """
    bits = np.asarray(bits)
    b = scheme.bits_per_symbol
    if bits.shape[-1] % b != 0:
        raise ValueError(
            f"bit count {bits.shape[-1]} not divisible by bits_per_symbol {b}"
        )
    groups = bits.reshape(*bits.shape[:-1], -1, b)
    idx = np.zeros(groups.shape[:-1], dtype=np.intp)
    for j in range(b):
        idx = (idx << 1) | groups[..., j].astype(np.intp)
    return scheme.points[idx]


def demap(symbols, scheme: ModulationScheme) -> np.ndarray:
    """Nearest-point hard demapping, inverse of modulate on clean symbols."""
    symbols = np.asarray(symbols, dtype=np.complex128)
    d = np.abs(symbols[..., None] - scheme.points)
    idx = np.argmin(d, axis=-1)
    b = scheme.bits_per_symbol
    shifts = np.arange(b - 1, -1, -1)
    bits = (idx[..., None] >> shifts) & 1
    return bits.reshape(*symbols.shape[:-1], -1).astype(np.int8)


def sample_channels(
    model: RicianModel,
    size: int,
    rng: np.random.Generator,
    k_factors=None,
) -> np.ndarray:
    """Draw `size` independent channel realizations, shape (size, N, M).

    Each entry is sqrt(K/(K+1)) * exp(1j*theta) + sqrt(1/(K+1)) * g with
    theta uniform on [0, 2pi) and g circularly-symmetric unit-variance
    complex Gaussian, all independent per entry and per realization.
    `k_factors` optionally overrides the model's K per realization
    (shape (size,)), which is how mixed-channel training batches are drawn.
    """
    shape = (size, model.n_rx, model.n_tx)
    if k_factors is None:
        k = np.full((size, 1, 1), float(model.k_factor))
    else:
        k = np.asarray(k_factors, dtype=np.float64).reshape(size, 1, 1)
        if np.any(k < 0):
            raise ValueError("k_factors must be nonnegative")
    theta = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    g *= np.sqrt(0.5)
    los = np.exp(1j * theta)
    h = np.sqrt(k / (k + 1.0)) * los + np.sqrt(1.0 / (k + 1.0)) * g
    return h * np.sqrt(model.total_power)


def sample_channel(model: RicianModel, rng: np.random.Generator) -> np.ndarray:
    """Draw one channel realization, shape (N, M)."""
    return sample_channels(model, 1, rng)[0]


def rician_pdf(x, nu: float, sigma: float):
    """Rician magnitude density (x/s^2) exp(-(x^2+nu^2)/(2s^2)) I0(x nu/s^2).

    Evaluated via the scaled Bessel function i0e to stay finite for large
    arguments. Test oracle for the channel sampler; vectorized in x.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    s2 = sigma * sigma
    # exp(-(x^2+nu^2)/2s^2) * I0(x nu/s^2) == exp(-(x-nu)^2/2s^2) * i0e(x nu/s^2)
    return (x / s2) * np.exp(-((x - nu) ** 2) / (2.0 * s2)) * special.i0e(x * nu / s2)


def ebn0_to_noise_var(
    ebn0_db: float, scheme: ModulationScheme, model: RicianModel
) -> float:
    """Complex noise variance for a target per-antenna Eb/N0 in dB.

    Each receive antenna collects M * sigma_x^2 of signal energy carrying
    M * bits_per_symbol information bits, so Eb = sigma_x^2 / bits_per_symbol
    and sigma_v^2 = sigma_x^2 / (bits_per_symbol * 10^(EbN0/10)).
    """
    ebn0 = 10.0 ** (float(ebn0_db) / 10.0)
    return scheme.symbol_energy / (scheme.bits_per_symbol * ebn0)


def transmit(
    x, h, noise_var: float, rng: np.random.Generator
) -> ReceivedBlock:
    """Push symbols through one channel realization: y = H x + v.

    v has i.i.d. circularly-symmetric complex Gaussian entries of total
    variance noise_var (noise_var == 0 gives the exact noiseless output).
    """
    x = np.asarray(x, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or x.shape != (h.shape[1],):
        raise ValueError(f"shape mismatch: H is {h.shape}, x is {x.shape}")
    if noise_var < 0:
        raise ValueError("noise_var must be nonnegative")
    y = h @ x
    if noise_var > 0:
        n = h.shape[0]
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        y = y + np.sqrt(noise_var / 2.0) * v
    return ReceivedBlock(y=y, channel=h, noise_var=float(noise_var))


def transmit_blocks(x, h, noise_var: float, rng: np.random.Generator) -> np.ndarray:
    """Batched y = H x + v over stacked blocks: (B,N,M) @ (B,M) + noise."""
    x = np.asarray(x, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 3 or x.shape != h.shape[:1] + h.shape[2:]:
        raise ValueError(f"shape mismatch: H batch {h.shape}, x batch {x.shape}")
    y = np.einsum("bnm,bm->bn", h, x)
    if noise_var > 0:
        v = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
        y = y + np.sqrt(noise_var / 2.0) * v
    return y
