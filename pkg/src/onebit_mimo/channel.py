"""
Block-fading uplink channel, QPSK mapping, pilots and frame generation.

SNR convention used throughout the package::

    SNR = sigma_x^2 * K / sigma_n^2      (per receive antenna, unit-variance channel)
    Eb/N0 = SNR / (M_c * R)              (M_c = 2 bits/symbol for QPSK, R = code rate)

With near-far energies the base energy ``sigma_x^2`` enters the SNR; the
boosted user transmits above it.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import hadamard

from .exceptions import InvalidInputError
from .quantize import quantize_1bit

__all__ = [
    "FrameConfig",
    "UplinkFrame",
    "BITS_PER_SYMBOL",
    "SNR_CONVENTION",
    "generate_channel",
    "qpsk_modulate",
    "qpsk_hard_demap",
    "qpsk_slice",
    "generate_pilots",
    "transmit",
    "snr_db_to_noise_variance",
    "ebn0_db_to_snr_db",
    "near_far_energies",
]

BITS_PER_SYMBOL = 2
SNR_CONVENTION = (
    "SNR = sigma_x^2*K/sigma_n^2 per receive antenna with CN(0,1) channel entries; "
    "Eb/N0 = SNR/(M_c*R), M_c=2"
)


def snr_db_to_noise_variance(snr_db: float, K: int, symbol_energy: float = 1.0) -> float:
    return symbol_energy * K / 10.0 ** (snr_db / 10.0)


def ebn0_db_to_snr_db(ebn0_db: float, rate: float, bits_per_symbol: int = BITS_PER_SYMBOL) -> float:
    return ebn0_db + 10.0 * np.log10(bits_per_symbol * rate)


def near_far_energies(K: int, boost_db: float, symbol_energy: float = 1.0, boosted_user: int = 0):
    """Per-user energies with one user ``boost_db`` above the others."""
    e = np.full(K, float(symbol_energy))
    e[boosted_user] *= 10.0 ** (boost_db / 10.0)
    return e


def generate_channel(M: int, K: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0, 1) Rayleigh channel of shape (M, K)."""
    if M < 1 or K < 1:
        raise InvalidInputError(f"need M, K >= 1, got M={M}, K={K}")
    g = rng.standard_normal((M, K, 2))
    return (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2.0)


def qpsk_modulate(bits, symbol_energy: float = 1.0) -> np.ndarray:
    """Gray QPSK: bit pair (b_I, b_Q) -> sqrt(E/2) (1 - 2 b_I + j (1 - 2 b_Q)).

    The last axis of ``bits`` holds consecutive pairs and must be even.
    """
    bits = np.asarray(bits)
    if bits.shape[-1] % 2:
        raise InvalidInputError(f"bit count must be even, got {bits.shape[-1]}")
    b = bits.reshape(*bits.shape[:-1], -1, 2).astype(float)
    a = np.sqrt(symbol_energy / 2.0)
    return a * ((1.0 - 2.0 * b[..., 0]) + 1j * (1.0 - 2.0 * b[..., 1]))


def qpsk_hard_demap(symbols) -> np.ndarray:
    """Inverse of :func:`qpsk_modulate` by sign decisions (zero maps to bit 0)."""
    s = np.asarray(symbols)
    b = np.stack([np.real(s) < 0, np.imag(s) < 0], axis=-1).astype(np.uint8)
    return b.reshape(*s.shape[:-1], -1) if s.ndim else b.reshape(-1)


def qpsk_slice(x, symbol_energy=1.0) -> np.ndarray:
    """Nearest QPSK point; ``symbol_energy`` broadcasts against ``x``."""
    x = np.asarray(x)
    a = np.sqrt(np.asarray(symbol_energy, dtype=float) / 2.0)
    return a * (np.where(np.real(x) >= 0, 1.0, -1.0) + 1j * np.where(np.imag(x) >= 0, 1.0, -1.0))


def generate_pilots(
    K: int,
    tau: int,
    symbol_energy: float = 1.0,
    mode: str = "orthogonal",
    rng: Optional[np.random.Generator] = None,
    per_user_energy=None,
) -> np.ndarray:
    """K x tau QPSK pilot matrix.

    ``orthogonal`` takes K rows of a Sylvester Hadamard matrix (tau a power
    of two, tau >= K) and rotates them onto the QPSK diagonal, so
    ``X_p X_p^H = tau sigma_x^2 I``. ``random`` draws i.i.d. QPSK symbols.
    """
    if K < 1 or tau < 1:
        raise InvalidInputError(f"need K, tau >= 1, got K={K}, tau={tau}")
    if mode == "orthogonal":
        if tau < K or tau & (tau - 1):
            raise InvalidInputError(
                f"orthogonal pilots need tau >= K and tau a power of two (K={K}, tau={tau})"
            )
        X = hadamard(tau)[:K].astype(float) * (1 + 1j) / np.sqrt(2.0)
    elif mode == "random":
        if rng is None:
            raise InvalidInputError("random pilots need an rng")
        X = qpsk_modulate(rng.integers(0, 2, size=(K, 2 * tau)))
    else:
        raise InvalidInputError(f"unknown pilot mode {mode!r}")
    if per_user_energy is None:
        return np.sqrt(symbol_energy) * X
    e = np.asarray(per_user_energy, dtype=float).reshape(-1)
    if e.shape != (K,):
        raise InvalidInputError(f"per_user_energy must have length {K}")
    return np.sqrt(e)[:, None] * X


@dataclass(frozen=True)
class FrameConfig:
    M: int
    K: int
    tau: int
    data_len: int
    symbol_energy: float = 1.0
    noise_variance: float = 1.0
    per_user_energy: Optional[tuple] = None
    pilot_mode: str = "orthogonal"
    seed: Optional[int] = None

    def __post_init__(self):
        if not (self.M >= self.K >= 1):
            raise InvalidInputError(f"need M >= K >= 1, got M={self.M}, K={self.K}")
        if self.tau < 1 or self.data_len < 0:
            raise InvalidInputError("tau must be >= 1 and data_len >= 0")
        if not self.symbol_energy > 0 or self.noise_variance < 0:
            raise InvalidInputError("symbol energy must be > 0 and noise variance >= 0")
        if self.per_user_energy is not None:
            e = np.asarray(self.per_user_energy, dtype=float)
            if e.shape != (self.K,) or np.any(~(e > 0)):
                raise InvalidInputError("per_user_energy must be K positive values")

    def energies(self) -> np.ndarray:
        if self.per_user_energy is None:
            return np.full(self.K, self.symbol_energy)
        return np.asarray(self.per_user_energy, dtype=float)


@dataclass
class UplinkFrame:
    """One block-fading frame. ``Y_*`` hold the unquantized receive blocks."""

    H: np.ndarray
    X_p: np.ndarray
    X_d: np.ndarray
    Y_Q_pilot: np.ndarray
    Y_Q_data: np.ndarray
    payload_bits: np.ndarray
    Y_pilot: np.ndarray = field(repr=False)
    Y_data: np.ndarray = field(repr=False)


def _awgn(shape, noise_variance: float, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((*shape, 2))
    return np.sqrt(noise_variance / 2.0) * (g[..., 0] + 1j * g[..., 1])


def transmit(
    config: FrameConfig,
    rng: np.random.Generator,
    payload_bits=None,
    quantize: bool = True,
    H=None,
) -> UplinkFrame:
    """Generate one frame: channel, pilots, payload, noise and 1-bit outputs.

    ``payload_bits`` (K x 2*data_len) replaces random payload, e.g. with
    LDPC codewords. ``quantize=False`` bypasses the ADC so ``Y_Q_*``
    equal the unquantized blocks. The RNG is consumed in a fixed order:
    channel, pilots (random mode only), payload, pilot noise, data noise.
    """
    c = config
    if H is None:
        H = generate_channel(c.M, c.K, rng)
    else:
        H = np.asarray(H, dtype=complex)
        if H.shape != (c.M, c.K):
            raise InvalidInputError(f"H must be {c.M} x {c.K}, got {H.shape}")
    e = c.energies()
    X_p = generate_pilots(c.K, c.tau, c.symbol_energy, c.pilot_mode, rng,
                          per_user_energy=None if c.per_user_energy is None else e)
    if payload_bits is None:
        payload_bits = rng.integers(0, 2, size=(c.K, 2 * c.data_len), dtype=np.uint8)
    else:
        payload_bits = np.asarray(payload_bits, dtype=np.uint8)
        if payload_bits.shape != (c.K, 2 * c.data_len):
            raise InvalidInputError(
                f"payload must be {c.K} x {2 * c.data_len}, got {payload_bits.shape}"
            )
    X_d = np.sqrt(e)[:, None] * qpsk_modulate(payload_bits)
    Y_p = H @ X_p + _awgn((c.M, c.tau), c.noise_variance, rng)
    Y_d = H @ X_d + _awgn((c.M, c.data_len), c.noise_variance, rng)
    if quantize:
        Yq_p, Yq_d = quantize_1bit(Y_p), quantize_1bit(Y_d)
    else:
        Yq_p, Yq_d = Y_p, Y_d
    return UplinkFrame(H, X_p, X_d, Yq_p, Yq_d, payload_bits, Y_p, Y_d)
