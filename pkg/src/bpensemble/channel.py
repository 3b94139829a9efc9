"""BPSK over AWGN: modulation, LLR computation, SNR conversion, seeded streams.

SNR convention: snr_db is Eb/N0 in dB and sigma = 1/sqrt(2 * rate * 10^(snr_db/10)).
Every result file echoes this convention so curves stay interpretable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

#: Recorded in output files: (seed, stream) keys a Philox counter-based stream.
RNG_IDENTITY = "numpy.random.Philox(key=[seed, stream])"

SNR_CONVENTION = "Eb/N0; sigma = 1/sqrt(2 * rate * 10^(snr_db/10))"


def snr_db_to_sigma(snr_db: float, rate: float) -> float:
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")
    return 1.0 / math.sqrt(2.0 * rate * 10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class ChannelConfig:
    snr_db: float
    sigma: float
    rate: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        expected = snr_db_to_sigma(self.snr_db, self.rate)
        if not math.isclose(self.sigma, expected, rel_tol=1e-9):
            raise ValueError(
                f"sigma {self.sigma} inconsistent with snr_db {self.snr_db} at rate {self.rate}"
                f" (expected {expected})"
            )

    @classmethod
    def from_snr(cls, snr_db: float, rate: float) -> "ChannelConfig":
        return cls(snr_db=snr_db, sigma=snr_db_to_sigma(snr_db, rate), rate=rate)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent reproducible stream for (seed, stream); see RNG_IDENTITY."""
    key = np.array([seed % 2**64, stream % 2**64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def modulate_bpsk(bits: np.ndarray) -> np.ndarray:
    """Map bits to symbols: 0 -> +1, 1 -> -1."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


def transmit(
    x: np.ndarray,
    cfg: ChannelConfig,
    rng: np.random.Generator,
    noiseless: bool = False,
) -> np.ndarray:
    """AWGN then LLRs: returns 2/sigma^2 * (x + n) with n ~ N(0, sigma^2 I).

    noiseless=True is a test hook forcing n = 0 (the sigma -> 0 sign limit).
    """
    x = np.asarray(x, dtype=np.float64)
    noise = 0.0 if noiseless else cfg.sigma * rng.standard_normal(x.shape)
    return (2.0 / cfg.sigma**2) * (x + noise)


def hard_decision(llr: np.ndarray) -> np.ndarray:
    """Positive LLR -> 0, negative -> 1; the tie llr == 0 maps to 1."""
    return (np.asarray(llr) <= 0).astype(np.uint8)


def q_function(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x)."""
    return 0.5 * erfc(np.asarray(x, dtype=np.float64) / math.sqrt(2.0))


def crossover_probability(sigma: float) -> float:
    """Bit-flip probability of the equivalent BSC for unit-energy BPSK."""
    return float(q_function(1.0 / sigma))
