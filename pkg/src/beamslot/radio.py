"""Complex-baseband link math for a BS-side uniform linear array.

Channels, steering vectors and precoders are plain 1-D ``complex128`` numpy
arrays of length ``mt``. A channel vector stores the conjugated array response,
so the received amplitude for precoder ``f`` is the plain dot product
``h @ f`` (no conjugation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _check_mt(mt: int) -> None:
    if int(mt) != mt or mt < 2:
        raise ValueError(f"antenna count must be an integer >= 2, got {mt!r}")


@dataclass(frozen=True)
class LinkParams:
    pt: float
    noise_variance: float
    fading_variance: float = 1.0
    mt: int = 32

    def __post_init__(self):
        _check_mt(self.mt)
        if self.pt <= 0 or self.noise_variance <= 0 or self.fading_variance <= 0:
            raise ValueError("pt, noise_variance and fading_variance must be positive")

    @classmethod
    def from_snr(cls, pt: float, snr_db: float, mt: int, ref_distance: float = 50.0,
                 fading_variance: float = 1.0) -> "LinkParams":
        """Pick the noise variance so a matched beam at ``ref_distance`` sees ``snr_db``."""
        noise = pt * mt * fading_variance / (ref_distance ** 2 * 10.0 ** (snr_db / 10.0))
        return cls(pt=pt, noise_variance=noise, fading_variance=fading_variance, mt=mt)


@dataclass(frozen=True)
class Codebook:
    """DFT beams stored column-wise: ``precoders[:, i - 1]`` is beam ``i``."""

    precoders: np.ndarray

    @property
    def mt(self) -> int:
        return self.precoders.shape[0]

    def __len__(self):
        return self.precoders.shape[1]

    def beam(self, index: int) -> np.ndarray:
        if not 1 <= index <= len(self):
            raise IndexError(f"beam index {index} outside 1..{len(self)}")
        return self.precoders[:, index - 1]

    def spatial_frequency(self, index: int) -> float:
        """Value of cos(theta) the 1-based beam ``index`` points at."""
        return (2 * index - 1 - self.mt) / self.mt


def steering_vector(theta: float, mt: int) -> np.ndarray:
    _check_mt(mt)
    m = np.arange(mt)
    return np.exp(-1j * np.pi * m * math.cos(theta)) / math.sqrt(mt)


def dft_codebook(mt: int) -> Codebook:
    _check_mt(mt)
    m = np.arange(mt)[:, None]
    i = np.arange(1, mt + 1)[None, :]
    freq = (2 * i - 1 - mt) / mt
    return Codebook(np.exp(-1j * np.pi * m * freq) / math.sqrt(mt))


def channel_vector(distance: float, theta: float, beta: complex, params: LinkParams) -> np.ndarray:
    if distance <= 0:
        raise ValueError("distance must be positive (user co-located with BS)")
    return (math.sqrt(params.mt) / distance) * beta * np.conj(steering_vector(theta, params.mt))


def received_power(h: np.ndarray, f: np.ndarray, params: LinkParams, noise: complex = 0.0) -> float:
    """|sqrt(Pt) * h^T f * s + n|^2 with unit training symbol s = 1."""
    if h.shape != f.shape:
        raise ValueError(f"length mismatch: h has {h.shape}, f has {f.shape}")
    amp = math.sqrt(params.pt) * complex(h @ f) + noise
    return amp.real * amp.real + amp.imag * amp.imag


def beam_powers(h: np.ndarray, codebook: Codebook, params: LinkParams) -> np.ndarray:
    """Noiseless received power on every beam of the codebook."""
    if h.shape[0] != codebook.mt:
        raise ValueError(f"length mismatch: h has {h.shape[0]}, codebook built for {codebook.mt}")
    return params.pt * np.abs(h @ codebook.precoders) ** 2


TIE_RTOL = 1e-12


def best_beam_exhaustive(h: np.ndarray, codebook: Codebook, params: LinkParams) -> int:
    """Strongest beam; powers within ``TIE_RTOL`` of the maximum count as ties,
    which go to the lowest index (rounding would otherwise split exact ties)."""
    p = beam_powers(h, codebook, params)
    return int(np.argmax(p >= p.max() * (1.0 - TIE_RTOL))) + 1


def sample_noise(rng: np.random.Generator, variance: float) -> complex:
    re, im = rng.standard_normal(2) * math.sqrt(variance / 2.0)
    return complex(re, im)


def neighbor_beam_track(current: int, h: np.ndarray, codebook: Codebook, params: LinkParams,
                        rng: np.random.Generator | None) -> tuple[int, float]:
    """Measure the current beam and its immediate neighbours, keep the strongest.

    Each candidate gets its own noise draw; pass ``rng=None`` for a noiseless
    sweep. Returns ``(beam index, measured power)``.
    """
    n = len(codebook)
    if not 1 <= current <= n:
        raise ValueError(f"current beam {current} outside 1..{n}")
    best, best_power = current, -1.0
    for cand in range(max(1, current - 1), min(n, current + 1) + 1):
        noise = 0.0 if rng is None else sample_noise(rng, params.noise_variance)
        p = received_power(h, codebook.beam(cand), params, noise)
        if p > best_power:
            best, best_power = cand, p
    return best, best_power
