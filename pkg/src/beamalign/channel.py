"""Ground-truth channel generation: fading processes and the measurement model.

The received pilot sample for beam ``w`` is

    y = alpha * sqrt(P) * w^H a(phi) + eta,    eta ~ CN(0, sigma^2),

with ``alpha`` following one of four fading processes: static and known,
i.i.d. complex Gaussian per slot, static but unknown (drawn once from a
Gaussian prior), or a Rician AR-1 recursion with per-slot correlation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .arrays import AngleGrid, ArrayConfig, beam_gain, cn_sample


@dataclass(frozen=True)
class StaticKnown:
    """Fading fixed at a value the receiver knows exactly."""

    alpha_star: complex = 1.0 + 0.0j


@dataclass(frozen=True)
class IIDGaussian:
    """Fresh CN(mean, variance) fading draw every slot."""

    mean: complex = 0.0 + 0.0j
    variance: float = 1.0

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError("variance must be > 0")


@dataclass(frozen=True)
class StaticUnknown:
    """Fading drawn once per episode from CN(mean, variance), then held."""

    mean: complex = 0.0 + 0.0j
    variance: float = 1.0

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError("variance must be > 0")


@dataclass(frozen=True)
class AR1Rician:
    """Time-correlated Rician fading.

        alpha' = alpha*sqrt(1-g) + sqrt(k_r/(1+k_r))*gamma*(1 - sqrt(1-g))
                 + e*sqrt(g/(1+k_r)),   e ~ CN(0, 1)

    ``g`` in [0, 1] sets the per-slot decorrelation (g=0 freezes the
    process, g=1 makes slots independent); ``k_r`` is the ratio of
    line-of-sight to diffuse power; ``gamma`` the line-of-sight phasor.
    The stationary law is CN(sqrt(k_r/(1+k_r))*gamma, 1/(1+k_r)).
    """

    g: float
    k_r: float = 10.0
    gamma: complex = 1.0 + 0.0j

    def __post_init__(self):
        if not 0.0 <= self.g <= 1.0:
            raise ValueError("g must lie in [0, 1]")
        if self.k_r < 0:
            raise ValueError("k_r must be >= 0")

    @property
    def los_mean(self) -> complex:
        return math.sqrt(self.k_r / (1.0 + self.k_r)) * self.gamma

    @property
    def diffuse_variance(self) -> float:
        return 1.0 / (1.0 + self.k_r)


FadingProcess = Union[StaticKnown, IIDGaussian, StaticUnknown, AR1Rician]


def g_from_coherence(coherence_time: float, slot_duration: float) -> float:
    """AR-1 correlation parameter for a target coherence time.

    Chosen so the per-slot amplitude correlation sqrt(1-g) decays to 1/2
    over one coherence time: g = 1 - (1/2)**(2*slot/T_c).
    """
    if coherence_time <= 0 or slot_duration <= 0:
        raise ValueError("coherence_time and slot_duration must be > 0")
    return 1.0 - 0.5 ** (2.0 * slot_duration / coherence_time)


# Default per-slot correlation: 2 ms coherence time spanning a 28-slot
# initial-access burst, i.e. slot duration T_c / 28.
DEFAULT_AR1_G = g_from_coherence(2e-3, 2e-3 / 28)


def prior_moments(proc: FadingProcess) -> tuple[complex, float]:
    """Mean and variance of the fading value before any observation."""
    if isinstance(proc, StaticKnown):
        return proc.alpha_star, 0.0
    if isinstance(proc, (IIDGaussian, StaticUnknown)):
        return proc.mean, proc.variance
    if isinstance(proc, AR1Rician):
        return proc.los_mean, proc.diffuse_variance
    raise TypeError(f"unknown fading process {type(proc).__name__}")


def initial_alpha(proc: FadingProcess, rng: np.random.Generator) -> complex:
    """Draw the episode's starting fading value.

    AR-1 starts from its stationary distribution so episodes sample an
    ongoing fading process rather than a transient.
    """
    if isinstance(proc, StaticKnown):
        return complex(proc.alpha_star)
    mean, variance = prior_moments(proc)
    if variance == 0.0:
        return complex(mean)
    return complex(cn_sample(rng, mean, variance))


def step_fading(
    proc: FadingProcess, alpha_t: complex, rng: np.random.Generator
) -> complex:
    """Advance the fading value by one beamforming slot."""
    if isinstance(proc, (StaticKnown, StaticUnknown)):
        return alpha_t
    if isinstance(proc, IIDGaussian):
        return complex(cn_sample(rng, proc.mean, proc.variance))
    if isinstance(proc, AR1Rician):
        keep = math.sqrt(1.0 - proc.g)
        noise = cn_sample(rng, 0.0, 1.0)
        return complex(
            alpha_t * keep
            + proc.los_mean * (1.0 - keep)
            + noise * math.sqrt(proc.g * proc.diffuse_variance)
        )
    raise TypeError(f"unknown fading process {type(proc).__name__}")


@dataclass(frozen=True)
class NoiseConfig:
    """Transmit amplitude sqrt(P) and receiver noise variance sigma^2.

    Raw SNR is P / sigma^2, the SNR before any beamforming gain.
    """

    power_sqrt: float
    noise_variance: float = 1.0

    def __post_init__(self):
        if self.power_sqrt < 0:
            raise ValueError("power_sqrt must be >= 0")
        if self.noise_variance <= 0:
            raise ValueError("noise_variance must be > 0")

    @classmethod
    def from_snr_db(cls, snr_db: float, noise_variance: float = 1.0) -> "NoiseConfig":
        power = 10.0 ** (snr_db / 10.0) * noise_variance
        return cls(power_sqrt=math.sqrt(power), noise_variance=noise_variance)

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.power_sqrt**2 / self.noise_variance)


@dataclass(frozen=True)
class ChannelState:
    """True angle-of-arrival grid index and current fading value."""

    phi_index: int
    alpha: complex


def observe(
    state: ChannelState,
    w: np.ndarray,
    noise: NoiseConfig,
    cfg: ArrayConfig,
    grid: AngleGrid,
    rng: np.random.Generator,
) -> complex:
    """One noisy pilot measurement through beam ``w``.

    ``w`` must be unit norm so the projected noise w^H n keeps variance
    sigma^2.
    """
    if not 0 <= state.phi_index < grid.size:
        raise ValueError(f"phi_index {state.phi_index} outside [0, {grid.size})")
    norm = float(np.linalg.norm(w))
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"beamforming vector norm {norm} is not 1 within 1e-6")
    gain = beam_gain(w, cfg, grid.points[state.phi_index], noise.power_sqrt)
    eta = cn_sample(rng, 0.0, noise.noise_variance)
    return complex(state.alpha * gain + eta)


def stream_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (master seed, structured key).

    Identical ``(master_seed, key)`` always yields the identical stream,
    and distinct keys yield statistically independent streams, so Monte
    Carlo trials can run in any order or in parallel without changing
    results.
    """
    return np.random.default_rng(
        np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    )
