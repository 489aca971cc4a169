"""Uniform linear array response math.

Steering vectors, beamforming gains and the circularly symmetric complex
Gaussian density.  Everything downstream (codebook design, channel
simulation, posterior updates) is built on these three primitives.

Conventions: angles are radians, steering vectors are column vectors of
length ``num_antennas``, and grid angles are 0-indexed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform linear array: element count and spacing in wavelengths."""

    num_antennas: int
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if self.num_antennas < 1:
            raise ValueError("num_antennas must be >= 1")
        if self.spacing_over_wavelength <= 0:
            raise ValueError("spacing_over_wavelength must be > 0")


@dataclass(frozen=True)
class AngleGrid:
    """Discretized angle-of-arrival hypothesis space.

    Holds ``resolution_inv`` equispaced angles
    ``theta_min + i * (theta_max - theta_min) / resolution_inv`` for
    ``i = 0 .. resolution_inv - 1``.  The right endpoint is excluded so
    that the grid tiles the sector in equal left-closed cells.
    """

    theta_min: float
    theta_max: float
    resolution_inv: int
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.resolution_inv < 1:
            raise ValueError("resolution_inv must be >= 1")
        if not self.theta_min < self.theta_max:
            raise ValueError("theta_min must be < theta_max")
        step = (self.theta_max - self.theta_min) / self.resolution_inv
        pts = self.theta_min + step * np.arange(self.resolution_inv)
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.resolution_inv

    @property
    def spacing(self) -> float:
        """Angular width of one grid cell (radians)."""
        return (self.theta_max - self.theta_min) / self.resolution_inv

    def nearest_index(self, phi: float) -> int:
        """Grid index whose angle is closest to ``phi``."""
        return int(np.argmin(np.abs(self.points - phi)))


def steering_vector(cfg: ArrayConfig, phi: float) -> np.ndarray:
    """Array response a(phi): element n is exp(j*n*2*pi*(d/lambda)*sin(phi))."""
    k = 2.0 * np.pi * cfg.spacing_over_wavelength * np.sin(phi)
    return np.exp(1j * k * np.arange(cfg.num_antennas))


def steering_matrix(cfg: ArrayConfig, grid: AngleGrid) -> np.ndarray:
    """Stacked steering vectors, one column per grid angle (N x M)."""
    k = 2.0 * np.pi * cfg.spacing_over_wavelength * np.sin(grid.points)
    return np.exp(1j * np.outer(np.arange(cfg.num_antennas), k))


def beam_gain(
    w: np.ndarray, cfg: ArrayConfig, phi: float, sqrt_power: float = 1.0
) -> complex:
    """Complex receive gain sqrt(P) * w^H a(phi) of beamforming vector ``w``.

    The inner product conjugates ``w`` (Hermitian convention).
    """
    w = np.asarray(w)
    if w.shape != (cfg.num_antennas,):
        raise ValueError(
            f"beamforming vector has length {w.shape}, expected ({cfg.num_antennas},)"
        )
    return sqrt_power * complex(np.vdot(w, steering_vector(cfg, phi)))


def grid_gains(
    w: np.ndarray, cfg: ArrayConfig, grid: AngleGrid, sqrt_power: float = 1.0
) -> np.ndarray:
    """Vector of beam gains sqrt(P) * w^H a(theta_i) over all grid angles."""
    w = np.asarray(w)
    if w.shape != (cfg.num_antennas,):
        raise ValueError(
            f"beamforming vector has length {w.shape}, expected ({cfg.num_antennas},)"
        )
    return sqrt_power * (np.conj(w) @ steering_matrix(cfg, grid))


def cn_density(y, mean, variance):
    """Circularly symmetric complex Gaussian pdf at ``y``.

    Density (1 / (pi * v)) * exp(-|y - mean|^2 / v); integrates to one
    over the complex plane.  Broadcasts over array arguments.
    """
    v = np.asarray(variance, dtype=float)
    if np.any(v <= 0):
        raise ValueError("variance must be > 0")
    r2 = np.abs(np.asarray(y) - np.asarray(mean)) ** 2
    out = np.exp(-r2 / v) / (np.pi * v)
    return float(out) if np.isscalar(y) and out.ndim == 0 else out


def cn_log_density(y, mean, variance):
    """Log of :func:`cn_density`; preferred inside posterior updates."""
    v = np.asarray(variance, dtype=float)
    if np.any(v <= 0):
        raise ValueError("variance must be > 0")
    r2 = np.abs(np.asarray(y) - np.asarray(mean)) ** 2
    return -r2 / v - np.log(np.pi * v)


def cn_sample(rng: np.random.Generator, mean, variance, size=None):
    """Draw from CN(mean, variance); real/imag parts i.i.d. N(0, variance/2)."""
    scale = np.sqrt(variance / 2.0)
    draw = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return mean + scale * draw
