"""Posterior computations for the angle-of-arrival belief.

The belief over grid angles is a probability mass vector pi with
pi[i] = P(phi = theta_i | y_1..y_t).  Four update rules are provided,
differing in how the unknown fading coefficient alpha enters the
per-angle likelihood of a new measurement y:

* known alpha:        y | theta_i ~ CN(alpha* G_i, sigma^2)
* i.i.d. Gaussian:    y | theta_i ~ CN(mu G_i, var |G_i|^2 + sigma^2)
* joint grid:         alpha discretized on a rectangular complex grid and
                      tracked jointly with phi
* per-angle Kalman:   alpha | theta_i ~ CN(mu_i, var_i), moments updated
                      recursively, then the i.i.d.-style likelihood with
                      per-angle moments

where G_i = sqrt(P) w^H a(theta_i).  All updates run in log domain with
max-subtraction before exponentiation so that low-SNR likelihoods never
underflow, and every returned mass vector is renormalized to sum to one.

Update functions return ``(mass, degenerate)``; ``degenerate`` is True
only when the unnormalized posterior carried no usable mass (e.g. a
point-mass prior meeting a -inf log likelihood), in which case the prior
is returned unchanged so the caller can flag the step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arrays import (
    AngleGrid,
    ArrayConfig,
    cn_log_density,
    grid_gains,
)
from .channel import NoiseConfig
from .codebook import CoverageSet


def uniform_phi(num_angles: int) -> np.ndarray:
    return np.full(num_angles, 1.0 / num_angles)


def codeword_mass(pi: np.ndarray, cov: CoverageSet) -> float:
    """Posterior probability that phi lies in a codeword's coverage."""
    idx = cov.angle_indices
    if idx.start < 0 or idx.stop > len(pi):
        raise ValueError(f"coverage {idx} outside grid of size {len(pi)}")
    return float(pi[idx.start : idx.stop].sum())


def posterior_from_log_likelihood(
    prior: np.ndarray, log_like: np.ndarray
) -> tuple[np.ndarray, bool]:
    """Normalize prior * exp(log_like) via max-subtracted log arithmetic.

    Invariant under any constant shift of ``log_like`` (likelihood scale
    cancels in the normalization).  Returns ``(prior, True)`` when no
    finite mass survives.
    """
    with np.errstate(divide="ignore"):
        logw = np.log(prior) + log_like
    peak = np.max(logw)
    if not np.isfinite(peak):
        return prior.copy(), True
    w = np.exp(logw - peak)
    total = w.sum()
    if not np.isfinite(total) or total <= 0.0:
        return prior.copy(), True
    return w / total, False


def _resolve_gains(w, noise, cfg, grid, gains):
    if gains is not None:
        return np.asarray(gains)
    return grid_gains(w, cfg, grid, noise.power_sqrt)


def update_known_alpha(
    pi: np.ndarray,
    y: complex,
    w,
    alpha_star: complex,
    noise: NoiseConfig,
    cfg: ArrayConfig,
    grid: AngleGrid,
    *,
    gains: np.ndarray | None = None,
) -> tuple[np.ndarray, bool]:
    """Bayes update when the fading coefficient is known exactly.

    ``gains`` may carry precomputed sqrt(P) * w^H a(theta_i) to skip the
    steering-matrix product; the same convention applies to all updates
    below.
    """
    g = _resolve_gains(w, noise, cfg, grid, gains)
    ll = cn_log_density(y, alpha_star * g, noise.noise_variance)
    return posterior_from_log_likelihood(pi, ll)


def update_iid_gaussian(
    pi: np.ndarray,
    y: complex,
    w,
    mean: complex,
    variance: float,
    noise: NoiseConfig,
    cfg: ArrayConfig,
    grid: AngleGrid,
    *,
    gains: np.ndarray | None = None,
) -> tuple[np.ndarray, bool]:
    """Bayes update marginalizing an i.i.d. CN(mean, variance) coefficient.

    Uncertainty about alpha inflates the per-angle noise variance to
    variance * |G_i|^2 + sigma^2, a more conservative update than the
    known-coefficient rule.
    """
    if variance < 0:
        raise ValueError("variance must be >= 0")
    g = _resolve_gains(w, noise, cfg, grid, gains)
    v = variance * np.abs(g) ** 2 + noise.noise_variance
    ll = cn_log_density(y, mean * g, v)
    return posterior_from_log_likelihood(pi, ll)


@dataclass(frozen=True)
class AlphaGrid:
    """Rectangular discretization of the complex fading coefficient.

    Cell centers r_j = r_min + j*(r_max-r_min)/n_r (j = 0..n_r-1) and
    likewise for the imaginary axis, mirroring the angle-grid convention.
    """

    r_min: float
    r_max: float
    z_min: float
    z_max: float
    n_r: int
    n_z: int
    r_centers: np.ndarray = field(init=False, repr=False, compare=False)
    z_centers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.r_min < self.r_max and self.z_min < self.z_max):
            raise ValueError("require r_min < r_max and z_min < z_max")
        if self.n_r < 1 or self.n_z < 1:
            raise ValueError("n_r and n_z must be >= 1")
        r = self.r_min + (self.r_max - self.r_min) / self.n_r * np.arange(self.n_r)
        z = self.z_min + (self.z_max - self.z_min) / self.n_z * np.arange(self.n_z)
        r.flags.writeable = False
        z.flags.writeable = False
        object.__setattr__(self, "r_centers", r)
        object.__setattr__(self, "z_centers", z)

    def cells(self) -> np.ndarray:
        """Complex cell centers, shape (n_r, n_z)."""
        return self.r_centers[:, None] + 1j * self.z_centers[None, :]


@dataclass(frozen=True)
class JointPosteriorGrid:
    """Joint mass over (angle, Re alpha, Im alpha), shape (M, n_r, n_z).

    ``log_mass`` caches the log of the (unnormalized-shift-free) mass so
    consecutive updates avoid re-taking logarithms of tiny entries.
    """

    grid: AlphaGrid
    mass: np.ndarray = field(repr=False)
    log_mass: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def uniform(cls, grid: AlphaGrid, num_angles: int) -> "JointPosteriorGrid":
        shape = (num_angles, grid.n_r, grid.n_z)
        mass = np.full(shape, 1.0 / (num_angles * grid.n_r * grid.n_z))
        return cls(grid, mass)

    def _log(self) -> np.ndarray:
        if self.log_mass is not None:
            return self.log_mass
        with np.errstate(divide="ignore"):
            return np.log(self.mass)


def update_joint(
    joint: JointPosteriorGrid,
    y: complex,
    w,
    noise: NoiseConfig,
    cfg: ArrayConfig,
    grid: AngleGrid,
    *,
    gains: np.ndarray | None = None,
) -> tuple[JointPosteriorGrid, bool]:
    """One Bayes step on the joint (angle, alpha-cell) posterior.

    The log likelihood of cell (i, j, k) is -|y - (r_j + i z_k) G_i|^2 /
    sigma^2 up to a constant; it separates into per-axis terms, so the
    (M, n_r, n_z) table is assembled from two (M, n) outer pieces.  Cost
    is O(M * n_r * n_z) per step.
    """
    g = _resolve_gains(w, noise, cfg, grid, gains)
    s2 = noise.noise_variance
    ag = joint.grid
    c = np.conj(y) * g
    g2 = np.abs(g) ** 2 / s2
    r, z = ag.r_centers, ag.z_centers
    # -|y - alpha G|^2 / s2, dropping the alpha-independent |y|^2 term
    ll_r = (2.0 / s2) * np.real(c)[:, None] * r[None, :] - g2[:, None] * (r**2)[None, :]
    ll_z = (-2.0 / s2) * np.imag(c)[:, None] * z[None, :] - g2[:, None] * (z**2)[None, :]
    logw = ll_r[:, :, None] + ll_z[:, None, :]
    logw += joint._log()
    peak = np.max(logw)
    if not np.isfinite(peak):
        return JointPosteriorGrid(ag, joint.mass.copy(), joint.log_mass), True
    wgt = logw - peak
    np.exp(wgt, out=wgt)
    total = wgt.sum()
    if not np.isfinite(total) or total <= 0.0:
        return JointPosteriorGrid(ag, joint.mass.copy(), joint.log_mass), True
    wgt /= total
    logw -= peak + np.log(total)
    return JointPosteriorGrid(ag, wgt, logw), False


def marginalize_phi(joint: JointPosteriorGrid) -> np.ndarray:
    """Angle marginal of the joint posterior."""
    return joint.mass.sum(axis=(1, 2))


@dataclass(frozen=True)
class KalmanBank:
    """Per-angle complex Gaussian belief on the fading coefficient.

    One (mean, variance) pair per angle hypothesis, each updated
    independently by the scalar Kalman recursion.
    """

    means: np.ndarray = field(repr=False)
    variances: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.means.shape != self.variances.shape:
            raise ValueError("means and variances must have equal shape")
        if np.any(self.variances < 0):
            raise ValueError("variances must be >= 0")

    @classmethod
    def from_prior(
        cls, num_angles: int, mean: complex, variance: float
    ) -> "KalmanBank":
        return cls(
            np.full(num_angles, complex(mean)),
            np.full(num_angles, float(variance)),
        )


def kalman_update(
    bank: KalmanBank,
    y: complex,
    w,
    noise: NoiseConfig,
    cfg: ArrayConfig,
    grid: AngleGrid,
    *,
    gains: np.ndarray | None = None,
) -> KalmanBank:
    """Scalar Kalman step on every angle hypothesis with the same y.

        mu    <- mu + var conj(G) / (var |G|^2 + s2) * (y - mu G)
        var   <- var * s2 / (var |G|^2 + s2)

    Variances strictly decrease wherever |G_i| > 0 and are untouched
    where G_i = 0.
    """
    g = _resolve_gains(w, noise, cfg, grid, gains)
    s2 = noise.noise_variance
    denom = bank.variances * np.abs(g) ** 2 + s2
    gain = bank.variances * np.conj(g) / denom
    means = bank.means + gain * (y - bank.means * g)
    variances = bank.variances * s2 / denom
    return KalmanBank(means, variances)


def update_kalman_bayes(
    pi: np.ndarray,
    bank: KalmanBank,
    y: complex,
    w,
    noise: NoiseConfig,
    cfg: ArrayConfig,
    grid: AngleGrid,
    *,
    gains: np.ndarray | None = None,
) -> tuple[np.ndarray, bool]:
    """Bayes update using the bank's per-angle fading estimate.

    Likelihood of angle i is CN(y; mu_i G_i, var_i |G_i|^2 + sigma^2).
    Callers advance the bank with the new measurement first and pass the
    advanced moments here (filter-then-update ordering).
    """
    if len(pi) != len(bank.means):
        raise ValueError("posterior and bank sizes differ")
    g = _resolve_gains(w, noise, cfg, grid, gains)
    v = bank.variances * np.abs(g) ** 2 + noise.noise_variance
    ll = cn_log_density(y, bank.means * g, v)
    return posterior_from_log_likelihood(pi, ll)
