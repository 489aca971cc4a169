"""Monte Carlo alignment episodes, SNR sweeps and link metrics.

An episode runs one initial-access phase: ``tau`` slots of beam
selection, measurement and belief update, ending with a leaf-level beam
pointed at the estimated angle.  A sweep repeats episodes over trials,
algorithms and raw-SNR points and aggregates error probability, outage
probability and expected spectral efficiency.

Reproducibility contract: every trial draws from an independent stream
derived from (master seed, snr index, trial index[, algorithm index]),
so results are bit-identical for a given seed regardless of worker count
or execution order.  In paired mode all algorithms of a trial share one
(angle, fading path, noise) realization, which pairs the comparisons and
shrinks the variance of algorithm orderings.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .arrays import AngleGrid, ArrayConfig, beam_gain
from .channel import (
    AR1Rician,
    DEFAULT_AR1_G,
    FadingProcess,
    NoiseConfig,
    cn_sample,
    initial_alpha,
    prior_moments,
    step_fading,
    stream_rng,
)
from .codebook import HierCodebook, build_codebook
from .inference import (
    AlphaGrid,
    JointPosteriorGrid,
    KalmanBank,
    kalman_update,
    marginalize_phi,
    uniform_phi,
    update_iid_gaussian,
    update_joint,
    update_kalman_bayes,
    update_known_alpha,
)
from .policy import (
    BisectionState,
    bisection_advance,
    bisection_estimate,
    bisection_select,
    final_estimate,
    hiepm_select,
)

ALGORITHMS = ("known", "mismatched", "iid", "joint", "kalman", "bisection")

METRICS_HEADER = "algorithm,snr_db,trials,poe,poe_se,outage,outage_se,se_bits,se_se,wall_ms"
TRACE_HEADER = "algorithm,snr_db,trial,t,level,k,re_y,im_y,re_alpha,im_alpha"


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one experiment.

    Defaults reproduce the reference scenario: a 64-element half-wave
    array resolving 128 angles over a 120-degree sector in 28 slots,
    Rician AR-1 fading with k_r = 10, and a 50 x 50 fading grid on
    [0, 2] x [-0.7, 0.7].
    """

    num_antennas: int = 64
    spacing_over_wavelength: float = 0.5
    theta_min: float = -math.pi / 3
    theta_max: float = math.pi / 3
    resolution_inv: int = 128
    snr_db: tuple[float, ...] = (-10.0, -5.0, 0.0, 5.0)
    noise_variance: float = 1.0
    fading: FadingProcess = AR1Rician(g=DEFAULT_AR1_G, k_r=10.0, gamma=1.0 + 0.0j)
    tau: int = 28
    total_slots: int = 280
    algorithms: tuple[str, ...] = ALGORITHMS
    trials: int = 1000
    seed: int = 0
    alpha_grid: AlphaGrid = AlphaGrid(0.0, 2.0, -0.7, 0.7, 50, 50)
    paired: bool = True
    aoa_off_grid: bool = False
    iid_moments: tuple[complex, float] | None = None
    mismatch_moments: tuple[complex, float] | None = None

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.total_slots <= self.tau:
            raise ValueError("total_slots must exceed tau")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.resolution_inv < 2 or self.resolution_inv & (self.resolution_inv - 1):
            raise ValueError("resolution_inv must be a power of two >= 2")
        if not self.snr_db:
            raise ValueError("snr_db must list at least one point")
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {name!r}; choose from {ALGORITHMS}")

    @property
    def levels(self) -> int:
        return int(math.log2(self.resolution_inv))


@dataclass(frozen=True)
class ScenarioParts:
    """Precomputed immutable pieces shared by every trial."""

    array_cfg: ArrayConfig
    grid: AngleGrid
    codebook: HierCodebook

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "ScenarioParts":
        array_cfg = ArrayConfig(cfg.num_antennas, cfg.spacing_over_wavelength)
        grid = AngleGrid(cfg.theta_min, cfg.theta_max, cfg.resolution_inv)
        cb = build_codebook(array_cfg, grid, cfg.levels)
        return cls(array_cfg, grid, cb)


@dataclass(frozen=True)
class EpisodeDraws:
    """All randomness one episode consumes, drawn up front.

    Sharing one instance across algorithms gives common random numbers.
    """

    phi_index: int
    phi_rad: float
    alphas: np.ndarray  # fading value in effect at each slot
    etas: np.ndarray  # projected measurement noise per slot
    alpha_guess: complex  # held-fixed guess for the mismatched baseline


def resolved_mismatch_moments(cfg: ScenarioConfig) -> tuple[complex, float]:
    return cfg.mismatch_moments or prior_moments(cfg.fading)


def resolved_iid_moments(cfg: ScenarioConfig) -> tuple[complex, float]:
    return cfg.iid_moments or prior_moments(cfg.fading)


def episode_draws(
    cfg: ScenarioConfig, parts: ScenarioParts, rng: np.random.Generator
) -> EpisodeDraws:
    grid = parts.grid
    if cfg.aoa_off_grid:
        phi_rad = float(rng.uniform(grid.theta_min, grid.theta_max))
        phi_index = grid.nearest_index(phi_rad)
    else:
        phi_index = int(rng.integers(grid.size))
        phi_rad = float(grid.points[phi_index])
    alpha = initial_alpha(cfg.fading, rng)
    alphas = np.empty(cfg.tau, dtype=complex)
    for t in range(cfg.tau):
        alpha = step_fading(cfg.fading, alpha, rng)
        alphas[t] = alpha
    etas = cn_sample(rng, 0.0, cfg.noise_variance, size=cfg.tau)
    mean, variance = resolved_mismatch_moments(cfg)
    guess = complex(mean) if variance == 0.0 else complex(cn_sample(rng, mean, variance))
    return EpisodeDraws(phi_index, phi_rad, alphas, etas, guess)


@dataclass
class EpisodeTrace:
    """Per-slot record of one episode plus the terminal decision."""

    phi_index: int
    phi_rad: float
    levels: np.ndarray
    indices: np.ndarray
    observations: np.ndarray
    fading: np.ndarray
    degenerate: np.ndarray
    estimate: int
    final_level: int
    final_index: int
    terminal_gain_sq: float  # |w(phi_hat)^H a(phi)|^2 at unit transmit power
    beliefs: np.ndarray | None = None

    @property
    def correct(self) -> bool:
        return self.estimate == self.phi_index


def _true_gain(cfg, parts, noise, draws, level, index) -> complex:
    if cfg.aoa_off_grid:
        w = parts.codebook.codeword(level, index)
        return beam_gain(w, parts.array_cfg, draws.phi_rad, noise.power_sqrt)
    return noise.power_sqrt * parts.codebook.gain_table[
        parts.codebook.flat_index(level, index), draws.phi_index
    ]


def _finish(cfg, parts, noise, draws, estimate, levels, ks, ys, flags, beliefs):
    cb = parts.codebook
    leaf = cb.leaf_of(estimate)
    gain = _true_gain(cfg, parts, noise, draws, cb.levels, leaf) / noise.power_sqrt
    return EpisodeTrace(
        phi_index=draws.phi_index,
        phi_rad=draws.phi_rad,
        levels=levels,
        indices=ks,
        observations=ys,
        fading=draws.alphas.copy(),
        degenerate=flags,
        estimate=estimate,
        final_level=cb.levels,
        final_index=leaf,
        terminal_gain_sq=abs(gain) ** 2,
        beliefs=beliefs,
    )


def _run_algorithm(
    cfg: ScenarioConfig,
    parts: ScenarioParts,
    noise: NoiseConfig,
    algorithm: str,
    draws: EpisodeDraws,
    capture_beliefs: bool = False,
) -> EpisodeTrace:
    cb = parts.codebook
    grid, acfg = parts.grid, parts.array_cfg
    m = grid.size
    tau = cfg.tau
    levels = np.empty(tau, dtype=int)
    ks = np.empty(tau, dtype=int)
    ys = np.empty(tau, dtype=complex)
    flags = np.zeros(tau, dtype=bool)
    beliefs = np.empty((tau, m)) if capture_beliefs else None

    if algorithm == "bisection":
        state = BisectionState()
        for t in range(tau):
            choice = bisection_select(state, tau, cb)
            y = complex(
                draws.alphas[t] * _true_gain(cfg, parts, noise, draws, choice.level, choice.index)
                + draws.etas[t]
            )
            state = bisection_advance(state, y, tau, cb)
            levels[t], ks[t], ys[t] = choice.level, choice.index, y
            if capture_beliefs:
                beliefs[t] = np.nan
        estimate = bisection_estimate(state, cb)
        return _finish(cfg, parts, noise, draws, estimate, levels, ks, ys, flags, beliefs)

    pi = uniform_phi(m)
    joint = bank = None
    if algorithm == "joint":
        joint = JointPosteriorGrid.uniform(cfg.alpha_grid, m)
    elif algorithm == "kalman":
        bank = KalmanBank.from_prior(m, *prior_moments(cfg.fading))
    iid_mean, iid_var = resolved_iid_moments(cfg)

    for t in range(tau):
        choice = hiepm_select(pi, cb)
        gains = noise.power_sqrt * cb.gains(choice.level, choice.index)
        if cfg.aoa_off_grid:
            g_true = _true_gain(cfg, parts, noise, draws, choice.level, choice.index)
        else:
            g_true = gains[draws.phi_index]
        y = complex(draws.alphas[t] * g_true + draws.etas[t])

        if algorithm == "known":
            pi, flag = update_known_alpha(
                pi, y, None, draws.alphas[t], noise, acfg, grid, gains=gains
            )
        elif algorithm == "mismatched":
            pi, flag = update_known_alpha(
                pi, y, None, draws.alpha_guess, noise, acfg, grid, gains=gains
            )
        elif algorithm == "iid":
            pi, flag = update_iid_gaussian(
                pi, y, None, iid_mean, iid_var, noise, acfg, grid, gains=gains
            )
        elif algorithm == "joint":
            joint, flag = update_joint(joint, y, None, noise, acfg, grid, gains=gains)
            pi = marginalize_phi(joint)
        elif algorithm == "kalman":
            bank = kalman_update(bank, y, None, noise, acfg, grid, gains=gains)
            pi, flag = update_kalman_bayes(pi, bank, y, None, noise, acfg, grid, gains=gains)
        else:
            raise ValueError(f"unknown algorithm {algorithm!r}")

        levels[t], ks[t], ys[t], flags[t] = choice.level, choice.index, y, flag
        if capture_beliefs:
            beliefs[t] = pi

    estimate = final_estimate(pi)
    return _finish(cfg, parts, noise, draws, estimate, levels, ks, ys, flags, beliefs)


def run_episode(
    cfg: ScenarioConfig,
    rng: np.random.Generator | None = None,
    *,
    algorithm: str | None = None,
    snr_db: float | None = None,
    capture_beliefs: bool = False,
    parts: ScenarioParts | None = None,
) -> EpisodeTrace:
    """Run one full alignment episode.

    ``algorithm`` and ``snr_db`` default to the first entries of the
    config; ``rng`` defaults to the config seed's first trial stream.
    """
    parts = parts or ScenarioParts.from_config(cfg)
    algorithm = algorithm or cfg.algorithms[0]
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    snr = cfg.snr_db[0] if snr_db is None else snr_db
    noise = NoiseConfig.from_snr_db(snr, cfg.noise_variance)
    rng = rng if rng is not None else stream_rng(cfg.seed, 0, 0)
    draws = episode_draws(cfg, parts, rng)
    return _run_algorithm(cfg, parts, noise, algorithm, draws, capture_beliefs)


def error_probability(traces) -> tuple[float, float]:
    """Fraction of episodes ending on the wrong leaf beam, with binomial SE."""
    if not traces:
        raise ValueError("need at least one trace")
    n = len(traces)
    p = sum(not t.correct for t in traces) / n
    return p, math.sqrt(p * (1.0 - p) / n)


def outage_probability(traces, grid: AngleGrid) -> tuple[float, float]:
    """Fraction of episodes whose estimate misses the true angle by more
    than one resolution cell, with binomial SE."""
    if not traces:
        raise ValueError("need at least one trace")
    n = len(traces)
    tol = grid.spacing
    p = sum(abs(grid.points[t.estimate] - t.phi_rad) > tol for t in traces) / n
    return p, math.sqrt(p * (1.0 - p) / n)


def spectral_efficiency(
    traces, total_slots: int, tau: int, noise: NoiseConfig
) -> tuple[float, float]:
    """Mean of (T - tau)/T * log2(1 + P |w^H a|^2 / sigma^2) over episodes."""
    if not traces:
        raise ValueError("need at least one trace")
    if total_slots < tau:
        raise ValueError("total_slots must be >= tau")
    overhead = (total_slots - tau) / total_slots
    p_over_s2 = noise.power_sqrt**2 / noise.noise_variance
    rates = np.array(
        [overhead * math.log2(1.0 + p_over_s2 * t.terminal_gain_sq) for t in traces]
    )
    if len(rates) == 1:
        return float(rates[0]), 0.0
    return float(rates.mean()), float(rates.std(ddof=1) / math.sqrt(len(rates)))


@dataclass(frozen=True)
class MetricsRow:
    algorithm: str
    snr_db: float
    trials: int
    poe: float
    poe_se: float
    outage: float
    outage_se: float
    se_bits: float
    se_se: float
    wall_ms: float


def _trial_batch(cfg: ScenarioConfig, parts: ScenarioParts, si: int, trial_indices):
    """Episodes for a block of trials at one SNR point.

    Returns {algorithm: [(trial, trace, seconds), ...]}.
    """
    noise = NoiseConfig.from_snr_db(cfg.snr_db[si], cfg.noise_variance)
    out = {name: [] for name in cfg.algorithms}
    for trial in trial_indices:
        if cfg.paired:
            draws = episode_draws(cfg, parts, stream_rng(cfg.seed, si, trial))
        for ai, name in enumerate(cfg.algorithms):
            if not cfg.paired:
                draws = episode_draws(cfg, parts, stream_rng(cfg.seed, si, trial, ai))
            t0 = time.perf_counter()
            trace = _run_algorithm(cfg, parts, noise, name, draws)
            out[name].append((trial, trace, time.perf_counter() - t0))
    return out


def sweep(cfg: ScenarioConfig, *, workers: int = 1, collect_traces: bool = False):
    """Run the full experiment grid and aggregate metrics.

    Returns a list of :class:`MetricsRow`, ordered by algorithm as
    configured and then by SNR point as configured.  With
    ``collect_traces`` also returns {(algorithm, snr_db): [traces]} with
    traces in trial order.
    """
    parts = ScenarioParts.from_config(cfg)
    rows: list[MetricsRow] = []
    all_traces: dict = {}
    per_point: dict = {}

    for si in range(len(cfg.snr_db)):
        chunks = _chunk(range(cfg.trials), workers)
        if workers > 1 and len(chunks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(
                    pool.map(_trial_batch_star, [(cfg, parts, si, c) for c in chunks])
                )
        else:
            results = [_trial_batch(cfg, parts, si, c) for c in chunks]
        for name in cfg.algorithms:
            merged = sorted(
                (item for res in results for item in res[name]), key=lambda it: it[0]
            )
            traces = [it[1] for it in merged]
            seconds = sum(it[2] for it in merged)
            per_point[(name, si)] = (traces, seconds)

    for name in cfg.algorithms:
        for si, snr in enumerate(cfg.snr_db):
            traces, seconds = per_point[(name, si)]
            noise = NoiseConfig.from_snr_db(snr, cfg.noise_variance)
            poe, poe_se = error_probability(traces)
            out_p, out_se = outage_probability(traces, parts.grid)
            se, se_se = spectral_efficiency(traces, cfg.total_slots, cfg.tau, noise)
            rows.append(
                MetricsRow(
                    name, snr, len(traces), poe, poe_se, out_p, out_se, se, se_se,
                    seconds * 1e3,
                )
            )
            if collect_traces:
                all_traces[(name, snr)] = traces

    return (rows, all_traces) if collect_traces else rows


def _trial_batch_star(args):
    return _trial_batch(*args)


def _chunk(indices, workers: int):
    idx = list(indices)
    if workers <= 1:
        return [idx]
    size = max(1, math.ceil(len(idx) / (workers * 4)))
    return [idx[i : i + size] for i in range(0, len(idx), size)]


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def metrics_csv(rows) -> str:
    """Render metric rows in the stable CSV format (9 significant digits)."""
    lines = [METRICS_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [
                    r.algorithm,
                    _fmt(r.snr_db),
                    str(r.trials),
                    _fmt(r.poe),
                    _fmt(r.poe_se),
                    _fmt(r.outage),
                    _fmt(r.outage_se),
                    _fmt(r.se_bits),
                    _fmt(r.se_se),
                    _fmt(r.wall_ms),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def traces_csv(trace_groups: dict) -> str:
    """Render per-slot trace rows for every (algorithm, snr_db) group."""
    lines = [TRACE_HEADER]
    for (name, snr), traces in trace_groups.items():
        for trial, tr in enumerate(traces):
            for t in range(len(tr.levels)):
                y, a = tr.observations[t], tr.fading[t]
                lines.append(
                    f"{name},{_fmt(snr)},{trial},{t + 1},{tr.levels[t]},{tr.indices[t]},"
                    f"{_fmt(y.real)},{_fmt(y.imag)},{_fmt(a.real)},{_fmt(a.imag)}"
                )
    return "\n".join(lines) + "\n"


def beliefs_csv(trace: EpisodeTrace) -> str:
    """Render captured per-slot belief snapshots as (t, i, mass) rows."""
    if trace.beliefs is None:
        raise ValueError("episode was run without capture_beliefs")
    lines = ["t,i,mass"]
    for t in range(trace.beliefs.shape[0]):
        for i in range(trace.beliefs.shape[1]):
            lines.append(f"{t + 1},{i},{_fmt(trace.beliefs[t, i])}")
    return "\n".join(lines) + "\n"
