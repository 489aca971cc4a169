"""Sequential mmWave initial beam alignment simulation library.

Builds hierarchical beamforming codebooks over a discretized
angle-of-arrival grid, runs sequential alignment policies that jointly
learn the angle and the complex fading coefficient, and measures error
probability and expected spectral efficiency across raw SNR.
"""

from .arrays import (
    AngleGrid,
    ArrayConfig,
    beam_gain,
    cn_density,
    cn_log_density,
    cn_sample,
    grid_gains,
    steering_matrix,
    steering_vector,
)
from .channel import (
    AR1Rician,
    ChannelState,
    DEFAULT_AR1_G,
    FadingProcess,
    IIDGaussian,
    NoiseConfig,
    StaticKnown,
    StaticUnknown,
    g_from_coherence,
    initial_alpha,
    observe,
    prior_moments,
    step_fading,
    stream_rng,
)
from .codebook import (
    CoverageSet,
    HierCodebook,
    build_codebook,
    children,
    export_codebook,
    parent,
    read_codebook_table,
)
from .inference import (
    AlphaGrid,
    JointPosteriorGrid,
    KalmanBank,
    codeword_mass,
    kalman_update,
    marginalize_phi,
    posterior_from_log_likelihood,
    uniform_phi,
    update_iid_gaussian,
    update_joint,
    update_kalman_bayes,
    update_known_alpha,
)
from .policy import (
    BeamChoice,
    BisectionState,
    bisection_advance,
    bisection_estimate,
    bisection_select,
    bisection_stage_lengths,
    final_estimate,
    hiepm_select,
)
from .simulate import (
    ALGORITHMS,
    EpisodeDraws,
    EpisodeTrace,
    MetricsRow,
    ScenarioConfig,
    ScenarioParts,
    episode_draws,
    error_probability,
    metrics_csv,
    outage_probability,
    run_episode,
    spectral_efficiency,
    sweep,
    traces_csv,
)

__version__ = "0.1.0"
