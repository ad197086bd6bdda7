"""Time-spread pilot channel estimation for multi-tag backscatter networks."""

__version__ = "0.1.0"

from .config import ConfigError, InfeasibleScenarioError, MultiUserConfig, ScenarioConfig, preset  # noqa: E402
from .estimators import (  # noqa: E402
    ChannelEstimate,
    CrlbReport,
    crlb_reference,
    lmmse_estimate,
    lmmse_stacked,
    ls_estimate,
    mmse_estimate,
    multiuser_ls_estimate,
    mvu_estimate,
    scaled_ls_estimate,
    silent_estimate,
)
from .fading import (  # noqa: E402
    ChannelSet,
    FadingParams,
    LinkGeometry,
    LinkShapes,
    beta_moments,
    gen_channels,
    gen_multiuser_channels,
    nakagami_complex_sample,
    noise_variance,
    umi_pathloss,
)
from .metrics import GapFit, MseRecord, aggregate, fit_gap_lambda, normalized_mse  # noqa: E402
from .pilots import (  # noqa: E402
    PilotMatrix,
    PilotValidationReport,
    dft_pilot,
    hadamard_pilot,
    make_pilot,
    modified_zc_pilot,
    validate_pilot,
    zc_sequence,
)
from .runner import derive_trial_seed, run_scenario  # noqa: E402
from .sysmodel import SourcePilot, synth_multiuser_rx, synth_silent_rx, synth_timespread_rx  # noqa: E402
