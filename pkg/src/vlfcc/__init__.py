"""Variable-length feedback coding with punctured convolutional codes.

Building blocks: rate-1/3 convolutional codes (terminated or tail-biting)
with exact word-posterior decoding, pseudo-random symbol schedules,
reliability-threshold and CRC stopping rules, a deterministic Monte-Carlo
campaign engine, random-coding achievability bounds, and a transmission-
length optimizer for m-transmission incremental redundancy.
"""

from .bounds import (
    BoundPoint,
    gamma_threshold,
    m_transmission_bound,
    mc_tau_tail,
    repeat_after_n_bound,
    vlf_achievability,
    wald_bound,
)
from .channel import (
    ChannelSpec,
    Observation,
    biawgn,
    biawgn_db,
    bsc,
    capacity,
    capacity_awgn_real,
    info_density_bound,
    info_density_step,
    llr_of,
    transmit,
)
from .crc import CrcPoly, crc_append, crc_check, crc_remainder
from .lenopt import (
    GridSample,
    InfeasibleLengths,
    LengthVector,
    RetransmissionModel,
    estimate_retrans_grid,
    fit_logpoly,
    objective_latency,
    optimize_lengths,
)
from .punctures import TransmissionSchedule, fisher_yates_permutation, make_schedule, symbol_at
from .rova import DecodeOutcome, brute_force_map, rova_tailbiting, rova_terminated, viterbi
from .trellis import (
    REFERENCE_CODES,
    TAIL_BITING,
    TERMINATED,
    CodeInfo,
    DistanceSpectrum,
    GeneratorSet,
    Trellis,
    build_trellis,
    distance_spectrum,
    encode,
    tail_biting_start_state,
)
from .vlfsim import (
    CampaignConfig,
    EstimatorReport,
    StoppingPolicy,
    TrialResult,
    confidence_interval,
    latency_from_nack,
    run_campaign,
    run_trial,
)

__version__ = "0.1.0"
