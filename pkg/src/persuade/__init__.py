"""Workbench for multi-sender persuasion games.

Exact posterior/utility evaluation, exact and learned equilibrium
finding, hardness-reduction instance builders, and scenario generators.
"""

__version__ = "0.1.0"

from .game import (
    CapError,
    FixedMap,
    GameInstance,
    Lexicographic,
    Playthrough,
    Posterior,
    SenderFavoring,
    ex_ante_utilities,
    ex_ante_utilities_batch,
    ex_ante_utilities_fixed_interpretation,
    induced_action_map,
    joint_signal_prob,
    joint_signals,
    posterior,
    receiver_best_action,
    sample_playthrough,
    validate_joint_policy,
    validate_policy,
)
from .lp import LinearProgram, LpFailure, LpResult, solve_lp
from .equilibria import (
    BestResponseResult,
    EquilibriumReport,
    PreconditionError,
    RevelationCertificate,
    best_response_exact,
    best_response_fixed_interpretation,
    full_revelation_profile,
    local_ne_verify,
    verify_nash,
)
from .reductions import (
    BimatrixGame,
    PublicPersuasionInstance,
    ReductionParams,
    bimatrix_to_persuasion,
    pub_sender_utility,
    public_to_best_response,
)
from .neural import (
    DeluParams,
    DnlParams,
    Gradients,
    MlpParams,
    backward,
    forward,
    forward_delu,
    forward_dnl,
    forward_relu,
    init_delu,
    init_dnl,
    init_relu,
    linear_piece,
    load_params,
    save_params,
)
from .learning import (
    EgConfig,
    PipelineResult,
    TrainConfig,
    UtilityDataset,
    UtilitySurrogate,
    extragradient,
    find_local_ne,
    sample_dataset,
    train,
)
from .scenarios import (
    SyntheticSpec,
    product_ads_instance,
    quality_ads_instance,
    ride_hailing_instance,
    synthetic_instance,
)
from .reference import didactic_game, two_block_equilibrium_policies, two_block_game
