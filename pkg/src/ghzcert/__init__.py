"""Device-independent certification of GHZ distillation: MABK games, tradeoff functions, rates and a protocol simulator."""

__version__ = "0.1.0"

from .certify import (
    CertificationParams,
    RateCertificate,
    asymptotic_distill_rate,
    certified_rate,
    completeness_bound,
    eta,
    eta_opt,
    one_shot_distill_bound,
    v_term,
)
from .ghz import GhzDiagonalSpec, SourceModel, ghz_diagonal_state, ghz_state, make_source
from .mabk import MabkGame, ObservablePair, mabk_operator, mabk_value, winning_probability_exact
from .protocol import DeviceModel, Transcript, estimate_abort_probability, run_protocol, run_protocol_with_projection
from .qmath import DensityMatrix, PureState, partial_trace, von_neumann_entropy

__all__ = [
    "CertificationParams",
    "DensityMatrix",
    "DeviceModel",
    "GhzDiagonalSpec",
    "MabkGame",
    "ObservablePair",
    "PureState",
    "RateCertificate",
    "SourceModel",
    "Transcript",
    "asymptotic_distill_rate",
    "certified_rate",
    "completeness_bound",
    "estimate_abort_probability",
    "eta",
    "eta_opt",
    "ghz_diagonal_state",
    "ghz_state",
    "make_source",
    "mabk_operator",
    "mabk_value",
    "one_shot_distill_bound",
    "partial_trace",
    "run_protocol",
    "run_protocol_with_projection",
    "v_term",
    "von_neumann_entropy",
    "winning_probability_exact",
]
