"""Moment-closure and Markov-chain analysis of finite-size Wilson-Cowan networks."""

from .activation import Activation
from .errors import (
    ConfigError,
    CycleNotFound,
    EvaluationError,
    IntegrationError,
    ModelError,
    MomentFieldError,
    NotHopfCandidate,
    OrbitNotClosedError,
    SizeRefusal,
)
from .model import MomentState, Variant, jacobian, rhs, total_current, wc_jacobian
from .network import NetworkConfig, builtin_config, load_config, model1, model2, one_population

__version__ = "0.1.0"
