"""Numerical laboratory for distorted interval diffeomorphisms.

Builds the six-generator group acting on [-1, 2], checks its identities and
supports numerically, estimates log-derivative variation growth, and emits
word-length certificates with matching derivative lower bounds.
"""
from .chart import X_FIELD, XHAT_FIELD, Chart, VectorField1D, flow, flow_derivative, make_chart, pushforward
from .config import ExperimentConfig
from .construction import (ConstructionKit, MarkerIndex, Schedule, build_kit, commutator_chain,
                           key_identity_check, realize, support_of)
from .diffeo import (IDENTITY, Diffeo, c1_distance, compose, conjugate, invert, numerically_equal,
                     power, sup_distance)
from .distortion import asymptotic_distortion, product_variation, var_log_derivative
from .certifiers import (Certificate, bs_power_word, derivative_growth_lower_bound,
                         fbar_power_certificate, kopell_check, lipschitz_chain_check)
from .errors import (ConfigError, ConstructionError, DiffeoLabError, PrecisionError,
                     ScheduleRangeError, TrivialElementError, WordLengthError)
from .words import GENERATORS, GeneratorWord

__version__ = "0.1.0"

__all__ = [
    "X_FIELD", "XHAT_FIELD", "Chart", "VectorField1D", "flow", "flow_derivative", "make_chart",
    "pushforward", "ExperimentConfig", "ConstructionKit", "MarkerIndex", "Schedule", "build_kit",
    "commutator_chain", "key_identity_check", "realize", "support_of", "IDENTITY", "Diffeo",
    "c1_distance", "compose", "conjugate", "invert", "numerically_equal", "power", "sup_distance",
    "asymptotic_distortion", "product_variation", "var_log_derivative", "Certificate",
    "bs_power_word", "derivative_growth_lower_bound", "fbar_power_certificate", "kopell_check",
    "lipschitz_chain_check", "ConfigError", "ConstructionError", "DiffeoLabError", "PrecisionError",
    "ScheduleRangeError", "TrivialElementError", "WordLengthError", "GENERATORS", "GeneratorWord",
]
