from .crossplay import ConfigMismatchError, CrossPlayMatrix, crossplay
from .grounded import CATEGORIES, GroundedPlayReport, UnsupportedEnvError, grounded_play_report
from .verify import SUITES, VerificationReport, verify

__all__ = [
    "CATEGORIES",
    "ConfigMismatchError",
    "CrossPlayMatrix",
    "GroundedPlayReport",
    "SUITES",
    "UnsupportedEnvError",
    "VerificationReport",
    "crossplay",
    "grounded_play_report",
    "verify",
]
