"""Reference evaluator worker for the candidate-patch search loop.

Speaks the one-line-JSON stdio protocol: a single evaluation request on
stdin, a single result on stdout, diagnostics on stderr. Simulate mode
compiles and statically checks the source, then scores it from per-dataset
difficulty priors with a bounded deterministic perturbation; real mode
delegates to a configured training command.
"""

from .config import CONFIG_ENV, DEFAULT_PRIORS, ConfigError, WorkerConfig, load_config
from .scan import find_undefined_self_attribute
from .worker import main, simulate_accuracy

__all__ = [
    "CONFIG_ENV",
    "DEFAULT_PRIORS",
    "ConfigError",
    "WorkerConfig",
    "load_config",
    "find_undefined_self_attribute",
    "main",
    "simulate_accuracy",
]
