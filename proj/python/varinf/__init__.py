import json

from ._core import (
    ConfigError,
    ContractError,
    DimensionError,
    DivergenceError,
    SupportError,
    __version__,
    bound_sweep,
    em_fit,
    kl_discrete,
    kl_histogram,
    make_dataset,
    mode_coverage,
    sample_checkpoint,
    taylor_probe,
)
from ._core import run_experiment as _run_experiment


def run_experiment(config, overrides=()):
    """Train every (model, seed) pair of `config` (dict or JSON string) and return the summary."""
    text = config if isinstance(config, str) else json.dumps(config)
    return json.loads(_run_experiment(text, list(overrides)))


__all__ = [
    "ConfigError",
    "ContractError",
    "DimensionError",
    "DivergenceError",
    "SupportError",
    "__version__",
    "bound_sweep",
    "em_fit",
    "kl_discrete",
    "kl_histogram",
    "make_dataset",
    "mode_coverage",
    "run_experiment",
    "sample_checkpoint",
    "taylor_probe",
]
