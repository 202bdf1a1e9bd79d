"""Text-guided targeted attacks on deep hashing retrieval via diffusion latents."""

from .attack import AttackConfig, AttackResult, run_attack
from .config import ExperimentConfig, load_config, parse_config
from .experiments import RunReport, ablation_sweep, run_pipeline

__all__ = [
    "AttackConfig",
    "AttackResult",
    "ExperimentConfig",
    "RunReport",
    "ablation_sweep",
    "load_config",
    "parse_config",
    "run_attack",
    "run_pipeline",
]
