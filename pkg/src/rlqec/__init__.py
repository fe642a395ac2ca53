"""Stabilizer code and encoding-circuit discovery with reinforcement learning."""

from .analysis import classify_families, distance, failure_probability, weight_enumerators
from .env import Circuit, CodeEnv, EnvConfig, Episode, GateSetSpec, action_space, css_env, prune
from .kl import KLKernel, kl_check, kl_check_batched
from .noise import ErrorSet, NoiseModel, enumerate_errors
from .symplectic import GateAction, PauliString, Tableau, apply_gate, apply_gate_batched

__all__ = [
    "Circuit",
    "CodeEnv",
    "EnvConfig",
    "Episode",
    "ErrorSet",
    "GateAction",
    "GateSetSpec",
    "KLKernel",
    "NoiseModel",
    "PauliString",
    "Tableau",
    "action_space",
    "apply_gate",
    "apply_gate_batched",
    "classify_families",
    "css_env",
    "distance",
    "enumerate_errors",
    "failure_probability",
    "kl_check",
    "kl_check_batched",
    "prune",
    "weight_enumerators",
]
