"""Simulator for the dark-state adiabatic Rydberg two-qubit gate and the blockade gate."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover - running from a source tree
    __version__ = "0.0.0"

from .config import ConfigError, GateConfig, load_config
from .protocol import GateResult, pedersen_fidelity, run_gate

__all__ = ["ConfigError", "GateConfig", "GateResult", "load_config", "pedersen_fidelity", "run_gate",
           "__version__"]
