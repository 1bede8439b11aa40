"""Flag-based Steane-code memory simulation, decoding, and attribution."""

from .steane import CodeDefinition, PauliString, steane_code

__all__ = ["CodeDefinition", "PauliString", "steane_code"]

__version__ = "0.1.0"
