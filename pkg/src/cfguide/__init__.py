"""Guided decoding with expert token highlights, entropy gating and review tooling."""

from cfguide.guidance import GuidanceConfig, HighlightMask, guided_decode
from cfguide.models import MicroTransformer, OneLayerToy, TableModel
from cfguide.uncertainty import GatePolicy, predictive_entropy

__all__ = [
    "GuidanceConfig",
    "HighlightMask",
    "guided_decode",
    "MicroTransformer",
    "OneLayerToy",
    "TableModel",
    "GatePolicy",
    "predictive_entropy",
]

__version__ = "0.1.0"
