"""apl-survival - Adaptive prototype learning for multimodal survival prediction."""

__version__ = "0.1.0"
