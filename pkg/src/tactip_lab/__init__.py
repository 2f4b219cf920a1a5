"""Software pipeline for an optical tactile (TacTip-style) sensor with a built-in simulator."""

__version__ = "0.1.0"
