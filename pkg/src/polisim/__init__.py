"""polisim: concurrent multi-agent society simulation in a deterministic grid world."""

__version__ = "0.1.0"
