"""fogsim: deterministic simulator and policy library for hierarchical fog computing."""

__version__ = "0.1.0"
