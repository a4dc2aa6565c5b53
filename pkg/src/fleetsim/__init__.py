"""Agent-based mobility-on-demand fleet simulator and rebalancing framework."""

__version__ = "0.1.0"
