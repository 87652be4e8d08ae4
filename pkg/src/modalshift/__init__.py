"""Agent-based microsimulation of residential location and commuting mode
choice, with scenario evaluation of transport development plans."""

__version__ = "0.1.0"
