"""Link-level simulator for indoor visible-light MIMO complex modulation."""

__version__ = "0.1.0"
