"""adscout: reasoning-guided UI exploration for ad-trigger discovery in simulated apps."""

__version__ = "0.1.0"
