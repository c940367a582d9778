"""Time-marched neural-network ansatz solver with domain coupling."""

__version__ = "0.1.0"
