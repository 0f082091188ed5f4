"""
NEEP - neuro-encoded expression programming
Symbolic regression engine, experiment runner and FastAPI service
"""

__version__ = "1.0.0"
