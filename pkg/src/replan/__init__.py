"""Interactive algorithmic recourse with online preference elicitation."""

__version__ = "0.1.0"
