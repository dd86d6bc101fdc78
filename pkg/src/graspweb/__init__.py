"""Contact-web grasp skill training and evaluation suite."""

__version__ = "0.1.0"
