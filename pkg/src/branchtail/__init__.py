"""Small-value asymptotics of supercritical branching processes with immigration."""

__version__ = "0.1.0"
