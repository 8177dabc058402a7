"""Training-free architecture scoring: zero-shot proxies, rank correlation and
hardware-constrained Pareto search over a 4-node cell space."""

__version__ = "0.1.0"
