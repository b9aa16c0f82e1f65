"""Physics-informed generative adversarial networks for stochastic differential equations."""

__version__ = "0.1.0"
