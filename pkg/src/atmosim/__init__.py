"""atmosim: atmospheric and weather image-degradation simulators, restoration,
and a harness that scores simulators on fidelity, cost, invertibility and
differentiability."""

__version__ = "0.1.0"
