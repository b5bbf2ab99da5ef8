"""sdasim - secure data aggregation simulator for mobile sensor networks."""

__version__ = "0.1.0"
