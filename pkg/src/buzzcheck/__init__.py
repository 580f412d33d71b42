"""Backtesting and replication toolkit for pageview-buzz tennis betting strategies."""

__version__ = "0.1.0"
