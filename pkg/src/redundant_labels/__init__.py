"""Detect redundant activity labels in process-mining event logs."""

__version__ = "0.1.0"
