"""Greedy joint syntactic/semantic dependency parsing with stack-LSTM scoring."""

__version__ = "0.1.0"
