"""Approximate model checking of quantum Markov chains against MLTL formulas."""

__version__ = "0.1.0"
