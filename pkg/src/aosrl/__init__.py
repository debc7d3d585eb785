"""Age-of-Semantics status-update scheduling over an IRS-aided relay network,
with online and offline deep actor-critic learners and a tabular oracle."""

__version__ = "0.1.0"
