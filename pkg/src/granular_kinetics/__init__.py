"""DSMC solver and verification harness for the freely cooling inelastic gas."""

__version__ = "0.1.0"
