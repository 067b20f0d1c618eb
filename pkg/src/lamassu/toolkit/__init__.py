"""Experiment harness and command line."""
