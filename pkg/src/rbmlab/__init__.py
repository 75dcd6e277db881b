"""Restricted Boltzmann machine training, sampling and diagnostics."""
