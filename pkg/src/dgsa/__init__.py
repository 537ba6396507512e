"""Degenerate ground-space approximation for gapped 1D chains."""
