"""Multiview CCA for pathological speech detection pipelines."""
