"""Constrained exchangeable random partitions: samplers, exact laws, experiments."""
