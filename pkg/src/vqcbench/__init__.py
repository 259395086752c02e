"""Benchmark suite for variational quantum classifiers: statevector simulator,
data encodings, strongly entangling ansatz, adjoint gradients, training and
sweep reporting."""

__version__ = "0.1.0"
