"""Experiment harness: fractal configurations, the gallery, integrands, convergence studies and output."""
