"""Spectral stability of Laplace eigenvalues under domain perturbation."""
