"""Randomized-accelerated contour-integration eigensolver."""
