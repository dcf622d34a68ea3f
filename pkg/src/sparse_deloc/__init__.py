"""Numerical laboratory for eigenvector delocalization of critical
Erdos-Renyi graphs: Stieltjes transforms, resolvent local laws, degree tails
and delocalization phase diagrams."""

__version__ = "0.1.0"
