"""Pairwise key establishment and refresh protocol."""
