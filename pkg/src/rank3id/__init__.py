"""Identifiability of rank-2 and rank-3 complex tensors."""
