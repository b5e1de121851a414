"""Finite-volume laboratory for Anderson-type operators with finite-rank
random couplings: Green matrices, polynomial multiplicity certificates and
eigenvalue-count statistics."""

__version__ = "0.1.0"
