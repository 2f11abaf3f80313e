"""Verification laboratory and desk-scale slab solver for the linearized
regularized 13-moment (R13) equations with Onsager wall boundary conditions."""

__version__ = "0.1.0"
