"""Physical constants shared across the package (SI units)."""

EPSILON_0 = 8.8541878128e-12
"""Vacuum permittivity, F/m."""

MU_0 = 1.25663706212e-6
"""Vacuum permeability, H/m."""
