"""Numerical laboratory for fractional Gagliardo seminorms and rearrangement."""

__version__ = "0.1.0"

from .constants import FracParams, alpha_n, gamma, sharp_sobolev_constant, sphere_measure
from .geometry import Ball, Box, Empty, GridMask, Interval, Union, domain_from_json, symmetrize
from .grids import GridFunction, GridSpec
from .rearrange import RadialProfile, distribution, lp_norm, rearrange
from .seminorm import (
    EnergyResult,
    cross_term,
    energy_domain,
    energy_fullspace,
    energy_rearranged,
    rayleigh_quotient,
)

__all__ = [
    "Ball",
    "Box",
    "Empty",
    "EnergyResult",
    "FracParams",
    "GridFunction",
    "GridMask",
    "GridSpec",
    "Interval",
    "RadialProfile",
    "Union",
    "alpha_n",
    "cross_term",
    "distribution",
    "domain_from_json",
    "energy_domain",
    "energy_fullspace",
    "energy_rearranged",
    "gamma",
    "lp_norm",
    "rayleigh_quotient",
    "rearrange",
    "sharp_sobolev_constant",
    "sphere_measure",
    "symmetrize",
]
