"""Spectral Galerkin solver and operator-verification toolkit for the
symmetric coupled KdV system on the 2-pi torus.

Submodules
----------
fields       value types: mode sets, Hermitian spectral fields, pairs, norms,
             the gauge (interaction-representation) transform
terms        symbolic differentiation-by-parts term lists
operators    the multilinear operators (B1, B2, R3, B3, B4, high/low splits)
dynamics     Galerkin time integration, residual and convergence studies
contraction  fixed-point solvers for the modified first/second forms
verify       brute-force oracles, identity checks, empirical operator bounds
cli          command-line entry point (`ckdv`)
"""

from .fields import (
    FieldError,
    Gauge,
    ModeSet,
    SpectralField,
    SpectralPair,
    energy_functional,
    field_from_json,
    field_to_json,
    gauge,
    hamiltonian,
    inner0,
    make_field,
    make_pair,
    pair_norm,
    project_high,
    project_low,
    random_field,
    random_pair,
    sobolev_norm,
    zero_field,
)
from .operators import (
    ArgumentFilter,
    OperatorId,
    PhaseCache,
    b1,
    b1_high_vec,
    b1_low_vec,
    b1_vec,
    b2,
    b2_high_vec,
    b3,
    b30_vec,
    b4,
    b40_vec,
    phase4,
    r3,
    r3_high_vec,
    r3nres,
    r3res_closed,
    resonance_indicator,
    split_r3q,
    trace_evaluations,
)

__version__ = "0.1.0"
