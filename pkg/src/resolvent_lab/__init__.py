"""Resolvent growth of matrices and of their holomorphic functions."""
from .operator_core import (ComplexMatrix, SpectrumResult, build, diagonal, direct_sum,
                            jordan, min_singular_value, random_triangular, resolvent_norm,
                            resolvent_norms, spectrum)
from .region_sets import (BranchDisc, CompactSet, Disc, LipschitzCurve, RegionConfig,
                          distance, fit_admissibility, preimage_set, thickened_measure)
from .func_calculus import (PowerSeries, Polynomial, Rational, critical_data, dunford_apply,
                            partial_fraction_coeffs, phi_z, polynomial, preimages, psi_lambda,
                            resolvent_identity_check)

__version__ = "0.1.0"
