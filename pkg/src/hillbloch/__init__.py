"""Bloch spectra and large-eigenvalue asymptotics of matrix Hill operators ``-y'' + Q(x) y``.

Two independent back-ends compute Bloch eigenvalues: a Fourier-Galerkin
truncation (``galerkin``) and monodromy shooting (``oracle``).  ``asymptotics``
checks the leading-order eigenvalue and eigenfunction asymptotics and
``spectrum`` assembles bands and gaps.
"""
from .errors import *  # noqa: F401,F403
from .galerkin import BlochParams, BlochSolution, assemble, bloch_eigenvalues, solve
from .linalg import EigenDecomposition, eig_hermitian
from .potential import (MatrixPotential, from_fourier, from_samples, load_potential,
                        mean_spectrum, random_trig_potential)
from .spectrum import (BandTable, FiniteGapVerdict, GapReport, detect_gaps,
                       finite_gap_condition, gap_census_demo, merge_reports, sweep_bands)

__all__ = [
    "BandTable", "BlochParams", "BlochSolution", "EigenDecomposition", "FiniteGapVerdict",
    "GapReport", "MatrixPotential", "assemble", "bloch_eigenvalues", "detect_gaps",
    "eig_hermitian", "finite_gap_condition", "from_fourier", "from_samples", "gap_census_demo",
    "load_potential", "mean_spectrum", "merge_reports", "random_trig_potential", "solve",
    "sweep_bands",
]
