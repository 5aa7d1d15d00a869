"""Computer-assisted construction and spectral assessment of a two-cycle.

The integrodifference equation ``N_{t+1} = int K(x - y) F(N_t(y)) dy`` with the
Laplace kernel is reduced to a reversible four-dimensional ODE.  A
spatially inhomogeneous two-cycle is a connecting orbit of that ODE, built
from a Taylor parameterization of a stable manifold and a Chebyshev
boundary-value problem, each validated by a Newton-Kantorovich argument in
interval arithmetic.  An Evans function computed with the compound-matrix
method gives a numerical stability assessment.
"""

from . import bvp, evans, interval, manifold, model, prover, seqspace, twocycle
from .bvp import BvpProblem, BvpUnknowns, ConnectingOrbit
from .evans import EvansContour, EvansStability, SpectralSetup
from .exceptions import (DomainError, EnclosureError, IdecycleError, InconclusiveError,
                         ModelDomainError, ProofError, SeedError, SolverError,
                         StaleArtifactError, UnsupportedRigorError)
from .interval import Interval
from .manifold import ManifoldCoeffs, ManifoldProblem, StableManifold
from .model import GrowthModel
from .prover import BoundSet, ProofCertificate
from .seqspace import ChebSeq, TaylorSeq2, WeightVector
from .twocycle import TwoCycle, TwoCycleProfile

__version__ = "0.1.0"

__all__ = [
    "bvp", "evans", "interval", "manifold", "model", "prover", "seqspace", "twocycle",
    "BvpProblem", "BvpUnknowns", "ConnectingOrbit",
    "EvansContour", "EvansStability", "SpectralSetup",
    "DomainError", "EnclosureError", "IdecycleError", "InconclusiveError",
    "ModelDomainError", "ProofError", "SeedError", "SolverError",
    "StaleArtifactError", "UnsupportedRigorError",
    "Interval", "ManifoldCoeffs", "ManifoldProblem", "StableManifold", "GrowthModel",
    "BoundSet", "ProofCertificate", "ChebSeq", "TaylorSeq2", "WeightVector",
    "TwoCycle", "TwoCycleProfile",
]
