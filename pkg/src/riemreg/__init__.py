"""Inf/sup convolutions and Lasry-Lions regularization on Riemannian model
spaces, with numerical checkers for the regularity they produce."""

from .errors import (
    CutLocusExceeded,
    DomainError,
    LambdaTooLarge,
    LeftWorkingRegion,
    MissingMetadata,
    NoFeasibleEpsilon,
    ParamConstraintViolated,
    ShootingDiverged,
)
from .manifolds import DELTA_CUT, Euclidean, Hyperbolic, Product, Sphere, model, product

__version__ = "0.1.0"

__all__ = [
    "CutLocusExceeded",
    "DELTA_CUT",
    "DomainError",
    "Euclidean",
    "Hyperbolic",
    "LambdaTooLarge",
    "LeftWorkingRegion",
    "MissingMetadata",
    "NoFeasibleEpsilon",
    "ParamConstraintViolated",
    "Product",
    "ShootingDiverged",
    "Sphere",
    "model",
    "product",
]
