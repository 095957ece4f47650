"""Boundary calculus toolkit for hyperbolic groups: exact on free groups, proxies elsewhere."""

from .words import Word, GeneratorSet, ParseError, reduce, inverse, mul
from .presentations import (
    GroupPresentation,
    CayleyBall,
    cayley_ball,
    parse_presentation,
    load_presentation,
    check_hyperbolicity,
    check_small_cancellation,
    ElementaryGroupError,
    RadiusInsufficient,
)
from .free_boundary import ComplexQ, CylinderMeasure, StepFunction, VisualParams, ps_measure
from .deviation import expectation, deviation, deviation_table, lp_certificate

__version__ = "0.1.0"
