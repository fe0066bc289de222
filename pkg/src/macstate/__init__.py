"""State-dependent MAC cooperation toolkit: regions, optimizer, binning simulator."""

__version__ = "0.1.0"

from .probcore import (  # noqa: F401
    Alphabet,
    CondPmf,
    Factor,
    JointPmf,
    Pmf,
    ValidationError,
    bernoulli_convolve,
    binary_entropy,
    conditional_mutual_information,
    entropy,
    joint_entropy,
    joint_from_factors,
    marginalize,
)
