"""Realise linear quantum filters from their frequency-domain transfer matrices.

The pipeline runs transfer matrix -> minimal state space -> physically
realisable state space -> (S, L, H) oscillator -> optical hardware parameters,
with frequency-domain solvers to check the result including optical loss.
"""

from qfilt.tfio import RationalFunction, TransferMatrix, parse_rational
from qfilt.statespace import StateSpace, ss_to_tf, tf_to_minimal_ss
from qfilt.realizability import (
    check_realizable,
    check_symplectic_tf,
    j_factorize,
    solve_X,
    transform_to_realizable,
)
from qfilt.oscillator import GeneralizedOpenOscillator, extract_slh, slh_to_ss

__version__ = "0.1.0"

__all__ = [
    "RationalFunction",
    "TransferMatrix",
    "parse_rational",
    "StateSpace",
    "ss_to_tf",
    "tf_to_minimal_ss",
    "check_realizable",
    "check_symplectic_tf",
    "j_factorize",
    "solve_X",
    "transform_to_realizable",
    "GeneralizedOpenOscillator",
    "extract_slh",
    "slh_to_ss",
]
