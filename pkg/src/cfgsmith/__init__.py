"""Configuration synthesis for parameterized hardware.

A configurable design is a symbolic transition system whose configuration
variables never change.  Given an input/output example trace, the design is
unrolled, the trace is asserted, and an SMT solver either finds configuration
values reproducing the trace or proves none exist.
"""

from cfgsmith.frontend import Trace, parse_btor2, parse_sts, parse_trace
from cfgsmith.terms import TransitionSystem
from cfgsmith.unroll import ConfigProblem, build_config_formula, extract_configuration

__version__ = "0.1.0"

__all__ = [
    "ConfigProblem",
    "Trace",
    "TransitionSystem",
    "build_config_formula",
    "extract_configuration",
    "parse_btor2",
    "parse_sts",
    "parse_trace",
]
