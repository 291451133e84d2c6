"""Linear optical circuits: Fock semantics, rewriting to normal forms, synthesis."""

__version__ = "0.1.0"

from .circuit import BeamSplitter, Circuit, Detector, PhaseShifter, Source, Swap, load, parse_dsl, print_dsl
from .fock import FockVector, eval_circuit
from .rewrite import NormalForm, ZeroForm, normalize, ranking
from .synthesis import TriangleParams, synthesize_triangle
from .unitary import matrix_of

__all__ = [
    "BeamSplitter",
    "Circuit",
    "Detector",
    "FockVector",
    "NormalForm",
    "PhaseShifter",
    "Source",
    "Swap",
    "TriangleParams",
    "ZeroForm",
    "__version__",
    "eval_circuit",
    "load",
    "matrix_of",
    "normalize",
    "parse_dsl",
    "print_dsl",
    "ranking",
    "synthesize_triangle",
]
