"""A small probabilistic programming system with trace MH and sampler synthesis."""
from .reader import ReaderError, parse_expr, parse_program, print_expr, print_program
from .lang import EvalError
from .trace import Program, Trace, run_program
from .infer import (InferenceError, MHConfig, RejectionFailure, SampleSet, mh_chain,
                    posterior_enumerate, rejection_sample)

__version__ = "0.1.0"

__all__ = [
    "ReaderError", "parse_expr", "parse_program", "print_expr", "print_program", "EvalError",
    "Program", "Trace", "run_program", "InferenceError", "RejectionFailure", "MHConfig",
    "SampleSet", "mh_chain", "rejection_sample", "posterior_enumerate", "__version__",
]
