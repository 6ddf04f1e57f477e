from .driver import (SolverConfig, StageTrace, base_eigenvalue, collapse_check, gradient_check,
                     min_eigenvector_init, minimize, random_init, smallest_eigenvalue, write_trace_csv)
from .optimizer import lbfgs
from .eigensolver import lobpcg
