"""Two-level overlapping Schwarz methods on space-filling-curve partitions with simulated faults."""

from .coarse import CoarseSpace, build_restriction
from .errors import (
    ConfigurationError,
    ConsistencyError,
    EstimationError,
    InvalidInputError,
    InvalidMatrixError,
    NumericalBreakdownError,
    RecoveryFailedError,
    ResourceError,
    SfcddError,
    UnsupportedSizeError,
)
from .fault import FaultEngine, FaultSchedule
from .grid import GridSpec, diagonal_transform, discretize, energy_norm, export_matrix_market
from .harness import ExperimentConfig, ResultTable, emit_results, load_config, load_results, run_experiment
from .partition import Partition, build_partition, compute_weights
from .schwarz import PreconditionerSpec, SchwarzPreconditioner, build_preconditioner
from .sfc import HAVE_COMPILED, Ordering, SfcOrdering, cmp, hilbert_key, sfc_argsort, sfc_sort
from .solvers import ConvergenceRecord, SpectralEstimate, estimate_extremes, pcg, richardson

__version__ = "0.1.0"
