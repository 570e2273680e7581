"""Linear non-Gaussian component analysis.

Estimates non-Gaussian signal components and a Gaussian noise subspace from
linear mixtures, and selects the number of signal components with a
resampling test.
"""

__version__ = "0.1.0"

from ._validation import InputError, SingularCovarianceError  # noqa: E402
from .discrepancy import (  # noqa: E402
    KINDS,
    ConvergenceError,
    DiscrepancyKind,
    Score,
    TiltModel,
    directional_derivative,
    evaluate,
    gpois_fit,
    gpois_stat,
    jb_stat,
    kurt_stat,
    score,
    skew_stat,
    statistic,
)
from .estimator import (  # noqa: E402
    Estimate,
    EstimatorOptions,
    estimate_max,
    estimate_maxmin,
    fixed_point_step,
    multi_restart,
)
from .linalg import (  # noqa: E402
    SignedPermutation,
    WhiteningResult,
    center,
    center_whiten,
    hungarian,
    random_mixing,
    signed_perm_error,
    sym_orthogonalize,
    whiten,
)
from .model import LNGCA  # noqa: E402
from .qtest import (  # noqa: E402
    KTestResult,
    SelectionResult,
    TestConfig,
    select_q,
    select_q_binary,
    select_q_sweep,
    test_k,
)
from .simulation import (  # noqa: E402
    ExperimentConfig,
    TrialRecord,
    image_unmix,
    run_experiment1,
    run_experiment2,
    run_experiment3,
)
from .sources import SOURCES, SourceSpec, gen_gaussian, gen_sources  # noqa: E402

__all__ = [
    "LNGCA",
    "KINDS",
    "ConvergenceError",
    "DiscrepancyKind",
    "Estimate",
    "EstimatorOptions",
    "ExperimentConfig",
    "InputError",
    "KTestResult",
    "SOURCES",
    "Score",
    "SelectionResult",
    "SignedPermutation",
    "SingularCovarianceError",
    "SourceSpec",
    "TestConfig",
    "TiltModel",
    "TrialRecord",
    "WhiteningResult",
    "center",
    "center_whiten",
    "directional_derivative",
    "estimate_max",
    "estimate_maxmin",
    "evaluate",
    "fixed_point_step",
    "gen_gaussian",
    "gen_sources",
    "gpois_fit",
    "gpois_stat",
    "hungarian",
    "image_unmix",
    "jb_stat",
    "kurt_stat",
    "multi_restart",
    "random_mixing",
    "run_experiment1",
    "run_experiment2",
    "run_experiment3",
    "score",
    "select_q",
    "select_q_binary",
    "select_q_sweep",
    "signed_perm_error",
    "skew_stat",
    "statistic",
    "sym_orthogonalize",
    "test_k",
    "whiten",
]
