"""Linear regression with labels shuffled by an unknown permutation."""
from .errors import (
    ConfigError,
    DegenerateLabels,
    DimensionMismatch,
    EmptyAccumulator,
    IndexOutOfRange,
    IngestError,
    InvalidAlphabet,
    InvalidBounds,
    InvalidG,
    RankDeficient,
    ShuffledRegressionError,
)
from .linalg import LeastSquares, RegressionFit, ols_fit, residual_ss
from .estimators import (
    EMConfig,
    FitResult,
    GroupedDataset,
    fit_hard_em,
    fit_hard_em_grouped,
    fit_ols_baseline,
    fit_stochastic_em,
    fit_stochastic_em_grouped,
    parameter_error,
)

__version__ = "0.1.0"
