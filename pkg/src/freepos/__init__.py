"""k-positivity of linear maps from supports of free convolution powers,
with the GUE random-matrix experiments built on it."""
from ._kernels import BACKEND
from .errors import (
    ConvergenceFailure,
    DomainError,
    FreeposError,
    NotIsometry,
    NumericalFailure,
    ShapeMismatch,
    TooLarge,
    UnsupportedVariant,
)
from .freeconv import FreePowerResult, compression_law, free_power
from .measures import (
    Affine,
    Atomic,
    Empirical,
    FreePoisson,
    Semicircle,
    SupportProfile,
    cauchy_transform,
    free_cumulants,
    mean,
    quantile,
    support,
)
from .positivity import (
    PositivityVerdict,
    finite_eps_small_rank_verdict,
    is_k_positive,
    max_k_positive,
    mp_bottom,
    semicircle_threshold,
    small_rank_threshold,
)
from .rmt import BipartiteOperator, HermitianMatrix, Seed

__version__ = "0.1.0"
