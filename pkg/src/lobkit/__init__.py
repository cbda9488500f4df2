"""State-dependent limit order book simulation and calibration toolkit."""

from .book import (
    Fill,
    MarketState,
    Order,
    OrderBook,
    Side,
)
from .cancellation import (
    CancellationParams,
    DepthModelInputs,
    calibrate_theta,
    expected_depth,
    hyp2f1,
    priority_cdf,
    priority_cdf_inverse,
    priority_loglik,
    priority_pdf,
)
from .calibration import (
    CovariatePath,
    FitReport,
    empirical_state_intensity,
    fit_cancellation_mle,
    fit_mixture_em,
    fit_poisson_rate,
    fit_state_intensity_mle,
    fit_student,
    marginal_intensity,
    point_process_loglik,
)
from .intensity import (
    IntensityParams,
    covariate_vector,
    eval_constant_intensity,
    eval_state_intensity,
)
from .placement import (
    MixtureParams,
    StudentParams,
    TickPmf,
    discretize_to_ticks,
    mixture_pdf,
    placement_pmf,
    sample_offset,
    student_pdf,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
