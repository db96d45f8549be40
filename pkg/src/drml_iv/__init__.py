"""Doubly robust machine-learning estimation for binary instrumental variables.

The public surface mirrors the analysis pipeline:

* :mod:`drml_iv.data_model` -- dataset container, CSV loading, instrument construction
* :mod:`drml_iv.learners` -- regression learners used for every nuisance fit
* :mod:`drml_iv.nuisance` -- cross-fitting of the instrument, treatment and outcome regressions
* :mod:`drml_iv.influence` -- pointwise influence-function values
* :mod:`drml_iv.late` -- LATE estimators (cross-fitted one-step, TSLS, Wald)
* :mod:`drml_iv.clate` -- DR-Learner for conditional LATEs
* :mod:`drml_iv.profiling` -- principal-strata profiles
* :mod:`drml_iv.sensitivity` -- monotonicity sensitivity surface
* :mod:`drml_iv.simulation` -- synthetic scenarios and Monte Carlo harness
"""

__version__ = "0.1.0"

from drml_iv.data_model import IvDataset, SchemaConfig, load_dataset  # noqa: E402
from drml_iv.errors import (  # noqa: E402
    DrmlError,
    EstimationError,
    InputError,
    WeakInstrumentError,
)
from drml_iv.late import (  # noqa: E402
    LateResult,
    estimate_late_drml,
    estimate_late_tsls,
    estimate_late_unadjusted,
)
from drml_iv.learners import LearnerSpec  # noqa: E402

__all__ = [
    "__version__",
    "IvDataset",
    "SchemaConfig",
    "load_dataset",
    "DrmlError",
    "EstimationError",
    "InputError",
    "WeakInstrumentError",
    "LateResult",
    "estimate_late_drml",
    "estimate_late_tsls",
    "estimate_late_unadjusted",
    "LearnerSpec",
]
