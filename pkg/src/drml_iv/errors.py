"""Exception hierarchy.

Input problems (bad files, bad columns, bad values) and estimation problems
(weak instruments, degenerate fits) are kept apart so the command line can map
them to different exit codes.
"""


class DrmlError(Exception):
    """Base class for all package errors."""


class InputError(DrmlError, ValueError):
    """Invalid data, configuration or arguments supplied by the caller."""


class EstimationError(DrmlError, RuntimeError):
    """An estimator could not produce a trustworthy result."""


class WeakInstrumentError(EstimationError):
    """The estimated instrument effect on treatment is below the floor."""

    def __init__(self, delta_hat: float, floor: float, where: str = ""):
        self.delta_hat = float(delta_hat)
        self.floor = float(floor)
        loc = f" {where}" if where else ""
        super().__init__(
            f"weak instrument{loc}: |Delta_hat| = {abs(delta_hat):.4g} < floor {floor:g}"
        )
