"""Exception hierarchy shared by every FEQR module."""

from typing import Any, Dict, Optional, Sequence


class FeqrError(Exception):
    """Base class for all errors raised by this package."""


# Data / panel


class PanelError(FeqrError, ValueError):
    """Raised when a panel cannot be ingested or is structurally invalid."""


class MissingFile(PanelError):
    def __init__(self, path: str) -> None:
        super().__init__(f"MissingFile: no such file '{path}'")
        self.path = path


class MalformedTable(PanelError):
    def __init__(self, reason: str) -> None:
        super().__init__(f"MalformedTable: {reason}")
        self.reason = reason


class EmptyPanel(PanelError):
    def __init__(self) -> None:
        super().__init__("EmptyPanel: the table has a header but no data rows")


class SchemaMismatch(PanelError):
    def __init__(self, missing: Sequence[str], extra: Sequence[str]) -> None:
        super().__init__(
            f"SchemaMismatch: missing columns {list(missing)}, unexpected columns {list(extra)}"
        )
        self.missing = list(missing)
        self.extra = list(extra)


class MissingCell(PanelError):
    def __init__(self, unit: str, time: str) -> None:
        super().__init__(f"MissingCell: panel is unbalanced, no row for (unit={unit}, time={time})")
        self.unit = unit
        self.time = time


class DuplicateCell(PanelError):
    def __init__(self, unit: str, time: str) -> None:
        super().__init__(f"DuplicateCell: more than one row for (unit={unit}, time={time})")
        self.unit = unit
        self.time = time


class NonFiniteValue(PanelError):
    def __init__(self, row: int, column: str) -> None:
        super().__init__(f"NonFiniteValue: row {row}, column '{column}'")
        self.row = row
        self.column = column


# Arguments


class InvalidArgument(FeqrError, ValueError):
    """Raised for out-of-range scalar arguments."""


class InvalidQuantile(InvalidArgument):
    def __init__(self, tau: Any) -> None:
        super().__init__(f"InvalidQuantile: tau must lie strictly inside (0, 1), got {tau}")
        self.tau = tau


class ConfigError(InvalidArgument):
    """Raised when a study configuration file or object is invalid."""


class DimensionMismatch(FeqrError, ValueError):
    """Raised when parameter or matrix shapes disagree with the panel."""


class IndexOutOfRange(FeqrError, IndexError):
    """Raised when a unit index lies outside [0, N)."""


# Solver


class SolverError(FeqrError, RuntimeError):
    """Base class for optimisation failures."""


class SingularNormalEquations(SolverError):
    def __init__(self, rank: int, n_regressors: int) -> None:
        super().__init__(
            f"SingularNormalEquations: within-unit regressor matrix has rank {rank} < p={n_regressors}; "
            "a regressor is collinear with the unit intercepts"
        )
        self.rank = rank
        self.n_regressors = n_regressors


class DidNotConverge(SolverError):
    def __init__(self, fit: Any) -> None:
        super().__init__(
            f"DidNotConverge: tau={fit.tau} after {fit.iterations} iterations, "
            f"certificate passes={fit.certificate.passes}"
        )
        self.fit = fit


class PathFitError(SolverError):
    """Raised by fit_path after all levels ran when at least one level failed."""

    def __init__(self, fits: Dict[float, Any], errors: Dict[float, Exception]) -> None:
        detail = ", ".join(f"tau={tau}: {err}" for tau, err in errors.items())
        super().__init__(f"fit_path failed for {len(errors)} level(s): {detail}")
        self.fits = fits
        self.errors = errors


# Covariance / inference


class CovarianceError(FeqrError, RuntimeError):
    """Base class for covariance estimation failures."""


class SingularGamma(CovarianceError):
    def __init__(self, condition_number: float, gamma: Any) -> None:
        super().__init__(
            f"SingularGamma: symmetrised Gamma has condition number {condition_number:.3e}"
        )
        self.condition_number = condition_number
        self.gamma = gamma


class ZeroDensity(CovarianceError):
    def __init__(self, units: Sequence[int]) -> None:
        super().__init__(f"ZeroDensity: kernel density estimate is zero for units {list(units)}")
        self.units = list(units)


class NegativeVariance(CovarianceError):
    def __init__(self, index: int, value: float) -> None:
        super().__init__(f"NegativeVariance: V[{index},{index}] = {value:.3e}")
        self.index = index
        self.value = value


# Simulation


class StudyError(FeqrError, RuntimeError):
    """Base class for Monte Carlo study failures."""


class EmptyCell(StudyError):
    def __init__(self, message: Optional[str] = None) -> None:
        super().__init__(message or "EmptyCell: no successful replication to aggregate")


class StudyAborted(StudyError):
    def __init__(self, n_units: int, n_periods: int, tau: float) -> None:
        super().__init__(
            f"StudyAborted: every replication failed for cell (N={n_units}, T={n_periods}, tau={tau})"
        )
        self.n_units = n_units
        self.n_periods = n_periods
        self.tau = tau
