"""Error taxonomy shared across the workbench, with CLI exit-code mapping."""


class QpwError(Exception):
    """Base class; exit_code drives the CLI contract (1 numeric, 2 config, 3 verification)."""

    exit_code = 1


class InvalidArgumentError(QpwError):
    exit_code = 1


class NumericFailure(QpwError):
    exit_code = 1


class DegeneracyError(NumericFailure):
    """A coupled near-degenerate pair blocks the perturbative generator."""

    def __init__(self, pair, gap, coupling):
        self.pair = pair
        self.gap = gap
        self.coupling = coupling
        super().__init__(
            f"near-degenerate coupled pair {pair}: gap {gap:.3e} GHz below cutoff "
            f"with coupling {coupling:.3e} GHz"
        )


class FrameError(NumericFailure):
    """Dressed-label assignment is ambiguous (max overlap below 0.5)."""


class AccuracyError(NumericFailure):
    """Step-halving disagreement above tolerance; carries both propagators."""

    def __init__(self, message, coarse=None, fine=None):
        self.coarse = coarse
        self.fine = fine
        super().__init__(message)


class CalibrationError(NumericFailure):
    """No duration in the search window reached the fidelity floor."""

    def __init__(self, message, trace=None):
        self.trace = trace or []
        super().__init__(message)


class NumericWarning(UserWarning):
    """Non-fatal numerical quality concern (e.g. finite-difference step noise)."""


class ConfigError(QpwError):
    exit_code = 2


class VerificationError(QpwError):
    """Published-decomposition check failed; carries per-convention scores."""

    exit_code = 3

    def __init__(self, message, scores=None):
        self.scores = scores or {}
        super().__init__(message)
