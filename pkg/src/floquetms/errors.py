"""Exception hierarchy shared by all modules.

Every error carries a short machine-readable ``category`` so the command
line front end can map it to an exit code without string matching.
"""


class FloquetError(Exception):
    category = "floquet-error"


class InvalidArgument(FloquetError, ValueError):
    category = "invalid-argument"


class DegenerateStencil(FloquetError):
    """The order-condition system for a multistep stencil is singular."""

    category = "degenerate-stencil"


class IllPosedStep(FloquetError):
    """``I - dt*beta*G`` at some slice is (numerically) singular."""

    category = "ill-posed-step"

    def __init__(self, slice_index, message=None):
        self.slice_index = slice_index
        if message is None:
            message = (
                f"shifted matrix at slice {slice_index} is singular; "
                "reduce the stepsize there"
            )
        super().__init__(message)


class IterationLimit(FloquetError):
    """An iterative method stopped before meeting its tolerance.

    ``best`` holds whatever partial result the caller may still want.
    """

    category = "iteration-limit"

    def __init__(self, message, best=None, history=None):
        super().__init__(message)
        self.best = best
        self.history = history if history is not None else []


class ReorderFailure(FloquetError):
    category = "reorder-failure"


class BreakdownError(FloquetError):
    """Unexpected loss of rank inside one period of the Arnoldi sweep."""

    category = "breakdown"


class IndexViolation(FloquetError):
    """The DAE is not index 1 at some slice (C11 or G22 singular)."""

    category = "index-violation"

    def __init__(self, slice_index, block):
        self.slice_index = slice_index
        self.block = block
        super().__init__(f"{block} is singular at slice {slice_index}")


class OrbitNotFound(FloquetError):
    category = "orbit-not-found"

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals if residuals is not None else []


class ManifestError(FloquetError):
    category = "manifest-error"


class ConfigError(FloquetError):
    category = "config-error"
