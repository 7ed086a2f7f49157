"""Exception hierarchy shared by the Python modules and the compiled kernel."""


class GeometryError(ValueError):
    """Invalid point, dimension mismatch, or out-of-range parameter."""


class AntipodalError(GeometryError):
    """Two points are (numerically) antipodal, so the geodesic is not unique."""


class SolverError(RuntimeError):
    """The argmin solver found no feasible point; distinct from invalid input."""


class NonFiniteStateError(RuntimeError):
    """An iterate acquired non-finite coordinates."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConfigError(ValueError):
    """A configuration file failed to parse or validate.

    ``field`` is a dotted path such as ``mappings[1].radius`` (or ``line N``
    for JSON syntax errors) so the CLI can emit a one-line diagnostic.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.detail = message
