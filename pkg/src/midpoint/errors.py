"""Exception hierarchy shared by all modules."""


class MidpointError(Exception):
    pass


# mesh construction and I/O
class MeshError(MidpointError, ValueError):
    pass


class NonManifoldEdge(MeshError):
    pass


class OrientationConflict(MeshError):
    pass


class DanglingVertex(MeshError):
    pass


class BoundaryNotAllowed(MeshError):
    pass


class DegreeOutOfRange(MidpointError, ValueError):
    pass


class ParseError(MidpointError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


# ringnets
class BadValence(MidpointError, ValueError):
    pass


class BadFrequency(MidpointError, ValueError):
    pass


class ParityMismatch(MidpointError, ValueError):
    pass


class TooFewRings(MidpointError, ValueError):
    pass


class AngleOutOfRange(MidpointError, ValueError):
    pass


class TopologyMismatch(MidpointError, ValueError):
    pass


# spectral analysis
class OrderingViolation(MidpointError):
    pass


class OrbitMismatch(MidpointError):
    pass


class ConvergenceFailure(MidpointError):
    pass


class NoConvergence(ConvergenceFailure):
    pass


class PositivityViolation(MidpointError):
    pass


class IllConditioned(MidpointError):
    pass


# characteristic map
class SubnetIrregular(MidpointError):
    pass


class DomainError(MidpointError, ValueError):
    pass
