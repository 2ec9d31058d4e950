"""Exception hierarchy shared by every module."""


class AlgebraError(Exception):
    """Base class for all errors raised by hspalg."""


class MalformedInput(AlgebraError, ValueError):
    """Input data (file, term text, table) is not well formed."""


class UnknownVariable(AlgebraError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class ArityMismatch(MalformedInput):
    pass


class SignatureMismatch(AlgebraError, ValueError):
    pass


class SizeLimitExceeded(AlgebraError):
    """A configured size cap would be exceeded by the requested computation."""


class NotACongruence(AlgebraError, ValueError):
    pass


class NotStable(AlgebraError, ValueError):
    pass


class NegativeEpsilon(AlgebraError, ValueError):
    pass


class MalformedProof(AlgebraError, ValueError):
    """Structural defect in a proof tree; ``path`` locates the offending node."""

    def __init__(self, message, path=()):
        self.path = tuple(path)
        where = "/".join(str(i) for i in self.path) or "<root>"
        super().__init__(f"{message} (at node {where})")
